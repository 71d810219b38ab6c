#include "lamward/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "lamward/error.hpp"
#include "lamward/kernels.hpp"

namespace lamward {

std::size_t ParamSet::add(std::string name, Tensor init, bool decay) {
  if (contains(name)) throw std::invalid_argument("ParamSet: duplicate parameter " + name);
  items_.push_back(Param{std::move(name), std::move(init), decay});
  return items_.size() - 1;
}

bool ParamSet::contains(std::string_view name) const {
  for (const auto& p : items_)
    if (p.name == name) return true;
  return false;
}

std::size_t ParamSet::index(std::string_view name) const {
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (items_[i].name == name) return i;
  throw std::out_of_range("ParamSet: no parameter named " + std::string(name));
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.value.size();
  return n;
}

bool ParamSet::operator==(const ParamSet& o) const {
  if (items_.size() != o.items_.size()) return false;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& a = items_[i];
    const auto& b = o.items_[i];
    if (a.name != b.name || a.decay != b.decay || !(a.value == b.value)) return false;
  }
  return true;
}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), {}, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const ParamSet& set, std::string_view name) { return param(set, set.index(name)); }

Var Tape::param(const ParamSet& set, std::size_t index) {
  nodes_.push_back(Node{"param", set.at(index).value, {}, true, nullptr});
  bindings_.push_back(Binding{&set, index, nodes_.size() - 1});
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(const char* op, Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return push(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Tape::push(const char* op, Tensor value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  for (const auto& p : parents) {
    if (&p.tape() != this) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
    needs = needs || nodes_[p.id()].needs_grad;
  }
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  nodes_.push_back(Node{op, std::move(value), {}, needs, needs ? std::move(fn) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const auto& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss from another tape");
  if (loss.value().size() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.value()));
  for (auto& n : nodes_) n.grad = Tensor();
  visits_ = 0;
  grad(loss.id()).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (!n.grad.all_finite())
      throw NumericError(std::string("NaN/Inf gradient during backward at op '") + n.op + "'");
    ++visits_;
    if (n.backward) n.backward(*this, i);
  }
}

std::vector<Tensor> Tape::param_grads(const ParamSet& set) const {
  std::vector<Tensor> out;
  out.reserve(set.size());
  for (const auto& p : set) out.emplace_back(p.value.rows(), p.value.cols());
  for (const auto& b : bindings_) {
    if (b.set != &set) continue;
    const auto& g = nodes_[b.node].grad;
    if (g.empty()) continue;
    auto dst = out[b.index].data();
    auto src = g.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
  return out;
}

std::vector<Tensor> grad(Var loss, const ParamSet& params) {
  loss.tape().backward(loss);
  return loss.tape().param_grads(params);
}

namespace ad {
namespace {

void accumulate(Tape& t, std::size_t id, const Tensor& g) {
  if (!t.needs_grad(id)) return;
  auto dst = t.grad(id).data();
  auto src = g.data();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

template <class F>
Var unary(const char* op, Var a, F&& f, std::function<double(double x, double y)> dfdx) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t k = 0; k < x.size(); ++k) y[k] = f(x[k]);
  const std::size_t ai = a.id();
  return a.tape().push(op, std::move(y), {a}, [ai, dfdx = std::move(dfdx)](Tape& t, std::size_t self) {
    if (!t.needs_grad(ai)) return;
    const Tensor& x = t.value(ai);
    const Tensor& y = t.value(self);
    const Tensor& gy = t.grad(self);
    Tensor& gx = t.grad(ai);
    for (std::size_t k = 0; k < x.size(); ++k) gx[k] += gy[k] * dfdx(x[k], y[k]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tensor out;
  kernels::matmul(a.value(), b.value(), out);
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().push("matmul", std::move(out), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ai)) {
      Tensor ga;
      kernels::matmul_nt(g, t.value(bi), ga);
      accumulate(t, ai, ga);
    }
    if (t.needs_grad(bi)) {
      Tensor gb;
      kernels::matmul_tn(t.value(ai), g, gb);
      accumulate(t, bi, gb);
    }
  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y(j, i) = x(i, j);
  const std::size_t ai = a.id();
  return a.tape().push("transpose", std::move(y), {a}, [ai](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ai);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(j, i);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += b.value()[k];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().push("add", std::move(y), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    accumulate(t, ai, g);
    accumulate(t, bi, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y[k] -= b.value()[k];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().push("sub", std::move(y), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    accumulate(t, ai, g);
    if (t.needs_grad(bi)) {
      Tensor& gb = t.grad(bi);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] -= g[k];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y[k] *= b.value()[k];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().push("mul", std::move(y), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ai)) {
      Tensor& ga = t.grad(ai);
      const Tensor& vb = t.value(bi);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * vb[k];
    }
    if (t.needs_grad(bi)) {
      Tensor& gb = t.grad(bi);
      const Tensor& va = t.value(ai);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * va[k];
    }
  });
}

namespace {

enum class RowOp { add, sub, mul };

Var row_broadcast(const char* op, RowOp kind, Var a, Var row) {
  const Tensor& x = a.value();
  const Tensor& r = row.value();
  if (r.rows() != 1 || r.cols() != x.cols())
    throw ShapeError(std::string(op) + ": row operand must be 1 x " + std::to_string(x.cols()) + ", got " +
                     shape_str(r));
  Tensor y = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (kind == RowOp::add) y(i, j) += r[j];
      else if (kind == RowOp::sub) y(i, j) -= r[j];
      else y(i, j) *= r[j];
    }
  const std::size_t ai = a.id(), ri = row.id();
  return a.tape().push(op, std::move(y), {a, row}, [ai, ri, kind](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const std::size_t rows = g.rows(), cols = g.cols();
    if (t.needs_grad(ai)) {
      Tensor& ga = t.grad(ai);
      const Tensor& r = t.value(ri);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) ga(i, j) += kind == RowOp::mul ? g(i, j) * r[j] : g(i, j);
    }
    if (t.needs_grad(ri)) {
      Tensor& gr = t.grad(ri);
      const Tensor& x = t.value(ai);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
          if (kind == RowOp::add) gr[j] += g(i, j);
          else if (kind == RowOp::sub) gr[j] -= g(i, j);
          else gr[j] += g(i, j) * x(i, j);
        }
    }
  });
}

}  // namespace

Var add_row(Var a, Var row) { return row_broadcast("add_row", RowOp::add, a, row); }
Var sub_row(Var a, Var row) { return row_broadcast("sub_row", RowOp::sub, a, row); }
Var mul_row(Var a, Var row) { return row_broadcast("mul_row", RowOp::mul, a, row); }

Var scale(Var a, double c) {
  return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary("add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var silu(Var a) {
  return unary(
      "silu", a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(Var a) {
  return unary(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sqrt_floor(Var a, double floor) {
  for (double v : a.value().data())
    if (v < 0.0) throw NumericError("sqrt_floor: negative input");
  return unary(
      "sqrt_floor", a, [](double x) { return std::sqrt(x); },
      [floor](double x, double) { return 0.5 / std::sqrt(std::max(x, floor)); });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ai = a.id();
  return a.tape().push("sum", Tensor::scalar(s), {a}, [ai](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (auto& v : t.grad(ai).data()) v += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var sum_rows(Var a) {
  const Tensor& x = a.value();
  Tensor y(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y[j] += x(i, j);
  const std::size_t ai = a.id();
  return a.tape().push("sum_rows", std::move(y), {a}, [ai](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ai);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g[j];
  });
}

Var mean_rows(Var a) { return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows())); }

Var sum_cols(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y[i] += x(i, j);
  const std::size_t ai = a.id();
  return a.tape().push("sum_cols", std::move(y), {a}, [ai](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ai);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g[i];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Tensor y(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor& x = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) y(i, off + j) = x(i, j);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += x.cols();
  }
  return parts.front().tape().push("concat_cols", std::move(y), parts, [ids, offsets](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (!t.needs_grad(ids[p])) continue;
      Tensor& gp = t.grad(ids[p]);
      for (std::size_t i = 0; i < gp.rows(); ++i)
        for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(i, offsets[p] + j);
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& x = a.value();
  if (begin + count > x.cols()) throw ShapeError("slice_cols: range out of bounds");
  Tensor y(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) y(i, j) = x(i, begin + j);
  const std::size_t ai = a.id();
  return a.tape().push("slice_cols", std::move(y), {a}, [ai, begin](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ai);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, begin + j) += g(i, j);
  });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  const Tensor& x = a.value();
  Tensor y(index.size(), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.rows()) throw ShapeError("gather_rows: index out of range");
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = x(index[i], j);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const std::size_t ai = a.id();
  return a.tape().push("gather_rows", std::move(y), {a}, [ai, idx = std::move(idx)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ai);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(idx[i], j) += g(i, j);
  });
}

Var stop_gradient(Var a) { return a.tape().constant(a.value()); }

Var straight_through(Var input, Var quantized) {
  require_same_shape(input.value(), quantized.value(), "straight_through");
  const std::size_t ii = input.id();
  return input.tape().push("straight_through", quantized.value(), {input},
                           [ii](Tape& t, std::size_t self) { accumulate(t, ii, t.grad(self)); });
}

Var layer_norm(Var a, double eps) {
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor y(rows, cols);
  Tensor inv_std(rows, 1);
  for (std::size_t i = 0; i < rows; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mu += x(i, j);
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < cols; ++j) y(i, j) = (x(i, j) - mu) * is;
  }
  const std::size_t ai = a.id();
  return a.tape().push("layer_norm", std::move(y), {a},
                       [ai, inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
                         const Tensor& y = t.value(self);
                         const Tensor& g = t.grad(self);
                         Tensor& ga = t.grad(ai);
                         const std::size_t rows = y.rows(), cols = y.cols();
                         const double n = static_cast<double>(cols);
                         for (std::size_t i = 0; i < rows; ++i) {
                           double mg = 0.0, mgy = 0.0;
                           for (std::size_t j = 0; j < cols; ++j) {
                             mg += g(i, j);
                             mgy += g(i, j) * y(i, j);
                           }
                           mg /= n;
                           mgy /= n;
                           for (std::size_t j = 0; j < cols; ++j)
                             ga(i, j) += inv_std[i] * (g(i, j) - mg - y(i, j) * mgy);
                         }
                       });
}

}  // namespace ad
}  // namespace lamward
