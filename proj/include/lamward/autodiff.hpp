#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lamward/tensor.hpp"

namespace lamward {

struct Param {
  std::string name;
  Tensor value;
  bool decay = true;  // AdamW weight decay applies
};

/// Ordered, named parameter registry. Only tensors registered here can receive
/// gradients; anything else enters a Tape as a constant.
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor init, bool decay = true);
  bool contains(std::string_view name) const;
  std::size_t index(std::string_view name) const;

  Param& at(std::size_t i) { return items_.at(i); }
  const Param& at(std::size_t i) const { return items_.at(i); }
  Tensor& value(std::string_view name) { return items_[index(name)].value; }
  const Tensor& value(std::string_view name) const { return items_[index(name)].value; }

  std::size_t size() const { return items_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  bool operator==(const ParamSet&) const;

 private:
  std::vector<Param> items_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, which is a
/// topological order; backward walks it once in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor value);
  Var param(const ParamSet& set, std::string_view name);
  Var param(const ParamSet& set, std::size_t index);

  /// Accumulates d(loss)/d(node) for every node. loss must be 1 x 1.
  void backward(Var loss);

  /// Gradient of the last backward() w.r.t. each entry of `set`, aligned with
  /// it; parameters the loss never reached get zeros.
  std::vector<Tensor> param_grads(const ParamSet& set) const;

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Gradient buffer of a node, allocated as zeros on first access.
  Tensor& grad(std::size_t id);
  Tensor grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  std::size_t backward_visits() const { return visits_; }

  /// Low-level node constructor used by the ops.
  Var push(const char* op, Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var push(const char* op, Tensor value, std::span<const Var> parents, BackwardFn fn);

 private:
  struct Node {
    const char* op;
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    BackwardFn backward;
  };
  struct Binding {
    const ParamSet* set;
    std::size_t index;
    std::size_t node;
  };
  std::vector<Node> nodes_;
  std::vector<Binding> bindings_;
  std::size_t visits_ = 0;
};

/// d(loss)/d(p) for every p in params (zeros where unreached).
std::vector<Tensor> grad(Var loss, const ParamSet& params);

namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a (R x C) op row (1 x C), broadcast over rows.
Var add_row(Var a, Var row);
Var sub_row(Var a, Var row);
Var mul_row(Var a, Var row);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);

Var silu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var square(Var a);
/// Subgradient 0 at 0.
Var abs(Var a);
/// max(a, 0); gradient 0 at the kink.
Var relu(Var a);
/// sqrt(a) for a >= 0. The derivative uses max(a, floor) so a collapsed
/// input yields a finite gradient; the value is exact.
Var sqrt_floor(Var a, double floor);

Var sum(Var a);
Var mean(Var a);
/// Column sums / means: R x C -> 1 x C.
Var sum_rows(Var a);
Var mean_rows(Var a);
/// Row sums: R x C -> R x 1.
Var sum_cols(Var a);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var gather_rows(Var a, std::span<const std::size_t> index);

Var stop_gradient(Var a);
/// Forward value of `quantized`, gradient routed to `input` unchanged.
Var straight_through(Var input, Var quantized);

/// Per-row normalization to zero mean and unit variance (no affine).
Var layer_norm(Var a, double eps = 1e-5);

}  // namespace ad
}  // namespace lamward
