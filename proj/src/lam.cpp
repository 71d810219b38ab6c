#include "lamward/lam.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lamward/binio.hpp"
#include "lamward/error.hpp"

namespace lamward {

std::string to_string(RegKind k) {
  switch (k) {
    case RegKind::none: return "none";
    case RegKind::sparse: return "sparse";
    case RegKind::noisy: return "noisy";
    case RegKind::discrete: return "discrete";
    case RegKind::deterministic: return "deterministic";
  }
  return "none";
}

RegKind parse_reg_kind(std::string_view s) {
  if (s == "none") return RegKind::none;
  if (s == "sparse") return RegKind::sparse;
  if (s == "noisy") return RegKind::noisy;
  if (s == "discrete") return RegKind::discrete;
  if (s == "deterministic") return RegKind::deterministic;
  throw std::invalid_argument("unknown regularizer kind: " + std::string(s));
}

void RegularizerCfg::validate() const {
  for (double c : {l1, l2, var, cov, mean, beta, commitment, reset_noise})
    if (!(c >= 0.0)) throw std::invalid_argument("RegularizerCfg: coefficients must be >= 0");
  if (kind == RegKind::discrete && codebook_size == 0)
    throw std::invalid_argument("RegularizerCfg: codebook must be non-empty");
  if (kind == RegKind::discrete && reset_enabled && reset_period == 0)
    throw std::invalid_argument("RegularizerCfg: reset period must be positive");
}

std::string RegularizerCfg::label() const {
  switch (kind) {
    case RegKind::none: return "unconstrained";
    case RegKind::deterministic: return "deterministic";
    case RegKind::sparse: return "sparse(l1=" + format_double(l1) + ")";
    case RegKind::noisy: return "noisy(beta=" + format_double(beta) + ")";
    case RegKind::discrete: return "discrete(C=" + std::to_string(codebook_size) + ")";
  }
  return "?";
}

std::pair<int, double> regularization_rank(const RegularizerCfg& reg) {
  switch (reg.kind) {
    case RegKind::none: return {0, 0.0};
    case RegKind::sparse: return {1, reg.l1};
    case RegKind::noisy: return {1, reg.beta};
    case RegKind::discrete: return {1, 1.0 / static_cast<double>(std::max<std::size_t>(reg.codebook_size, 1))};
    case RegKind::deterministic: return {2, 0.0};
  }
  return {0, 0.0};
}

namespace {

Tensor lecun_normal(Rng& rng, std::size_t in, std::size_t out, double gain = 1.0) {
  Tensor w = rng_draw(rng, Dist::normal, in, out);
  const double s = gain / std::sqrt(static_cast<double>(in));
  for (auto& v : w.data()) v *= s;
  return w;
}

void add_linear(ParamSet& p, Rng& rng, const std::string& name, std::size_t in, std::size_t out, double gain = 1.0) {
  Rng r = rng.child(name);
  p.add(name + ".W", lecun_normal(r, in, out, gain));
  p.add(name + ".b", Tensor(1, out), false);
}

Var linear(Tape& t, const ParamSet& p, const std::string& name, Var x) {
  return ad::add_row(ad::matmul(x, t.param(p, name + ".W")), t.param(p, name + ".b"));
}

std::size_t idm_out_dim(const ModelCfg& m) {
  return m.reg.kind == RegKind::noisy ? 2 * m.latent_dim : m.latent_dim;
}

}  // namespace

ModelBundle make_bundle(const ModelCfg& model, const TrainCfg& train, const Encoder& encoder, std::uint64_t init_seed) {
  model.reg.validate();
  if (model.latent_dim == 0 || model.hidden == 0 || model.window == 0)
    throw std::invalid_argument("ModelCfg: dimensions must be positive");
  if (!(train.pred_weight > 0.0)) throw std::invalid_argument("TrainCfg: pred_weight must be positive");
  ModelBundle b{model, train, encoder, {}, {}, {}, 0, 0};
  const std::size_t R = encoder.cfg().repr_dim, H = model.hidden, D = model.latent_dim;
  Rng rng(init_seed, "init");
  auto& p = b.params;
  if (model.reg.kind != RegKind::deterministic) {
    add_linear(p, rng, "idm.l0", 2 * R, H);
    add_linear(p, rng, "idm.l1", H, H);
    add_linear(p, rng, "idm.out", H, idm_out_dim(model));
  }
  add_linear(p, rng, "fwd.in", model.window * R, H);
  for (std::size_t k = 0; k < model.blocks; ++k) {
    const std::string blk = "fwd.blk" + std::to_string(k);
    // Modulation projection (shift | scale | gate) starts at zero.
    p.add(blk + ".mod.W", Tensor(D, 3 * H));
    p.add(blk + ".mod.b", Tensor(1, 3 * H), false);
    add_linear(p, rng, blk + ".fc1", H, H);
    add_linear(p, rng, blk + ".fc2", H, H);
  }
  add_linear(p, rng, "fwd.out", H, R);
  p.add("fwd.skip", Tensor(1, R, 1.0), false);
  if (model.reg.kind == RegKind::discrete) {
    Rng cr = rng.child("codebook");
    Tensor codes = rng_draw(cr, Dist::normal, model.reg.codebook_size, D);
    p.add("codebook", std::move(codes), false);
    b.code_usage.assign(model.reg.codebook_size, 0);
  }
  b.opt = AdamWState::init(p, AdamWHyper{train.lr, train.beta1, train.beta2, train.eps, train.weight_decay});
  return b;
}

// ---------------------------------------------------------------------------
// Regularizers

Var sparse_energy(Var z, double l1, double l2) {
  const double sqrt_d = std::sqrt(static_cast<double>(z.cols()));
  Var sq = ad::sum_cols(ad::square(z));
  Var hinge = ad::relu(ad::add_scalar(ad::scale(sq, -1.0), sqrt_d));
  Var l1n = ad::sum_cols(ad::abs(z));
  return ad::add(ad::scale(hinge, l2), ad::scale(l1n, l1));
}

Var reg_sparse_loss(Var z, const RegularizerCfg& cfg) {
  const std::size_t N = z.rows(), D = z.cols();
  if (N < 2) throw std::invalid_argument("reg_sparse_loss: need at least 2 rows for the batch variance");
  Tape& t = z.tape();
  Var centered = ad::sub_row(z, ad::mean_rows(z));
  Var variance = ad::mean_rows(ad::square(centered));
  // Exact sqrt; the derivative is floored at var = 1e-4 for collapsed dims.
  Var stdev = ad::sqrt_floor(variance, 1e-4);
  Var v_term = ad::scale(ad::mean(ad::relu(ad::add_scalar(ad::scale(stdev, -1.0), 1.0))), cfg.var);
  Var total = v_term;
  if (D > 1) {
    Var cov = ad::scale(ad::matmul(ad::transpose(centered), centered), 1.0 / static_cast<double>(N));
    Tensor off(D, D, 1.0);
    for (std::size_t d = 0; d < D; ++d) off(d, d) = 0.0;
    Var off_sq = ad::sum(ad::mul(ad::square(cov), t.constant(std::move(off))));
    total = ad::add(total, ad::scale(off_sq, cfg.cov / static_cast<double>(D * (D - 1))));
  }
  total = ad::add(total, ad::scale(ad::mean(z), cfg.mean));
  Var energy = ad::mean(sparse_energy(z, cfg.l1, cfg.l2));
  return ad::add(total, energy);
}

double reg_sparse_loss(const Tensor& z, const RegularizerCfg& cfg) {
  Tape t;
  return reg_sparse_loss(t.constant(z), cfg).value().item();
}

Var reg_kl_loss(Var mu, Var log_sigma, double beta) {
  require_same_shape(mu.value(), log_sigma.value(), "reg_kl_loss");
  // mu^2 + sigma^2 - 1 - ln sigma^2 with sigma^2 = exp(2 log_sigma)
  Var terms = ad::sub(ad::add(ad::square(mu), ad::exp(ad::scale(log_sigma, 2.0))),
                      ad::add_scalar(ad::scale(log_sigma, 2.0), 1.0));
  return ad::scale(ad::sum(terms), 0.5 * beta / static_cast<double>(mu.rows()));
}

double reg_kl_loss(const Tensor& mu, const Tensor& log_sigma, double beta) {
  Tape t;
  return reg_kl_loss(t.constant(mu), t.constant(log_sigma), beta).value().item();
}

namespace {

std::vector<std::size_t> nearest_codes(const Tensor& z_e, const Tensor& codebook) {
  if (codebook.rows() == 0) throw std::invalid_argument("vq_quantize: empty codebook");
  if (codebook.cols() != z_e.cols()) throw ShapeError("vq_quantize: code dimension mismatch");
  std::vector<std::size_t> idx(z_e.rows());
  for (std::size_t i = 0; i < z_e.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < codebook.rows(); ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < z_e.cols(); ++j) {
        const double diff = z_e(i, j) - codebook(c, j);
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    idx[i] = arg;
  }
  return idx;
}

}  // namespace

VqGraph vq_quantize(Var z_e, Var codebook, double commitment) {
  auto codes = nearest_codes(z_e.value(), codebook.value());
  Var c = ad::gather_rows(codebook, codes);
  const double inv_n = 1.0 / static_cast<double>(z_e.rows());
  Var codebook_term = ad::sum(ad::square(ad::sub(ad::stop_gradient(z_e), c)));
  Var commit_term = ad::sum(ad::square(ad::sub(z_e, ad::stop_gradient(c))));
  Var loss = ad::scale(ad::add(codebook_term, ad::scale(commit_term, commitment)), inv_n);
  return VqGraph{ad::straight_through(z_e, c), std::move(codes), loss};
}

VqValue vq_quantize(const Tensor& z_e, const Tensor& codebook, double commitment, std::vector<std::uint64_t>* usage) {
  Tape t;
  auto g = vq_quantize(t.constant(z_e), t.constant(codebook), commitment);
  if (usage) {
    if (usage->size() != codebook.rows()) throw ShapeError("vq_quantize: usage size mismatch");
    for (auto c : g.codes) ++(*usage)[c];
  }
  return VqValue{g.z_q.value(), g.codes, g.loss.value().item()};
}

std::size_t codebook_reset(Tensor& codebook, std::vector<std::uint64_t>& usage, const Tensor& z_e, Rng& rng,
                           double noise) {
  if (usage.size() != codebook.rows()) throw ShapeError("codebook_reset: usage size mismatch");
  if (z_e.cols() != codebook.cols()) throw ShapeError("codebook_reset: code dimension mismatch");
  std::size_t reset = 0;
  for (std::size_t c = 0; c < codebook.rows(); ++c) {
    if (usage[c] != 0 || z_e.rows() == 0) continue;
    const std::size_t src = rng.below(z_e.rows());
    for (std::size_t j = 0; j < codebook.cols(); ++j) codebook(c, j) = z_e(src, j) + noise * rng.normal();
    ++reset;
  }
  std::fill(usage.begin(), usage.end(), 0);
  return reset;
}

// ---------------------------------------------------------------------------
// IDM

LatentGraph infer_latents(Tape& tape, const ModelBundle& b, Var s_t, Var s_next, Mode mode, Rng* noise) {
  const std::size_t R = b.repr_dim(), D = b.latent_dim();
  if (s_t.cols() != R || s_next.cols() != R || s_t.rows() != s_next.rows())
    throw ShapeError("idm: expected two N x " + std::to_string(R) + " inputs, got " + shape_str(s_t.value()) +
                     " and " + shape_str(s_next.value()));
  LatentGraph out;
  const auto kind = b.model.reg.kind;
  if (kind == RegKind::deterministic) {
    out.z = tape.constant(Tensor(s_t.rows(), D));
    return out;
  }
  const auto& p = b.params;
  std::vector<Var> parts{s_t, s_next};
  Var h = ad::silu(linear(tape, p, "idm.l0", ad::concat_cols(parts)));
  h = ad::silu(linear(tape, p, "idm.l1", h));
  Var head = linear(tape, p, "idm.out", h);
  switch (kind) {
    case RegKind::noisy: {
      Var mu = ad::slice_cols(head, 0, D);
      Var ls = ad::slice_cols(head, D, D);
      out.mu = mu;
      out.log_sigma = ls;
      if (mode == Mode::eval) {
        out.z = mu;
      } else {
        if (!noise) throw std::invalid_argument("idm: noisy head in train mode needs a noise stream");
        Var eps = tape.constant(rng_draw(*noise, Dist::normal, mu.rows(), D));
        out.z = ad::add(mu, ad::mul(ad::exp(ls), eps));
      }
      break;
    }
    case RegKind::discrete: {
      out.z_e = head;
      auto vq = vq_quantize(head, tape.param(p, "codebook"), b.model.reg.commitment);
      out.z = vq.z_q;
      out.codes = std::move(vq.codes);
      out.vq_loss = vq.loss;
      break;
    }
    default:
      out.z = head;
  }
  return out;
}

LatentAction idm_infer(const Tensor& s_t, const Tensor& s_next, const ModelBundle& b, Mode mode, Rng* noise) {
  Tape t;
  auto g = infer_latents(t, b, t.constant(s_t), t.constant(s_next), mode, noise);
  LatentAction out;
  out.z = g.z.value();
  if (g.mu) out.mu = g.mu->value();
  if (g.log_sigma) out.log_sigma = g.log_sigma->value();
  out.codes = g.codes;
  return out;
}

// ---------------------------------------------------------------------------
// Forward model

Tensor window_inputs(const Tensor& reprs, std::size_t window) {
  if (reprs.rows() < 2) throw ShapeError("window_inputs: need at least 2 frames");
  const std::size_t R = reprs.cols(), n = reprs.rows() - 1;
  Tensor out(n, window * R);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t w = 0; w < window; ++w) {
      const std::size_t back = window - 1 - w;
      const std::size_t src = t >= back ? t - back : 0;
      std::copy(reprs.row(src).begin(), reprs.row(src).end(), out.row(t).begin() + static_cast<std::ptrdiff_t>(w * R));
    }
  return out;
}

Var forward_graph(Tape& tape, const ModelBundle& b, Var context, Var z) {
  const std::size_t R = b.repr_dim(), H = b.model.hidden, W = b.model.window;
  if (context.cols() != W * R) throw ShapeError("forward model: context must be N x window*R");
  if (z.cols() != b.latent_dim() || z.rows() != context.rows())
    throw ShapeError("forward model: latents misaligned with context");
  const auto& p = b.params;
  Var h = linear(tape, p, "fwd.in", context);
  for (std::size_t k = 0; k < b.model.blocks; ++k) {
    const std::string blk = "fwd.blk" + std::to_string(k);
    Var mod = linear(tape, p, blk + ".mod", z);
    Var shift = ad::slice_cols(mod, 0, H);
    Var scale = ad::slice_cols(mod, H, H);
    Var gate = ad::slice_cols(mod, 2 * H, H);
    Var u = ad::add(ad::mul(ad::layer_norm(h), ad::add_scalar(scale, 1.0)), shift);
    Var v = linear(tape, p, blk + ".fc2", ad::silu(linear(tape, p, blk + ".fc1", u)));
    h = ad::add(h, ad::mul(gate, v));
  }
  Var last = ad::slice_cols(context, (W - 1) * R, R);
  return ad::add(ad::mul_row(last, tape.param(p, "fwd.skip")), linear(tape, p, "fwd.out", h));
}

Tensor forward_predict(const Tensor& reprs, const Tensor& latents, const ModelBundle& b) {
  if (reprs.cols() != b.repr_dim()) throw ShapeError("forward_predict: representation width mismatch");
  if (latents.rows() != reprs.rows() || latents.cols() != b.latent_dim())
    throw ShapeError("forward_predict: need one latent per input frame, got " + shape_str(latents) + " for " +
                     shape_str(reprs));
  // Append a dummy frame so window_inputs yields one row per input frame.
  Tensor padded(reprs.rows() + 1, reprs.cols());
  std::copy(reprs.data().begin(), reprs.data().end(), padded.data().begin());
  Tape t;
  return forward_graph(t, b, t.constant(window_inputs(padded, b.model.window)), t.constant(latents)).value();
}

// ---------------------------------------------------------------------------
// Training

std::vector<std::size_t> batch_indices(const TrainCfg& cfg, std::uint64_t step, std::size_t dataset_size) {
  if (dataset_size == 0) throw std::invalid_argument("empty training set");
  Rng r = Rng(cfg.seed, "batch").child(step);
  std::vector<std::size_t> idx(cfg.batch);
  for (auto& i : idx) i = r.below(dataset_size);
  return idx;
}

LossReport train_step(ModelBundle& b, std::span<const Tensor* const> batch) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const std::size_t R = b.repr_dim();
  std::vector<Tensor> ctx_parts, cur_parts, next_parts;
  for (const Tensor* ep : batch) {
    if (ep->cols() != R || ep->rows() < 2) throw ShapeError("train_step: bad representation sequence");
    ctx_parts.push_back(window_inputs(*ep, b.model.window));
    cur_parts.push_back(ep->rows_slice(0, ep->rows() - 1));
    next_parts.push_back(ep->rows_slice(1, ep->rows() - 1));
  }
  Tape t;
  Var context = t.constant(vstack(ctx_parts));
  Var s_t = t.constant(vstack(cur_parts));
  Var s_next = t.constant(vstack(next_parts));

  Rng noise = Rng(b.train.seed, "noise").child(b.step);
  auto lat = infer_latents(t, b, s_t, s_next, Mode::train, &noise);
  Var pred = forward_graph(t, b, context, lat.z);
  Var pred_loss = ad::scale(ad::mean(ad::abs(ad::sub(pred, s_next))), b.train.pred_weight);

  const auto& reg = b.model.reg;
  std::optional<Var> reg_loss;
  if (reg.kind == RegKind::sparse) reg_loss = reg_sparse_loss(lat.z, reg);
  if (reg.kind == RegKind::noisy) reg_loss = reg_kl_loss(*lat.mu, *lat.log_sigma, reg.beta);

  Var total = pred_loss;
  if (reg_loss) total = ad::add(total, *reg_loss);
  if (lat.vq_loss) total = ad::add(total, *lat.vq_loss);

  LossReport rep;
  rep.step = b.step;
  rep.pred = pred_loss.value().item();
  rep.reg = reg_loss ? reg_loss->value().item() : 0.0;
  rep.vq = lat.vq_loss ? lat.vq_loss->value().item() : 0.0;
  rep.total = total.value().item();
  if (!std::isfinite(rep.total)) {
    std::ostringstream os;
    os << "non-finite loss at step " << b.step << ": pred=" << rep.pred << " reg=" << rep.reg << " vq=" << rep.vq;
    throw NumericError(os.str());
  }

  auto grads = grad(total, b.params);
  rep.lr = warmup_cosine_lr(b.train.lr, b.step, b.train.steps, b.train.warmup_frac);
  adamw_step(b.params, grads, b.opt, rep.lr);

  if (reg.kind == RegKind::discrete) {
    for (auto c : lat.codes) ++b.code_usage[c];
    rep.dead_codes = static_cast<std::size_t>(std::count(b.code_usage.begin(), b.code_usage.end(), 0));
    if (reg.reset_enabled && (b.step + 1) % reg.reset_period == 0) {
      Rng rr = Rng(b.train.seed, "codebook-reset").child(b.step);
      const std::size_t ci = b.params.index("codebook");
      const auto before = b.code_usage;
      rep.codes_reset = codebook_reset(b.params.at(ci).value, b.code_usage, lat.z_e->value(), rr, reg.reset_noise);
      // Fresh codes restart their optimizer moments.
      for (std::size_t c = 0; c < before.size(); ++c) {
        if (before[c] != 0) continue;
        for (double& v : b.opt.m[ci].row(c)) v = 0.0;
        for (double& v : b.opt.v[ci].row(c)) v = 0.0;
      }
    }
  }
  b.step += 1;
  return rep;
}

std::vector<LossReport> train(ModelBundle& b, const std::vector<Tensor>& dataset, std::uint64_t until_step,
                              const std::function<void(const LossReport&)>& on_step) {
  std::vector<LossReport> out;
  while (b.step < until_step) {
    const auto idx = batch_indices(b.train, b.step, dataset.size());
    std::vector<const Tensor*> batch;
    batch.reserve(idx.size());
    for (auto i : idx) batch.push_back(&dataset[i]);
    out.push_back(train_step(b, batch));
    if (on_step) on_step(out.back());
  }
  return out;
}

std::size_t dead_code_count(const ModelBundle& b, const std::vector<Tensor>& dataset) {
  if (b.model.reg.kind != RegKind::discrete) return 0;
  std::vector<bool> used(b.model.reg.codebook_size, false);
  for (const auto& ep : dataset) {
    auto lat = idm_infer(ep.rows_slice(0, ep.rows() - 1), ep.rows_slice(1, ep.rows() - 1), b);
    for (auto c : lat.codes) used[c] = true;
  }
  return static_cast<std::size_t>(std::count(used.begin(), used.end(), false));
}

// ---------------------------------------------------------------------------
// Rollout

LatentSource parse_latent_source(std::string_view s) {
  if (s == "idm") return LatentSource::idm;
  if (s == "given") return LatentSource::given;
  if (s == "controller") return LatentSource::controller;
  throw std::invalid_argument("unknown latent source: " + std::string(s));
}

std::string to_string(LatentSource s) {
  switch (s) {
    case LatentSource::idm: return "idm";
    case LatentSource::given: return "given";
    case LatentSource::controller: return "controller";
  }
  return "idm";
}

double RolloutResult::mean_error() const {
  if (errors.empty()) return 0.0;
  double s = 0.0;
  for (double e : errors) s += e;
  return s / static_cast<double>(errors.size());
}

RolloutResult rollout(const Tensor& reprs, const ModelBundle& b, std::size_t ctx, LatentSource source,
                      const RolloutOptions& opts) {
  const std::size_t T = reprs.rows(), R = b.repr_dim(), D = b.latent_dim(), W = b.model.window;
  if (ctx < 1) throw std::invalid_argument("rollout: ctx must be >= 1");
  if (reprs.cols() != R) throw ShapeError("rollout: representation width mismatch");
  RolloutResult res;
  res.predicted = reprs;
  res.latents = Tensor(T > 0 ? T - 1 : 0, D);
  if (ctx >= T) return res;

  switch (source) {
    case LatentSource::idm:
      res.latents = idm_infer(reprs.rows_slice(0, T - 1), reprs.rows_slice(1, T - 1), b).z;
      break;
    case LatentSource::given:
      if (!opts.given || opts.given->rows() != T - 1 || opts.given->cols() != D)
        throw std::invalid_argument("rollout: source=given needs a (T-1) x D latent tensor");
      res.latents = *opts.given;
      break;
    case LatentSource::controller:
      if (!opts.policy || !*opts.policy) throw std::invalid_argument("rollout: source=controller needs a policy");
      break;
  }

  const std::size_t end = opts.horizon >= T - ctx ? T : ctx + opts.horizon;
  for (std::size_t t = ctx; t < end; ++t) {
    // Predict frame t from frames t-W..t-1 and the latent of transition t-1.
    Tensor context(1, W * R);
    for (std::size_t w = 0; w < W; ++w) {
      const std::size_t back = W - 1 - w;
      const std::size_t src = (t - 1) >= back ? t - 1 - back : 0;
      std::copy(res.predicted.row(src).begin(), res.predicted.row(src).end(),
                context.row(0).begin() + static_cast<std::ptrdiff_t>(w * R));
    }
    if (source == LatentSource::controller) {
      Tensor z = (*opts.policy)(res.predicted.row_copy(t - 1), t - 1);
      if (z.rows() != 1 || z.cols() != D) throw ShapeError("rollout: policy must return a 1 x D latent");
      std::copy(z.data().begin(), z.data().end(), res.latents.row(t - 1).begin());
    }
    Tape tape;
    Tensor pred = forward_graph(tape, b, tape.constant(std::move(context)), tape.constant(res.latents.row_copy(t - 1)))
                      .value();
    std::copy(pred.data().begin(), pred.data().end(), res.predicted.row(t).begin());
    res.errors.push_back(l1_mean_distance(pred.row(0), reprs.row(t)));
  }
  return res;
}

}  // namespace lamward
