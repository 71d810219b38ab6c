#include "lamward/controller.hpp"

#include <cmath>
#include <stdexcept>

#include "lamward/error.hpp"

namespace lamward {
namespace {

void add_linear(ParamSet& p, Rng& rng, const std::string& name, std::size_t in, std::size_t out) {
  Rng r = rng.child(name);
  Tensor w = rng_draw(r, Dist::normal, in, out);
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& v : w.data()) v *= s;
  p.add(name + ".W", std::move(w));
  p.add(name + ".b", Tensor(1, out), false);
}

Var linear(Tape& t, const ParamSet& p, const std::string& name, Var x) {
  return ad::add_row(ad::matmul(x, t.param(p, name + ".W")), t.param(p, name + ".b"));
}

}  // namespace

Controller make_controller(const ControllerCfg& cfg, std::uint64_t init_seed) {
  if (cfg.action_dim == 0 || cfg.latent_dim == 0 || cfg.embed == 0 || cfg.hidden == 0)
    throw std::invalid_argument("ControllerCfg: dimensions must be positive");
  Controller c{cfg, {}};
  Rng rng(init_seed, "controller-init");
  // Three-layer action embedding.
  add_linear(c.params, rng, "ctrl.emb0", cfg.action_dim, cfg.embed);
  add_linear(c.params, rng, "ctrl.emb1", cfg.embed, cfg.embed);
  add_linear(c.params, rng, "ctrl.emb2", cfg.embed, cfg.embed);
  const std::size_t fuse_in = cfg.use_context ? cfg.embed + cfg.repr_dim : cfg.embed;
  add_linear(c.params, rng, "ctrl.fuse", fuse_in, cfg.hidden);
  add_linear(c.params, rng, "ctrl.out", cfg.hidden, cfg.latent_dim);
  return c;
}

Var controller_graph(Tape& tape, const Controller& c, Var actions, Var context) {
  if (actions.cols() != c.cfg.action_dim)
    throw ShapeError("controller: action has " + std::to_string(actions.cols()) + " components, expected " +
                     std::to_string(c.cfg.action_dim));
  if (c.cfg.use_context && (context.cols() != c.cfg.repr_dim || context.rows() != actions.rows()))
    throw ShapeError("controller: context must be N x " + std::to_string(c.cfg.repr_dim));
  const auto& p = c.params;
  Var e = ad::silu(linear(tape, p, "ctrl.emb0", actions));
  e = ad::silu(linear(tape, p, "ctrl.emb1", e));
  e = linear(tape, p, "ctrl.emb2", e);
  Var fused = e;
  if (c.cfg.use_context) {
    std::vector<Var> parts{e, context};
    fused = ad::concat_cols(parts);
  }
  Var h = ad::silu(linear(tape, p, "ctrl.fuse", fused));
  return linear(tape, p, "ctrl.out", h);
}

Tensor controller_forward(const Controller& c, const Tensor& actions, const Tensor& context) {
  Tape t;
  return controller_graph(t, c, t.constant(actions), t.constant(context)).value();
}

ControllerDataset build_controller_dataset(const ModelBundle& b, const std::vector<Episode>& episodes,
                                           const std::vector<Tensor>& reprs) {
  if (episodes.size() != reprs.size()) throw std::invalid_argument("controller dataset: episode/repr count mismatch");
  std::vector<Tensor> ctx, act, tgt;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& ep = episodes[e];
    const auto& s = reprs[e];
    const std::size_t n = s.rows() - 1;
    const Tensor z = idm_infer(s.rows_slice(0, n), s.rows_slice(1, n), b).z;
    for (std::size_t t = 0; t < n; ++t) {
      if (!ep.action_valid[t]) continue;
      ctx.push_back(s.row_copy(t));
      act.push_back(ep.actions.row_copy(t));
      tgt.push_back(z.row_copy(t));
    }
  }
  return ControllerDataset{vstack(ctx), vstack(act), vstack(tgt)};
}

double controller_mse(const Controller& c, const ControllerDataset& data) {
  if (data.size() == 0) throw std::invalid_argument("controller_mse: empty dataset");
  const Tensor pred = controller_forward(c, data.actions, data.context);
  double s = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) s += (pred[k] - data.targets[k]) * (pred[k] - data.targets[k]);
  return s / static_cast<double>(data.size());
}

ControllerTrainLog train_controller(Controller& c, const ControllerDataset& data) {
  if (data.size() == 0) throw std::invalid_argument("train_controller: empty dataset");
  const auto& cfg = c.cfg;
  AdamWState opt = AdamWState::init(c.params, AdamWHyper{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  ControllerTrainLog log;
  const Rng batches(cfg.seed, "controller-batch");
  const std::size_t bs = std::min(cfg.batch, data.size());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Rng r = batches.child(step);
    std::vector<std::size_t> idx(bs);
    for (auto& i : idx) i = r.below(data.size());
    Tensor a(bs, data.actions.cols()), s(bs, data.context.cols()), z(bs, data.targets.cols());
    for (std::size_t k = 0; k < bs; ++k) {
      std::copy(data.actions.row(idx[k]).begin(), data.actions.row(idx[k]).end(), a.row(k).begin());
      std::copy(data.context.row(idx[k]).begin(), data.context.row(idx[k]).end(), s.row(k).begin());
      std::copy(data.targets.row(idx[k]).begin(), data.targets.row(idx[k]).end(), z.row(k).begin());
    }
    Tape t;
    Var pred = controller_graph(t, c, t.constant(std::move(a)), t.constant(std::move(s)));
    // mean over rows of |z_hat - z|^2
    Var loss = ad::scale(ad::sum(ad::square(ad::sub(pred, t.constant(std::move(z))))), 1.0 / static_cast<double>(bs));
    log.loss.push_back(loss.value().item());
    auto grads = grad(loss, c.params);
    adamw_step(c.params, grads, opt, warmup_cosine_lr(cfg.lr, step, cfg.steps, cfg.warmup_frac));
  }
  log.final_mse = controller_mse(c, data);
  return log;
}

ControllerRollout rollout_controller(const Episode& ep, const Tensor& reprs, const ModelBundle& b,
                                     const Controller& c, std::size_t ctx) {
  if (ep.actions.rows() + 1 != reprs.rows()) throw ShapeError("rollout_controller: episode/repr length mismatch");
  LatentPolicy policy = [&](const Tensor& state, std::size_t t) {
    return controller_forward(c, ep.actions.row_copy(t), state);
  };
  ControllerRollout out;
  out.controller = rollout(reprs, b, ctx, LatentSource::controller, RolloutOptions{nullptr, &policy});
  out.idm = rollout(reprs, b, ctx, LatentSource::idm);
  const double idm = out.idm.mean_error();
  out.ratio = idm > 0.0 ? out.controller.mean_error() / idm : 1.0;
  return out;
}

}  // namespace lamward
