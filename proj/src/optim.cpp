#include "lamward/optim.hpp"

#include <cmath>
#include <numbers>

#include "lamward/error.hpp"

namespace lamward {

AdamWState AdamWState::init(const ParamSet& params, const AdamWHyper& hyper) {
  AdamWState s;
  s.hyper = hyper;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.rows(), p.value.cols());
    s.v.emplace_back(p.value.rows(), p.value.cols());
  }
  return s;
}

void adamw_step(ParamSet& params, std::span<const Tensor> grads, AdamWState& state, double lr) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adamw_step: parameter/gradient/state count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = params.at(i).value;
    require_same_shape(p, grads[i], "adamw_step grad");
    require_same_shape(p, state.m[i], "adamw_step m");
    require_same_shape(p, state.v[i], "adamw_step v");
  }
  const auto& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& param = params.at(i);
    auto p = param.value.data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    const double decay = param.decay ? lr * h.weight_decay : 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] -= decay * p[k];
      m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g[k];
      v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

double warmup_cosine_lr(double base_lr, std::uint64_t step, std::uint64_t total, double warmup_frac) {
  if (total == 0) return base_lr;
  const auto warmup = static_cast<std::uint64_t>(std::floor(warmup_frac * static_cast<double>(total)));
  if (step < warmup) return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const double denom = static_cast<double>(std::max<std::uint64_t>(total - warmup, 1));
  const double progress = std::min(1.0, static_cast<double>(step - warmup) / denom);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace lamward
