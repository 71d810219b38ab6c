#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lamward/autodiff.hpp"

namespace lamward {

struct AdamWHyper {
  double lr = 6.25e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.04;
  bool operator==(const AdamWHyper&) const = default;
};

struct AdamWState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
  AdamWHyper hyper;

  static AdamWState init(const ParamSet& params, const AdamWHyper& hyper);
  bool operator==(const AdamWState&) const = default;
};

/// One decoupled-weight-decay Adam update at learning rate `lr`:
///   p <- p - lr*wd*p   (params flagged decay only)
///   p <- p - lr * mhat / (sqrt(vhat) + eps)
void adamw_step(ParamSet& params, std::span<const Tensor> grads, AdamWState& state, double lr);
inline void adamw_step(ParamSet& params, std::span<const Tensor> grads, AdamWState& state) {
  adamw_step(params, grads, state, state.hyper.lr);
}

/// Linear warmup over warmup_frac * total steps, then cosine annealing to zero.
double warmup_cosine_lr(double base_lr, std::uint64_t step, std::uint64_t total, double warmup_frac);

}  // namespace lamward
