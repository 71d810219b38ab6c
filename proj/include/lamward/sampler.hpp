#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lamward/rng.hpp"
#include "lamward/tensor.hpp"

namespace lamward {

/// Energy and its gradient at z (1 x D); writes the gradient into `grad`.
using EnergyFn = std::function<double(const Tensor& z, Tensor& grad)>;

/// The sparse latent energy l2*max(sqrt(D) - |z|^2, 0) + l1*|z|_1, with its
/// gradient taken from the autodiff graph (subgradient 0 at kinks).
EnergyFn sparse_energy_fn(double l1, double l2);
/// E(z) = |z|^2 / 2, stationary law N(0, I).
EnergyFn quadratic_energy_fn();

enum class SgldInit { normal, uniform };

struct SgldCfg {
  double step_size = 0.01;  // alpha
  std::size_t steps = 10000;
  double burn_in_frac = 0.2;
  std::size_t thin = 10;
  SgldInit init = SgldInit::normal;
  double init_box = 5.0;  // uniform init half-width
  double divergence_bound = 100.0;  // on |z|_inf
  bool inject_noise = true;
  /// Start from this point instead of drawing from the init distribution.
  std::vector<double> start;

  void validate() const;
  std::size_t burn_in() const;
};

/// z_{k+1} = z_k - alpha/2 * dE/dz + eps, eps ~ N(0, alpha I). Returns the
/// post-burn-in states at the thinning stride, one per row.
Tensor sgld_sample(const EnergyFn& energy, const SgldCfg& cfg, std::size_t dim, Rng& rng);

/// Final state of `count` independent chains (chain i uses rng.child(i)).
Tensor sgld_chains(const EnergyFn& energy, const SgldCfg& cfg, std::size_t dim, std::size_t count, const Rng& rng);

/// Draw from the N(0, I) prior: 1 x D.
Tensor prior_sample(std::size_t dim, Rng& rng);

/// Uniform draw over codebook rows, or over rows with used[c] set.
Tensor codebook_sample(const Tensor& codebook, Rng& rng, bool used_only = false, const std::vector<bool>* used = nullptr);

/// Held-out accuracy of a least-squares linear classifier separating the rows
/// of `a` from the rows of `b` (even rows train, odd rows test).
double separability_accuracy(const Tensor& a, const Tensor& b);

inline constexpr char kSampleMagic[8] = {'L', 'A', 'M', 'W', 'S', 'M', 'P', '1'};
inline constexpr std::uint32_t kSampleVersion = 1;

/// Flat binary sample dump: magic, version, provenance JSON, family, then the
/// N x D matrix.
struct SampleDump {
  std::string provenance;
  std::string family;
  Tensor samples;
  bool operator==(const SampleDump&) const = default;
};
std::string encode_samples(const SampleDump& d);
SampleDump decode_samples(std::string data);

}  // namespace lamward
