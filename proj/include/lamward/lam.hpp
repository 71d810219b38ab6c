#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lamward/autodiff.hpp"
#include "lamward/encoder.hpp"
#include "lamward/optim.hpp"

namespace lamward {

// ---------------------------------------------------------------------------
// Configuration

enum class RegKind { none, sparse, noisy, discrete, deterministic };

std::string to_string(RegKind k);
RegKind parse_reg_kind(std::string_view s);

struct RegularizerCfg {
  RegKind kind = RegKind::sparse;
  // sparse: energy E(z) = l2 * max(sqrt(D) - |z|_2^2, 0) + l1 * |z|_1, plus
  // variance / covariance / mean penalties over the batch.
  double l1 = 0.01;
  double l2 = 1.0;
  double var = 0.1;
  double cov = 0.001;
  double mean = 0.1;
  // noisy: KL(q(z|s,s') || N(0, 1)) weight.
  double beta = 1e-4;
  // discrete
  std::size_t codebook_size = 64;
  double commitment = 0.25;
  std::size_t reset_period = 200;
  bool reset_enabled = true;
  double reset_noise = 0.01;

  void validate() const;
  /// Human-readable capacity label, e.g. "sparse(l1=0.01)".
  std::string label() const;
  bool operator==(const RegularizerCfg&) const = default;
};

/// Sort key: lower = less constrained. none < {sparse, noisy, discrete} < deterministic;
/// within a family, larger coefficients (or smaller codebooks) rank higher.
std::pair<int, double> regularization_rank(const RegularizerCfg& reg);

struct ModelCfg {
  std::size_t latent_dim = 16;
  std::size_t hidden = 64;
  std::size_t window = 2;
  std::size_t blocks = 2;
  RegularizerCfg reg;
  bool operator==(const ModelCfg&) const = default;
};

struct TrainCfg {
  std::size_t steps = 3000;
  std::size_t batch = 32;
  double lr = 6.25e-4;
  double weight_decay = 0.04;
  double warmup_frac = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // multiplies the per-element L1 prediction loss; regularizer weights are relative to it
  double pred_weight = 8.0;
  std::uint64_t seed = 0;
  bool operator==(const TrainCfg&) const = default;
};

// ---------------------------------------------------------------------------
// Model state

struct ModelBundle {
  ModelCfg model;
  TrainCfg train;
  Encoder encoder;
  ParamSet params;  // idm.*, fwd.*, codebook
  AdamWState opt;
  std::vector<std::uint64_t> code_usage;  // since the last reset
  std::uint64_t step = 0;
  std::uint64_t config_digest = 0;

  std::size_t repr_dim() const { return encoder.cfg().repr_dim; }
  std::size_t latent_dim() const { return model.latent_dim; }
  bool operator==(const ModelBundle&) const = default;
};

ModelBundle make_bundle(const ModelCfg& model, const TrainCfg& train, const Encoder& encoder, std::uint64_t init_seed);

enum class Mode { train, eval };

/// Latents for a batch of transitions. z is N x D. For the noisy head mu and
/// log_sigma are set; for the discrete head codes/z_e/vq_loss are set.
struct LatentAction {
  Tensor z;
  Tensor mu;
  Tensor log_sigma;
  std::vector<std::size_t> codes;
};

struct LatentGraph {
  Var z;
  std::optional<Var> mu;
  std::optional<Var> log_sigma;
  std::optional<Var> z_e;
  std::optional<Var> vq_loss;
  std::vector<std::size_t> codes;
};

/// Graph-level IDM: s_t, s_next are N x R. `noise` is required for the noisy
/// head in train mode (z = mu + sigma * eps); eval mode returns z = mu.
LatentGraph infer_latents(Tape& tape, const ModelBundle& b, Var s_t, Var s_next, Mode mode, Rng* noise);

/// Value-level IDM over rows of s_t / s_next. Does not touch usage counters.
LatentAction idm_infer(const Tensor& s_t, const Tensor& s_next, const ModelBundle& b, Mode mode = Mode::eval,
                       Rng* noise = nullptr);

// ---------------------------------------------------------------------------
// Regularizers

/// Per-row sparse energy, N x 1.
Var sparse_energy(Var z, double l1, double l2);
/// VCM(Z) + mean_i E(Z_i). Requires N >= 2.
Var reg_sparse_loss(Var z, const RegularizerCfg& cfg);
double reg_sparse_loss(const Tensor& z, const RegularizerCfg& cfg);

/// beta * 1/2 * sum_d (mu^2 + sigma^2 - 1 - ln sigma^2), averaged over rows.
Var reg_kl_loss(Var mu, Var log_sigma, double beta);
double reg_kl_loss(const Tensor& mu, const Tensor& log_sigma, double beta);

struct VqGraph {
  Var z_q;
  std::vector<std::size_t> codes;
  Var loss;
};

/// Nearest-code quantization with straight-through gradient. Ties pick the
/// lowest index. loss = mean_rows |sg(z_e) - c|^2 + commitment * |z_e - sg(c)|^2.
VqGraph vq_quantize(Var z_e, Var codebook, double commitment);

struct VqValue {
  Tensor z_q;
  std::vector<std::size_t> codes;
  double loss = 0.0;
};

/// Value-level quantizer; increments usage[code] when usage is given.
VqValue vq_quantize(const Tensor& z_e, const Tensor& codebook, double commitment,
                    std::vector<std::uint64_t>* usage = nullptr);

/// Reassigns every code with zero usage to a random row of z_e plus N(0, noise^2)
/// jitter, then zeroes all counters. Returns the number of codes reassigned.
std::size_t codebook_reset(Tensor& codebook, std::vector<std::uint64_t>& usage, const Tensor& z_e, Rng& rng,
                           double noise);

// ---------------------------------------------------------------------------
// Forward model

/// Rows t = 0..T-2 of the teacher-forcing input: concat(s_{t-w+1}, ..., s_t),
/// indices below 0 clamped to frame 0.
Tensor window_inputs(const Tensor& reprs, std::size_t window);

/// Graph-level forward model: context is N x (window*R), z is N x D; returns N x R.
Var forward_graph(Tape& tape, const ModelBundle& b, Var context, Var z);

/// Teacher-forced one-pass prediction: rows 0..t of `reprs` and `latents`
/// (one latent per transition) give predictions for frames 1..t+1.
Tensor forward_predict(const Tensor& reprs, const Tensor& latents, const ModelBundle& b);

// ---------------------------------------------------------------------------
// Training

struct LossReport {
  std::uint64_t step = 0;
  double total = 0.0;
  double pred = 0.0;
  double reg = 0.0;
  double vq = 0.0;
  std::size_t dead_codes = 0;
  std::size_t codes_reset = 0;
  double lr = 0.0;
};

/// One AdamW step on a batch of representation sequences (each T x R).
LossReport train_step(ModelBundle& b, std::span<const Tensor* const> batch);

/// Batch indices used at a given step (pure function of seed, step, dataset size).
std::vector<std::size_t> batch_indices(const TrainCfg& cfg, std::uint64_t step, std::size_t dataset_size);

/// Runs train_step until b.step == until_step.
std::vector<LossReport> train(ModelBundle& b, const std::vector<Tensor>& dataset, std::uint64_t until_step,
                              const std::function<void(const LossReport&)>& on_step = {});

/// Codes never selected by the eval-mode IDM over all transitions of `dataset`.
std::size_t dead_code_count(const ModelBundle& b, const std::vector<Tensor>& dataset);

// ---------------------------------------------------------------------------
// Rollout

enum class LatentSource { idm, given, controller };
LatentSource parse_latent_source(std::string_view s);
std::string to_string(LatentSource s);

/// Latent for the transition out of frame t, given the model's current state (1 x R).
using LatentPolicy = std::function<Tensor(const Tensor& state, std::size_t t)>;

struct RolloutResult {
  Tensor predicted;             // T x R; rows < ctx are ground truth
  Tensor latents;               // (T-1) x D, rows >= ctx-1 used
  std::vector<double> errors;   // L1 (mean abs) per predicted step
  double mean_error() const;
};

struct RolloutOptions {
  const Tensor* given = nullptr;        // LatentSource::given: (T-1) x D
  const LatentPolicy* policy = nullptr; // LatentSource::controller
  std::size_t horizon = std::numeric_limits<std::size_t>::max();
};

/// Frames [0, ctx) use ground truth, later frames are fed back predictions.
/// IDM latents read ground-truth consecutive frames.
RolloutResult rollout(const Tensor& reprs, const ModelBundle& b, std::size_t ctx, LatentSource source,
                      const RolloutOptions& opts = {});

}  // namespace lamward
