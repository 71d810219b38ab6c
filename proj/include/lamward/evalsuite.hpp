#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lamward/lam.hpp"

namespace lamward {

struct EvalRow {
  std::uint64_t config_digest = 0;
  std::string label;
  std::vector<std::pair<std::string, double>> metrics;

  double metric(std::string_view name) const;
};

/// One (x, y) series for external plotting.
struct PlotSeries {
  std::string label;
  std::string x_name;
  std::string y_name;
  std::vector<double> x;
  std::vector<double> y;
};

struct EvalReport {
  std::string protocol;
  std::vector<EvalRow> rows;
  std::vector<std::uint64_t> seeds;
  std::vector<PlotSeries> plots;
};

struct EvalOptions {
  std::size_t ctx = 2;         // ground-truth prefix for rollouts
  std::size_t cut = 0;         // scene-cut index; 0 means T/2
  std::size_t pairs = 100;
  std::size_t horizon = 0;     // rollout length after ctx; 0 means to the end
  std::uint64_t seed = 0;
};

/// Mean teacher-forced one-step error with IDM latents over every transition.
double one_step_error(const Tensor& reprs, const ModelBundle& b);

/// One-step and IDM-rollout error per bundle, rows sorted from least to most
/// constrained. Throws if the bundles were built on different encoders.
EvalReport eval_capacity(const std::vector<const ModelBundle*>& bundles, const std::vector<Tensor>& reprs,
                         const EvalOptions& opts);

/// One-step IDM error on the transition into frame `cut`, for the original
/// sequence and for a[0, cut) ++ b[cut, T).
struct LeakagePair {
  std::size_t a = 0;
  std::size_t b = 0;
  double original = 0.0;
  double stitched = 0.0;
};
LeakagePair leakage_pair(const Tensor& a, const Tensor& b, const ModelBundle& bundle, std::size_t cut);

/// Random ordered pairs (a != b when the set has two or more sequences).
std::vector<std::pair<std::size_t, std::size_t>> eval_pairs(std::size_t n_items, std::size_t n_pairs,
                                                             std::uint64_t seed);

EvalReport eval_leakage(const ModelBundle& b, const std::vector<Tensor>& reprs, const EvalOptions& opts);

struct CyclePair {
  std::size_t a = 0;
  std::size_t b = 0;
  double original = 0.0;
  double cycle = 0.0;
};
/// z1 = IDM(A); B_hat = B rolled with z1; z2 = IDM(B_hat); A_hat = A rolled with z2.
CyclePair cycle_pair(const Tensor& a, const Tensor& b, const ModelBundle& bundle, std::size_t ctx,
                     std::size_t horizon);

EvalReport eval_cycle(const ModelBundle& b, const std::vector<Tensor>& reprs, const EvalOptions& opts);

/// Mean |f(s, z_idm) - f(s, 0)| over all teacher-forced predictions; exactly 0
/// when the forward model ignores z.
double z_sensitivity(const ModelBundle& b, const std::vector<Tensor>& reprs);

std::string report_json(const EvalReport& r, const std::string& provenance_json);
std::string report_csv(const EvalReport& r);
/// Long format: label,x_name,y_name,x,y
std::string plot_data_csv(const EvalReport& r);

}  // namespace lamward
