#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lamward/controller.hpp"
#include "lamward/lam.hpp"

namespace lamward {

struct CemCfg {
  std::size_t samples = 300;
  std::size_t elites = 10;
  std::size_t iterations = 15;
  std::size_t horizon = 3;
  double init_mean = 0.0;
  double init_std = 1.0;
  double action_low = -1.0;
  double action_high = 1.0;
  double std_floor = 0.01;
  /// Plan one action and repeat it for every step of the horizon.
  bool straight_line = false;
  /// Carry the previous elites into the next ranking.
  bool keep_elites = true;

  static CemCfg manip();
  static CemCfg nav();
  static CemCfg preset(std::string_view name);
  void validate() const;
  bool operator==(const CemCfg&) const = default;
};

struct CemIteration {
  double elite_mean_cost = 0.0;
  double best_cost = 0.0;
  double mean_std = 0.0;
};

struct PlanResult {
  Tensor actions;  // horizon x action_dim
  double cost = 0.0;
  std::vector<CemIteration> iterations;
  std::size_t refits = 0;

  /// First action of the best sequence (1 x action_dim); empty for horizon 0.
  Tensor first_action() const;
};

/// Costs for a batch of candidates, one per row of horizon*action_dim values.
using BatchCost = std::function<std::vector<double>(const Tensor& candidates)>;

/// Diagonal-Gaussian cross-entropy method over action sequences.
PlanResult cem_optimize(const CemCfg& cfg, std::size_t action_dim, const BatchCost& cost, Rng& rng);

/// Batched world-model cost |s_g - s_hat_{t+H}|_2: each candidate row is unrolled
/// through the forward model with latents from the controller evaluated on the
/// model's own predicted state. `history` holds recent representations, last
/// row = s_t (earlier rows fill the forward model's context window).
std::vector<double> plan_costs(const ModelBundle& b, const Controller& c, const Tensor& history, const Tensor& goal,
                               const Tensor& candidates, std::size_t horizon);
double plan_cost(const ModelBundle& b, const Controller& c, const Tensor& history, const Tensor& actions,
                 const Tensor& goal);

PlanResult cem_plan(const Tensor& history, const Tensor& goal, const CemCfg& cfg, const ModelBundle& b,
                    const Controller& c, Rng& rng);

/// |sum(plan) - sum(gt)|_1 over the horizon.
double delta_xyz(const Tensor& plan, const Tensor& gt);

struct TrajErrors {
  double ate = 0.0;
  double rpe = 0.0;
};
/// Positions integrated from a shared origin; no alignment.
TrajErrors traj_errors(const Tensor& plan, const Tensor& gt);

struct PlanEpisode {
  std::size_t episode = 0;
  std::size_t start = 0;
  PlanResult plan;
  Tensor gt;
  double delta_xyz = 0.0;
  double ate = 0.0;
  double rpe = 0.0;
  Tensor random_actions;
  double random_delta_xyz = 0.0;
};

struct PlanSummary {
  std::size_t episodes = 0;
  double mean_delta_xyz = 0.0;
  double mean_ate = 0.0;
  double mean_rpe = 0.0;
  double mean_random_delta_xyz = 0.0;
};

/// Goal-reaching protocol: each run picks a held-out episode and start t, uses
/// s_{t+H} as the goal, plans with CEM and scores against the true actions.
/// A uniform random policy over the action bounds is scored alongside.
std::vector<PlanEpisode> run_planning(const ModelBundle& b, const Controller& c, const std::vector<Episode>& episodes,
                                      const std::vector<Tensor>& reprs, const CemCfg& cfg, std::size_t runs,
                                      std::uint64_t seed);
PlanSummary summarize(const std::vector<PlanEpisode>& runs);

std::string plan_episode_json(const PlanEpisode& r);

}  // namespace lamward
