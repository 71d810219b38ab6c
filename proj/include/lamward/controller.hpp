#pragma once

#include <cstdint>
#include <vector>

#include "lamward/lam.hpp"
#include "lamward/worldgen.hpp"

namespace lamward {

struct ControllerCfg {
  std::size_t action_dim = 2;
  std::size_t latent_dim = 16;
  std::size_t repr_dim = 64;
  std::size_t embed = 64;
  std::size_t hidden = 64;
  bool use_context = true;
  // training
  std::size_t steps = 3000;
  std::size_t batch = 256;
  double lr = 1e-3;
  double weight_decay = 0.04;
  double warmup_frac = 0.1;
  std::uint64_t seed = 0;
  bool operator==(const ControllerCfg&) const = default;
};

/// Maps a real action plus the representation it is applied in to a latent.
struct Controller {
  ControllerCfg cfg;
  ParamSet params;
  bool operator==(const Controller&) const = default;
};

Controller make_controller(const ControllerCfg& cfg, std::uint64_t init_seed);

/// actions: N x action_dim, context: N x repr_dim (ignored by the no-context
/// variant). Returns N x latent_dim.
Var controller_graph(Tape& tape, const Controller& c, Var actions, Var context);
Tensor controller_forward(const Controller& c, const Tensor& actions, const Tensor& context);

/// (context, action, target latent) triples. Targets come from the frozen
/// bundle's IDM in eval mode.
struct ControllerDataset {
  Tensor context;
  Tensor actions;
  Tensor targets;
  std::size_t size() const { return actions.rows(); }
};

/// One row per valid transition t: context = s_t, action = a_t, target = IDM(s_t, s_{t+1}).
ControllerDataset build_controller_dataset(const ModelBundle& b, const std::vector<Episode>& episodes,
                                           const std::vector<Tensor>& reprs);

struct ControllerTrainLog {
  std::vector<double> loss;
  double final_mse = 0.0;  // over the full dataset after training
};

double controller_mse(const Controller& c, const ControllerDataset& data);
ControllerTrainLog train_controller(Controller& c, const ControllerDataset& data);

struct ControllerRollout {
  RolloutResult controller;
  RolloutResult idm;
  double ratio = 0.0;  // controller mean error / IDM mean error
};

/// Rollout with latents from the controller on the episode's true actions,
/// compared against the IDM rollout of the same episode.
ControllerRollout rollout_controller(const Episode& ep, const Tensor& reprs, const ModelBundle& b,
                                     const Controller& c, std::size_t ctx);

}  // namespace lamward
