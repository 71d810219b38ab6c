#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lamward/tensor.hpp"

namespace lamward {

enum class ActionMode { agent, camera, both };

std::string to_string(ActionMode m);
ActionMode parse_action_mode(std::string_view s);

struct WorldCfg {
  std::size_t grid = 16;
  std::size_t frames = 16;
  std::size_t n_sprites = 4;
  ActionMode action_mode = ActionMode::agent;
  int action_range = 1;
  double distractor_rate = 0.01;
  int sprite_min = 3;
  int sprite_max = 4;
  // kept below sprite_min so the agent always stays at least partly in view
  int camera_range = 2;
  /// Probability that each action axis repeats its previous value.
  double momentum = 0.6;

  void validate() const;
  std::size_t action_dim() const { return action_mode == ActionMode::both ? 4 : 2; }
  bool operator==(const WorldCfg&) const = default;
};

struct Sprite {
  int x = 0;
  int y = 0;
  int size = 1;
  double intensity = 1.0;
  bool operator==(const Sprite&) const = default;
};

/// Sprite 0 is the agent. Positions are world coordinates; the view shows
/// [cam, cam + grid) on each axis.
struct WorldState {
  std::vector<Sprite> sprites;
  int cam_x = 0;
  int cam_y = 0;
  bool operator==(const WorldState&) const = default;
};

struct Episode {
  WorldCfg cfg;
  std::uint64_t seed = 0;
  std::vector<Tensor> frames;          // T grids, values in [0, 1]
  Tensor actions;                      // (T-1) x action_dim
  std::vector<std::uint8_t> action_valid;  // 0 where a transition has no true action
  WorldState initial;

  std::size_t length() const { return frames.size(); }
  bool operator==(const Episode&) const = default;
};

/// Noiseless rendering of a state.
Tensor render(const WorldState& state, const WorldCfg& cfg);
/// Advances a state by one action. Components are rounded to integer pixels
/// and limited to +-action_range; the agent and camera clamp at their bounds.
WorldState advance(const WorldState& state, std::span<const double> action, const WorldCfg& cfg);

Episode make_episode(const WorldCfg& cfg, std::uint64_t seed);
/// frames = a[0, k) ++ b[k, T); the transition into frame k has no true action.
Episode stitch_scene_cut(const Episode& a, const Episode& b, std::size_t k);
std::pair<Episode, Episode> make_cycle_pair(const WorldCfg& cfg, std::uint64_t seed);

/// Noiseless re-render of `actions` applied from `initial`.
Episode replay(const WorldState& initial, const Tensor& actions, const WorldCfg& cfg, std::uint64_t seed = 0);
/// States s_0..s_{T-1} obtained by replaying the episode's actions.
std::vector<WorldState> trajectory(const Episode& ep);

std::vector<Episode> make_dataset(const WorldCfg& cfg, std::uint64_t seed, std::size_t count);

// Versioned binary container: magic, version, cfg, then episodes.
inline constexpr char kEpisodeMagic[8] = {'L', 'A', 'M', 'W', 'E', 'P', 'S', '1'};
inline constexpr std::uint32_t kEpisodeVersion = 1;

std::string encode_episodes(const std::vector<Episode>& episodes);
std::vector<Episode> decode_episodes(std::string data);
void save_episodes(const std::filesystem::path& path, const std::vector<Episode>& episodes);
std::vector<Episode> load_episodes(const std::filesystem::path& path);
/// Lossless human-readable dump (shortest round-trip decimals).
std::string dump_episode_text(const Episode& ep);

}  // namespace lamward
