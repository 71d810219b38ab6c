#include "lamward/worldgen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lamward/binio.hpp"
#include "lamward/error.hpp"
#include "lamward/rng.hpp"

namespace lamward {

std::string to_string(ActionMode m) {
  switch (m) {
    case ActionMode::agent: return "agent";
    case ActionMode::camera: return "camera";
    case ActionMode::both: return "both";
  }
  return "agent";
}

ActionMode parse_action_mode(std::string_view s) {
  if (s == "agent") return ActionMode::agent;
  if (s == "camera") return ActionMode::camera;
  if (s == "both") return ActionMode::both;
  throw std::invalid_argument("unknown action mode: " + std::string(s));
}

void WorldCfg::validate() const {
  if (grid < 4) throw std::invalid_argument("WorldCfg: grid must be >= 4");
  if (frames < 2) throw std::invalid_argument("WorldCfg: need at least 2 frames");
  if (n_sprites < 1) throw std::invalid_argument("WorldCfg: need at least one sprite");
  if (!(distractor_rate >= 0.0 && distractor_rate <= 1.0))
    throw std::invalid_argument("WorldCfg: distractor_rate must lie in [0, 1]");
  if (sprite_min < 1 || sprite_max < sprite_min || static_cast<std::size_t>(sprite_max) > grid)
    throw std::invalid_argument("WorldCfg: sprite size range does not fit the grid");
  if (action_range < 0 || camera_range < 0) throw std::invalid_argument("WorldCfg: negative range");
  if (camera_range >= sprite_min)
    throw std::invalid_argument("WorldCfg: camera_range must be smaller than sprite_min or the agent can leave the view");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw std::invalid_argument("WorldCfg: momentum must lie in [0, 1]");
}

namespace {

bool moves_agent(ActionMode m) { return m != ActionMode::camera; }
bool moves_camera(ActionMode m) { return m != ActionMode::agent; }

int round_clamp(double v, int range) {
  const int r = static_cast<int>(std::lround(v));
  return std::clamp(r, -range, range);
}

// Per-axis deltas in the order (agent dx, agent dy, cam dx, cam dy).
struct Deltas {
  int ax = 0, ay = 0, cx = 0, cy = 0;
};

Deltas decode_action(std::span<const double> action, const WorldCfg& cfg) {
  if (action.size() != cfg.action_dim())
    throw ShapeError("action has " + std::to_string(action.size()) + " components, expected " +
                     std::to_string(cfg.action_dim()));
  Deltas d;
  const int r = cfg.action_range;
  switch (cfg.action_mode) {
    case ActionMode::agent:
      d.ax = round_clamp(action[0], r);
      d.ay = round_clamp(action[1], r);
      break;
    case ActionMode::camera:
      d.cx = round_clamp(action[0], r);
      d.cy = round_clamp(action[1], r);
      break;
    case ActionMode::both:
      d.ax = round_clamp(action[0], r);
      d.ay = round_clamp(action[1], r);
      d.cx = round_clamp(action[2], r);
      d.cy = round_clamp(action[3], r);
      break;
  }
  return d;
}

void add_distractors(Tensor& frame, double rate, Rng& rng) {
  if (rate <= 0.0) return;
  for (auto& v : frame.data())
    if (rng.uniform() < rate) v = rng.uniform();
}

// Picks one axis delta for the momentum policy, then reflects it (or zeroes it)
// so that the move stays inside [lo, hi].
int policy_axis(int prev, int pos, int lo, int hi, const WorldCfg& cfg, Rng& rng) {
  const int r = cfg.action_range;
  if (r == 0) return 0;
  int a = prev;
  if (rng.uniform() >= cfg.momentum) a = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * r + 1))) - r;
  if (pos + a < lo || pos + a > hi) a = -a;
  if (pos + a < lo || pos + a > hi) a = 0;
  return a;
}

}  // namespace

Tensor render(const WorldState& state, const WorldCfg& cfg) {
  const int g = static_cast<int>(cfg.grid);
  Tensor frame(cfg.grid, cfg.grid);
  // Background sprites first, agent (index 0) on top.
  for (std::size_t n = state.sprites.size(); n-- > 0;) {
    const auto& s = state.sprites[n];
    for (int dy = 0; dy < s.size; ++dy)
      for (int dx = 0; dx < s.size; ++dx) {
        const int px = s.x + dx - state.cam_x;
        const int py = s.y + dy - state.cam_y;
        if (px < 0 || py < 0 || px >= g || py >= g) continue;
        frame(static_cast<std::size_t>(py), static_cast<std::size_t>(px)) = s.intensity;
      }
  }
  return frame;
}

WorldState advance(const WorldState& state, std::span<const double> action, const WorldCfg& cfg) {
  const Deltas d = decode_action(action, cfg);
  WorldState next = state;
  if (!next.sprites.empty()) {
    auto& agent = next.sprites[0];
    const int hi = static_cast<int>(cfg.grid) - agent.size;
    agent.x = std::clamp(agent.x + d.ax, 0, hi);
    agent.y = std::clamp(agent.y + d.ay, 0, hi);
  }
  next.cam_x = std::clamp(next.cam_x + d.cx, -cfg.camera_range, cfg.camera_range);
  next.cam_y = std::clamp(next.cam_y + d.cy, -cfg.camera_range, cfg.camera_range);
  return next;
}

Episode make_episode(const WorldCfg& cfg, std::uint64_t seed) {
  cfg.validate();
  const Rng root(seed, "episode");
  Rng layout = root.child("layout");
  Rng policy = root.child("policy");
  Rng noise = root.child("distractor");

  WorldState st;
  for (std::size_t n = 0; n < cfg.n_sprites; ++n) {
    Sprite s;
    s.size = cfg.sprite_min +
             static_cast<int>(layout.below(static_cast<std::uint64_t>(cfg.sprite_max - cfg.sprite_min + 1)));
    const auto span = static_cast<std::uint64_t>(static_cast<int>(cfg.grid) - s.size + 1);
    s.x = static_cast<int>(layout.below(span));
    s.y = static_cast<int>(layout.below(span));
    s.intensity = n == 0 ? 1.0 : layout.uniform(0.3, 0.8);
    st.sprites.push_back(s);
  }

  Episode ep;
  ep.cfg = cfg;
  ep.seed = seed;
  ep.initial = st;
  const std::size_t adim = cfg.action_dim();
  ep.actions = Tensor(cfg.frames - 1, adim);
  ep.action_valid.assign(cfg.frames - 1, 1);

  Deltas prev;
  Tensor f0 = render(st, cfg);
  add_distractors(f0, cfg.distractor_rate, noise);
  ep.frames.push_back(std::move(f0));
  for (std::size_t t = 0; t + 1 < cfg.frames; ++t) {
    Deltas d;
    if (moves_agent(cfg.action_mode)) {
      const auto& agent = st.sprites[0];
      const int hi = static_cast<int>(cfg.grid) - agent.size;
      d.ax = policy_axis(prev.ax, agent.x, 0, hi, cfg, policy);
      d.ay = policy_axis(prev.ay, agent.y, 0, hi, cfg, policy);
    }
    if (moves_camera(cfg.action_mode)) {
      d.cx = policy_axis(prev.cx, st.cam_x, -cfg.camera_range, cfg.camera_range, cfg, policy);
      d.cy = policy_axis(prev.cy, st.cam_y, -cfg.camera_range, cfg.camera_range, cfg, policy);
    }
    prev = d;
    auto row = ep.actions.row(t);
    switch (cfg.action_mode) {
      case ActionMode::agent: row[0] = d.ax, row[1] = d.ay; break;
      case ActionMode::camera: row[0] = d.cx, row[1] = d.cy; break;
      case ActionMode::both: row[0] = d.ax, row[1] = d.ay, row[2] = d.cx, row[3] = d.cy; break;
    }
    st = advance(st, row, cfg);
    Tensor f = render(st, cfg);
    add_distractors(f, cfg.distractor_rate, noise);
    ep.frames.push_back(std::move(f));
  }
  return ep;
}

Episode stitch_scene_cut(const Episode& a, const Episode& b, std::size_t k) {
  if (a.cfg.grid != b.cfg.grid || a.length() != b.length() || a.cfg.action_dim() != b.cfg.action_dim())
    throw ShapeError("stitch_scene_cut: episodes have incompatible shapes");
  const std::size_t T = a.length();
  if (k < 1 || k > T - 1) throw std::invalid_argument("stitch_scene_cut: cut index must lie in [1, T-1]");
  if (a == b) return a;
  Episode out = a;
  out.seed = splitmix64(a.seed ^ (b.seed << 1) ^ k);
  for (std::size_t t = k; t < T; ++t) out.frames[t] = b.frames[t];
  for (std::size_t t = k - 1; t + 1 < T; ++t) {
    auto dst = out.actions.row(t);
    auto src = b.actions.row(t);
    std::copy(src.begin(), src.end(), dst.begin());
    out.action_valid[t] = b.action_valid[t];
  }
  out.action_valid[k - 1] = 0;
  return out;
}

std::pair<Episode, Episode> make_cycle_pair(const WorldCfg& cfg, std::uint64_t seed) {
  const Rng r(seed, "cycle-pair");
  return {make_episode(cfg, r.at(0)), make_episode(cfg, r.at(1))};
}

Episode replay(const WorldState& initial, const Tensor& actions, const WorldCfg& cfg, std::uint64_t seed) {
  if (actions.cols() != cfg.action_dim()) throw ShapeError("replay: action dimension mismatch");
  Episode ep;
  ep.cfg = cfg;
  ep.cfg.frames = actions.rows() + 1;
  ep.seed = seed;
  ep.initial = initial;
  ep.actions = actions;
  ep.action_valid.assign(actions.rows(), 1);
  WorldState st = initial;
  ep.frames.push_back(render(st, cfg));
  for (std::size_t t = 0; t < actions.rows(); ++t) {
    st = advance(st, actions.row(t), cfg);
    ep.frames.push_back(render(st, cfg));
  }
  return ep;
}

std::vector<WorldState> trajectory(const Episode& ep) {
  std::vector<WorldState> states{ep.initial};
  for (std::size_t t = 0; t < ep.actions.rows(); ++t) states.push_back(advance(states.back(), ep.actions.row(t), ep.cfg));
  return states;
}

std::vector<Episode> make_dataset(const WorldCfg& cfg, std::uint64_t seed, std::size_t count) {
  const Rng r(seed, "dataset");
  std::vector<Episode> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_episode(cfg, r.at(i)));
  return out;
}

namespace {

void write_cfg(BinaryWriter& w, const WorldCfg& c) {
  w.u64(c.grid);
  w.u64(c.frames);
  w.u64(c.n_sprites);
  w.u32(static_cast<std::uint32_t>(c.action_mode));
  w.u32(static_cast<std::uint32_t>(c.action_range));
  w.f64(c.distractor_rate);
  w.u32(static_cast<std::uint32_t>(c.sprite_min));
  w.u32(static_cast<std::uint32_t>(c.sprite_max));
  w.u32(static_cast<std::uint32_t>(c.camera_range));
  w.f64(c.momentum);
}

WorldCfg read_cfg(BinaryReader& r) {
  WorldCfg c;
  c.grid = r.u64();
  c.frames = r.u64();
  c.n_sprites = r.u64();
  const auto mode = r.u32();
  if (mode > 2) throw FormatError("episode container: bad action mode");
  c.action_mode = static_cast<ActionMode>(mode);
  c.action_range = static_cast<int>(r.u32());
  c.distractor_rate = r.f64();
  c.sprite_min = static_cast<int>(r.u32());
  c.sprite_max = static_cast<int>(r.u32());
  c.camera_range = static_cast<int>(r.u32());
  c.momentum = r.f64();
  return c;
}

}  // namespace

std::string encode_episodes(const std::vector<Episode>& episodes) {
  BinaryWriter w;
  w.bytes(std::string_view(kEpisodeMagic, 8));
  w.u32(kEpisodeVersion);
  w.u64(episodes.size());
  for (const auto& ep : episodes) {
    write_cfg(w, ep.cfg);
    w.u64(ep.seed);
    w.u64(ep.initial.sprites.size());
    for (const auto& s : ep.initial.sprites) {
      w.u32(static_cast<std::uint32_t>(s.x));
      w.u32(static_cast<std::uint32_t>(s.y));
      w.u32(static_cast<std::uint32_t>(s.size));
      w.f64(s.intensity);
    }
    w.u32(static_cast<std::uint32_t>(ep.initial.cam_x));
    w.u32(static_cast<std::uint32_t>(ep.initial.cam_y));
    w.u64(ep.frames.size());
    for (const auto& f : ep.frames) w.tensor(f);
    w.tensor(ep.actions);
    for (auto v : ep.action_valid) w.u8(v);
  }
  return w.buffer();
}

std::vector<Episode> decode_episodes(std::string data) {
  BinaryReader r(std::move(data));
  if (r.bytes(8) != std::string_view(kEpisodeMagic, 8)) throw FormatError("not an episode container (bad magic)");
  const auto version = r.u32();
  if (version != kEpisodeVersion)
    throw FormatError("unsupported episode container version " + std::to_string(version));
  const auto n = r.u64();
  std::vector<Episode> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    Episode ep;
    ep.cfg = read_cfg(r);
    ep.seed = r.u64();
    const auto ns = r.u64();
    for (std::uint64_t s = 0; s < ns; ++s) {
      Sprite sp;
      sp.x = static_cast<int>(r.u32());
      sp.y = static_cast<int>(r.u32());
      sp.size = static_cast<int>(r.u32());
      sp.intensity = r.f64();
      ep.initial.sprites.push_back(sp);
    }
    ep.initial.cam_x = static_cast<int>(r.u32());
    ep.initial.cam_y = static_cast<int>(r.u32());
    const auto nf = r.u64();
    for (std::uint64_t f = 0; f < nf; ++f) ep.frames.push_back(r.tensor());
    ep.actions = r.tensor();
    if (ep.actions.rows() + 1 != ep.frames.size()) throw FormatError("episode container: action count mismatch");
    for (std::size_t t = 0; t < ep.actions.rows(); ++t) ep.action_valid.push_back(r.u8());
    out.push_back(std::move(ep));
  }
  if (!r.at_end()) throw FormatError("episode container: trailing bytes");
  return out;
}

void save_episodes(const std::filesystem::path& path, const std::vector<Episode>& episodes) {
  write_file_atomic(path, encode_episodes(episodes));
}

std::vector<Episode> load_episodes(const std::filesystem::path& path) { return decode_episodes(read_file(path)); }

std::string dump_episode_text(const Episode& ep) {
  std::ostringstream os;
  os << "episode seed=" << ep.seed << " grid=" << ep.cfg.grid << " frames=" << ep.frames.size()
     << " action_mode=" << to_string(ep.cfg.action_mode) << "\n";
  for (std::size_t t = 0; t < ep.frames.size(); ++t) {
    os << "frame " << t << "\n";
    const auto& f = ep.frames[t];
    for (std::size_t y = 0; y < f.rows(); ++y) {
      for (std::size_t x = 0; x < f.cols(); ++x) os << (x ? " " : "") << format_double(f(y, x));
      os << "\n";
    }
  }
  for (std::size_t t = 0; t < ep.actions.rows(); ++t) {
    os << "action " << t << (ep.action_valid[t] ? "" : " invalid");
    for (double v : ep.actions.row(t)) os << " " << format_double(v);
    os << "\n";
  }
  return os.str();
}

}  // namespace lamward
