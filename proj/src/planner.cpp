#include "lamward/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "lamward/error.hpp"

namespace lamward {

CemCfg CemCfg::manip() { return CemCfg{}; }

CemCfg CemCfg::nav() {
  CemCfg c;
  c.samples = 120;
  c.elites = 10;
  c.iterations = 1;
  c.horizon = 8;
  c.straight_line = true;
  return c;
}

CemCfg CemCfg::preset(std::string_view name) {
  if (name == "manip") return manip();
  if (name == "nav") return nav();
  throw std::invalid_argument("unknown planning preset: " + std::string(name));
}

void CemCfg::validate() const {
  if (elites == 0 || elites > samples) throw std::invalid_argument("CemCfg: need 1 <= K <= N");
  if (iterations < 1) throw std::invalid_argument("CemCfg: need at least one iteration");
  if (!(init_std > 0.0) || !(std_floor >= 0.0) || !(action_low <= action_high))
    throw std::invalid_argument("CemCfg: bad distribution or bounds");
}

Tensor PlanResult::first_action() const {
  if (actions.rows() == 0) return Tensor(0, actions.cols());
  return actions.row_copy(0);
}

PlanResult cem_optimize(const CemCfg& cfg, std::size_t action_dim, const BatchCost& cost, Rng& rng) {
  cfg.validate();
  const std::size_t H = cfg.horizon, A = action_dim;
  const std::size_t P = (cfg.straight_line ? (H > 0 ? 1 : 0) : H) * A;
  PlanResult res;
  if (P == 0) {
    res.actions = Tensor(0, A);
    res.cost = cost(Tensor(1, 0)).at(0);
    return res;
  }
  auto expand = [&](std::span<const double> p, std::span<double> full) {
    if (!cfg.straight_line) {
      std::copy(p.begin(), p.end(), full.begin());
      return;
    }
    for (std::size_t h = 0; h < H; ++h) std::copy(p.begin(), p.end(), full.begin() + static_cast<std::ptrdiff_t>(h * A));
  };

  std::vector<double> mean(P, cfg.init_mean), stdev(P, cfg.init_std);
  Tensor elites(0, P);
  std::vector<double> elite_costs;
  Tensor best_param(1, P);
  double best_cost = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    // Row 0 is the current mean; the rest are fresh samples. All draws happen
    // before any cost evaluation.
    const std::size_t n_new = cfg.samples + 1;
    Tensor params(n_new, P);
    for (std::size_t j = 0; j < P; ++j) params(0, j) = std::clamp(mean[j], cfg.action_low, cfg.action_high);
    for (std::size_t i = 1; i < n_new; ++i)
      for (std::size_t j = 0; j < P; ++j)
        params(i, j) = std::clamp(mean[j] + stdev[j] * rng.normal(), cfg.action_low, cfg.action_high);
    Tensor full(n_new, H * A);
    for (std::size_t i = 0; i < n_new; ++i) expand(params.row(i), full.row(i));
    const std::vector<double> costs = cost(full);
    if (costs.size() != n_new) throw std::runtime_error("cem: cost function returned wrong number of values");

    Tensor pool = params;
    std::vector<double> pool_costs = costs;
    if (cfg.keep_elites && elites.rows() > 0) {
      std::vector<Tensor> parts{pool, elites};
      pool = vstack(parts);
      pool_costs.insert(pool_costs.end(), elite_costs.begin(), elite_costs.end());
    }
    std::vector<std::size_t> order(pool.rows());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pool_costs[a] < pool_costs[b]; });

    const std::size_t K = cfg.elites;
    elites = Tensor(K, P);
    elite_costs.assign(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      std::copy(pool.row(order[k]).begin(), pool.row(order[k]).end(), elites.row(k).begin());
      elite_costs[k] = pool_costs[order[k]];
    }
    if (elite_costs[0] < best_cost) {
      best_cost = elite_costs[0];
      best_param = elites.row_copy(0);
    }
    for (std::size_t j = 0; j < P; ++j) {
      double m = 0.0;
      for (std::size_t k = 0; k < K; ++k) m += elites(k, j);
      m /= static_cast<double>(K);
      double v = 0.0;
      for (std::size_t k = 0; k < K; ++k) v += (elites(k, j) - m) * (elites(k, j) - m);
      mean[j] = m;
      stdev[j] = std::max(std::sqrt(v / static_cast<double>(K)), cfg.std_floor);
    }
    ++res.refits;
    CemIteration st;
    st.elite_mean_cost = std::accumulate(elite_costs.begin(), elite_costs.end(), 0.0) / static_cast<double>(K);
    st.best_cost = best_cost;
    st.mean_std = std::accumulate(stdev.begin(), stdev.end(), 0.0) / static_cast<double>(P);
    res.iterations.push_back(st);
  }
  res.actions = Tensor(H, A);
  expand(best_param.row(0), res.actions.data());
  res.cost = best_cost;
  return res;
}

std::vector<double> plan_costs(const ModelBundle& b, const Controller& c, const Tensor& history, const Tensor& goal,
                               const Tensor& candidates, std::size_t horizon) {
  const std::size_t R = b.repr_dim(), W = b.model.window, A = c.cfg.action_dim, N = candidates.rows();
  if (history.rows() == 0 || history.cols() != R) throw ShapeError("plan_costs: history must be k x R, k >= 1");
  if (goal.size() != R) throw ShapeError("plan_costs: goal must have R entries");
  if (candidates.cols() != horizon * A) throw ShapeError("plan_costs: candidates must be N x H*A");

  // window[w] is N x R, oldest first; the last is the current state.
  std::vector<Tensor> window(W, Tensor(N, R));
  for (std::size_t w = 0; w < W; ++w) {
    const std::size_t back = W - 1 - w;
    const std::size_t src = history.rows() - 1 >= back ? history.rows() - 1 - back : 0;
    for (std::size_t i = 0; i < N; ++i) std::copy(history.row(src).begin(), history.row(src).end(), window[w].row(i).begin());
  }
  for (std::size_t h = 0; h < horizon; ++h) {
    Tensor act(N, A);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t a = 0; a < A; ++a) act(i, a) = candidates(i, h * A + a);
    Tape t;
    Var state = t.constant(window.back());
    Var z = controller_graph(t, c, t.constant(std::move(act)), state);
    std::vector<Var> ctx;
    for (const auto& w : window) ctx.push_back(t.constant(w));
    Tensor next = forward_graph(t, b, ad::concat_cols(ctx), z).value();
    window.erase(window.begin());
    window.push_back(std::move(next));
  }
  std::vector<double> out(N);
  for (std::size_t i = 0; i < N; ++i) out[i] = l2_distance(window.back().row(i), goal.data());
  return out;
}

double plan_cost(const ModelBundle& b, const Controller& c, const Tensor& history, const Tensor& actions,
                 const Tensor& goal) {
  const std::size_t H = actions.rows();
  Tensor flat(1, H * actions.cols(), std::vector<double>(actions.data().begin(), actions.data().end()));
  if (H == 0) flat = Tensor(1, 0);
  return plan_costs(b, c, history, goal, flat, H).at(0);
}

PlanResult cem_plan(const Tensor& history, const Tensor& goal, const CemCfg& cfg, const ModelBundle& b,
                    const Controller& c, Rng& rng) {
  BatchCost cost = [&](const Tensor& cand) { return plan_costs(b, c, history, goal, cand, cfg.horizon); };
  return cem_optimize(cfg, c.cfg.action_dim, cost, rng);
}

double delta_xyz(const Tensor& plan, const Tensor& gt) {
  if (!plan.same_shape(gt)) throw ShapeError("delta_xyz: plan and ground truth differ in length");
  double total = 0.0;
  for (std::size_t a = 0; a < plan.cols(); ++a) {
    double s = 0.0;
    for (std::size_t h = 0; h < plan.rows(); ++h) s += plan(h, a) - gt(h, a);
    total += std::abs(s);
  }
  return total;
}

TrajErrors traj_errors(const Tensor& plan, const Tensor& gt) {
  if (!plan.same_shape(gt)) throw ShapeError("traj_errors: plan and ground truth differ in length");
  const std::size_t H = plan.rows(), A = plan.cols();
  TrajErrors e;
  if (H == 0) return e;
  std::vector<double> p(A, 0.0), q(A, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    double step_sq = 0.0, pos_sq = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      const double d = plan(h, a) - gt(h, a);
      step_sq += d * d;
      p[a] += plan(h, a);
      q[a] += gt(h, a);
      pos_sq += (p[a] - q[a]) * (p[a] - q[a]);
    }
    e.ate += std::sqrt(pos_sq);
    e.rpe += std::sqrt(step_sq);
  }
  e.ate /= static_cast<double>(H);
  e.rpe /= static_cast<double>(H);
  return e;
}

std::vector<PlanEpisode> run_planning(const ModelBundle& b, const Controller& c, const std::vector<Episode>& episodes,
                                      const std::vector<Tensor>& reprs, const CemCfg& cfg, std::size_t runs,
                                      std::uint64_t seed) {
  if (episodes.empty() || episodes.size() != reprs.size()) throw std::invalid_argument("run_planning: no episodes");
  const std::size_t H = cfg.horizon, T = reprs.front().rows(), A = c.cfg.action_dim;
  if (T < H + 2) throw std::invalid_argument("run_planning: episodes shorter than horizon + 2");
  const Rng root(seed, "planning");
  std::vector<PlanEpisode> out(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    Rng pick = root.child("pick").child(r);
    PlanEpisode& rec = out[r];
    rec.episode = pick.below(episodes.size());
    // start >= 1 so the context window holds a real previous frame.
    rec.start = 1 + pick.below(T - H - 1);
    const auto& ep = episodes[rec.episode];
    const auto& s = reprs[rec.episode];
    const std::size_t k = std::min(b.model.window, rec.start + 1);
    const Tensor history = s.rows_slice(rec.start + 1 - k, k);
    const Tensor goal = s.row_copy(rec.start + H);
    rec.gt = ep.actions.rows_slice(rec.start, H);
    Rng plan_rng = root.child("cem").child(r);
    rec.plan = cem_plan(history, goal, cfg, b, c, plan_rng);
    rec.delta_xyz = delta_xyz(rec.plan.actions, rec.gt);
    const auto te = traj_errors(rec.plan.actions, rec.gt);
    rec.ate = te.ate;
    rec.rpe = te.rpe;
    Rng rand = root.child("random").child(r);
    rec.random_actions = Tensor(H, A);
    for (auto& v : rec.random_actions.data()) v = rand.uniform(cfg.action_low, cfg.action_high);
    rec.random_delta_xyz = delta_xyz(rec.random_actions, rec.gt);
  }
  return out;
}

PlanSummary summarize(const std::vector<PlanEpisode>& runs) {
  PlanSummary s;
  s.episodes = runs.size();
  if (runs.empty()) return s;
  for (const auto& r : runs) {
    s.mean_delta_xyz += r.delta_xyz;
    s.mean_ate += r.ate;
    s.mean_rpe += r.rpe;
    s.mean_random_delta_xyz += r.random_delta_xyz;
  }
  const double n = static_cast<double>(runs.size());
  s.mean_delta_xyz /= n;
  s.mean_ate /= n;
  s.mean_rpe /= n;
  s.mean_random_delta_xyz /= n;
  return s;
}

namespace {
nlohmann::json rows_json(const Tensor& t) {
  auto j = nlohmann::json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) j.push_back(std::vector<double>(t.row(r).begin(), t.row(r).end()));
  return j;
}
}  // namespace

std::string plan_episode_json(const PlanEpisode& r) {
  nlohmann::json j;
  j["episode"] = r.episode;
  j["start"] = r.start;
  j["planned_actions"] = rows_json(r.plan.actions);
  j["gt_actions"] = rows_json(r.gt);
  j["final_cost"] = r.plan.cost;
  auto iters = nlohmann::json::array();
  for (const auto& it : r.plan.iterations)
    iters.push_back({{"elite_mean_cost", it.elite_mean_cost}, {"best_cost", it.best_cost}, {"mean_std", it.mean_std}});
  j["iterations"] = iters;
  j["delta_xyz"] = r.delta_xyz;
  j["ate"] = r.ate;
  j["rpe"] = r.rpe;
  j["random_delta_xyz"] = r.random_delta_xyz;
  return j.dump();
}

}  // namespace lamward
