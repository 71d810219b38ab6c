#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "lamward/error.hpp"
#include "lamward/planner.hpp"
#include "support/fixtures.hpp"

using namespace lamward;

namespace {

BatchCost quadratic_to(std::vector<double> target) {
  return [target](const Tensor& cand) {
    std::vector<double> out(cand.rows());
    for (std::size_t i = 0; i < cand.rows(); ++i)
      for (std::size_t j = 0; j < cand.cols(); ++j) out[i] += std::pow(cand(i, j) - target[j], 2);
    return out;
  };
}

}  // namespace

TEST_CASE("cem recovers the optimum of an analytic cost") {
  CemCfg cfg = CemCfg::manip();
  const std::vector<double> target{0.3, -0.7, 0.1, 0.9, -0.2, 0.0};
  Rng rng(1, "cem-toy");
  const PlanResult r = cem_optimize(cfg, 2, quadratic_to(target), rng);
  CHECK(r.actions.rows() == 3);
  for (std::size_t j = 0; j < target.size(); ++j) CHECK(std::abs(r.actions[j] - target[j]) <= 0.05);
  CHECK(r.iterations.size() == cfg.iterations);
  for (std::size_t i = 1; i < r.iterations.size(); ++i)
    CHECK(r.iterations[i].elite_mean_cost <= r.iterations[i - 1].elite_mean_cost);
  CHECK(r.cost <= quadratic_to(target)(Tensor(1, 6)).at(0));
  CHECK(r.first_action() == r.actions.row_copy(0));
}

TEST_CASE("straight-line cem repeats one action") {
  CemCfg cfg = CemCfg::nav();
  cfg.iterations = 5;
  Rng rng(2, "cem-line");
  const PlanResult r = cem_optimize(cfg, 2, quadratic_to(std::vector<double>(16, 0.4)), rng);
  CHECK(r.actions.rows() == 8);
  for (std::size_t h = 1; h < 8; ++h) CHECK(r.actions.row_copy(h) == r.actions.row_copy(0));
  CHECK(std::abs(r.actions[0] - 0.4) < 0.05);
}

TEST_CASE("cem respects bounds and is deterministic") {
  CemCfg cfg;
  cfg.iterations = 4;
  Rng a(3, "cem"), b(3, "cem");
  const auto cost = quadratic_to(std::vector<double>(6, 5.0));
  const PlanResult x = cem_optimize(cfg, 2, cost, a), y = cem_optimize(cfg, 2, cost, b);
  CHECK(x.actions == y.actions);
  for (double v : x.actions.data()) CHECK(v <= 1.0);
  cfg.elites = 0;
  CHECK_THROWS(cem_optimize(cfg, 2, cost, a));
  CHECK_THROWS(CemCfg::preset("drone"));
  CHECK(CemCfg::preset("nav").samples == 120);
}

TEST_CASE("displacement and trajectory errors") {
  const Tensor plan(2, 2, std::vector<double>{1, 0, 1, 0});
  const Tensor gt(2, 2, std::vector<double>{0, 1, 0, 1});
  CHECK(delta_xyz(plan, gt) == 4.0);
  const auto e = traj_errors(plan, gt);
  CHECK(e.rpe == doctest::Approx(std::sqrt(2.0)));
  CHECK(e.ate == doctest::Approx((std::sqrt(2.0) + std::sqrt(8.0)) / 2));
  CHECK(delta_xyz(plan, plan) == 0.0);
  CHECK_THROWS_AS(delta_xyz(plan, Tensor(3, 2)), ShapeError);
}

TEST_CASE("plan costs agree between batched and single evaluation") {
  const auto b = fixture::small_bundle(RegKind::sparse);
  ControllerCfg cc;
  cc.latent_dim = 4;
  cc.repr_dim = 12;
  cc.embed = 8;
  cc.hidden = 8;
  const Controller c = make_controller(cc, 2);
  const Tensor s = fixture::small_reprs(1)[0];
  Rng rng(4, "plan-cost");
  const Tensor cand = rng_draw(rng, Dist::normal, 5, 6);
  const auto batch = plan_costs(b, c, s.rows_slice(0, 2), s.row_copy(5), cand, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    const Tensor seq(3, 2, std::vector<double>(cand.row(i).begin(), cand.row(i).end()));
    CHECK(plan_cost(b, c, s.rows_slice(0, 2), seq, s.row_copy(5)) == batch[i]);
  }
}

TEST_CASE("planning runs: summary means and degenerate horizon") {
  const WorldCfg w = fixture::small_world();
  const auto eps = make_dataset(w, 8, 5);
  const auto b = fixture::small_bundle(RegKind::sparse);
  std::vector<Tensor> reprs;
  for (const auto& e : eps) reprs.push_back(b.encoder.encode_episode(e));
  ControllerCfg cc;
  cc.latent_dim = 4;
  cc.repr_dim = 12;
  cc.embed = 8;
  cc.hidden = 8;
  const Controller c = make_controller(cc, 2);
  CemCfg cfg;
  cfg.samples = 20;
  cfg.elites = 4;
  cfg.iterations = 2;
  const auto runs = run_planning(b, c, eps, reprs, cfg, 6, 1);
  const auto s = summarize(runs);
  double m = 0.0;
  for (const auto& r : runs) m += r.delta_xyz / 6.0;
  CHECK(s.mean_delta_xyz == doctest::Approx(m));
  CHECK(s.episodes == 6);
  for (const auto& r : runs) {
    CHECK(r.start >= 1);
    CHECK(r.start + cfg.horizon < w.frames);
    CHECK(r.gt == eps[r.episode].actions.rows_slice(r.start, cfg.horizon));
  }
  const auto again = run_planning(b, c, eps, reprs, cfg, 6, 1);
  for (std::size_t i = 0; i < runs.size(); ++i) CHECK(plan_episode_json(runs[i]) == plan_episode_json(again[i]));

  cfg.horizon = 0;
  for (const auto& r : run_planning(b, c, eps, reprs, cfg, 3, 2)) {
    CHECK(r.plan.actions.rows() == 0);
    CHECK(r.delta_xyz == 0.0);
  }
}
