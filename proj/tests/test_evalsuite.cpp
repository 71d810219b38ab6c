#include <cmath>

#include "doctest.h"
#include "lamward/evalsuite.hpp"
#include "support/fixtures.hpp"

using namespace lamward;

TEST_CASE("identity stitch gives ratio exactly one") {
  const auto reprs = fixture::small_reprs(4);
  const auto b = fixture::small_bundle(RegKind::sparse);
  const auto p = leakage_pair(reprs[1], reprs[1], b, 4);
  CHECK(p.original == p.stitched);
  std::vector<Tensor> single{reprs[2]};
  EvalOptions o;
  o.pairs = 5;
  CHECK(eval_leakage(b, single, o).rows[0].metric("ratio") == 1.0);
}

TEST_CASE("deterministic bundle has cycle ratio exactly one") {
  auto b = fixture::small_bundle(RegKind::deterministic);
  const auto reprs = fixture::small_reprs(12);
  train(b, reprs, 10);
  EvalOptions o;
  o.pairs = 10;
  const auto r = eval_cycle(b, reprs, o);
  CHECK(r.rows[0].metric("cycle_error") == r.rows[0].metric("original_error"));
  CHECK(r.rows[0].metric("ratio") == 1.0);
  CHECK(z_sensitivity(b, reprs) == 0.0);
}

TEST_CASE("cycle with B = A reproduces the original rollout for a z-independent model") {
  const auto reprs = fixture::small_reprs(2);
  const auto b = fixture::small_bundle(RegKind::sparse);
  const auto p = cycle_pair(reprs[0], reprs[0], b, 2, 0);
  CHECK(p.cycle == p.original);
}

TEST_CASE("capacity report rows, ordering and duplicates") {
  const auto reprs = fixture::small_reprs(6);
  const auto det = fixture::small_bundle(RegKind::deterministic);
  const auto none = fixture::small_bundle(RegKind::none);
  auto sparse = fixture::small_bundle(RegKind::sparse);
  sparse.config_digest = 3;
  EvalOptions o;
  const auto one = eval_capacity({&det}, reprs, o);
  CHECK(one.rows.size() == 1);
  CHECK(one.rows[0].metric("one_step_error") > 0.0);

  const auto many = eval_capacity({&det, &sparse, &none, &sparse}, reprs, o);
  REQUIRE(many.rows.size() == 4);
  CHECK(many.rows[0].label == none.model.reg.label());
  CHECK(many.rows[3].label == det.model.reg.label());
  CHECK(many.rows[1].metrics == many.rows[2].metrics);
  CHECK(many.rows[1].config_digest == 3);

  ModelCfg m = sparse.model;
  EncoderCfg e = sparse.encoder.cfg();
  e.seed = 999;
  const auto other = make_bundle(m, sparse.train, Encoder(e), 1);
  CHECK_THROWS(eval_capacity({&sparse, &other}, reprs, o));
}

TEST_CASE("untrained bundle shows no leakage signal") {
  auto b = fixture::small_bundle(RegKind::sparse);
  // with the skip gain at its default of 1 the untrained model copies s_t, which is not a random prediction
  b.params.value("fwd.skip").fill(0.0);
  const auto reprs = fixture::small_reprs(60, 9);
  EvalOptions o;
  o.pairs = 100;
  const double ratio = eval_leakage(b, reprs, o).rows[0].metric("ratio");
  CHECK(std::abs(ratio - 1.0) <= 0.2);
}

TEST_CASE("reports are reproducible and carry digests") {
  const auto reprs = fixture::small_reprs(6);
  auto b = fixture::small_bundle(RegKind::noisy);
  b.config_digest = 0xabc;
  EvalOptions o;
  o.pairs = 8;
  const auto r1 = eval_cycle(b, reprs, o), r2 = eval_cycle(b, reprs, o);
  const std::string prov = R"({"tool_version":"x","config_digest":"1","seed":0})";
  CHECK(report_json(r1, prov) == report_json(r2, prov));
  CHECK(report_csv(r1) == report_csv(r2));
  CHECK(report_csv(r1).find(std::to_string(0xabc)) != std::string::npos);
  CHECK(plot_data_csv(r1).rfind("label,x_name,y_name,x,y\n", 0) == 0);
  CHECK(report_json(r1, prov).find("\"protocol\": \"cycle\"") != std::string::npos);
  const auto pairs = eval_pairs(10, 50, 3);
  for (const auto& [a, c] : pairs) CHECK(a != c);
}
