#include "doctest.h"
#include "lamward/controller.hpp"
#include "lamward/error.hpp"
#include "support/fixtures.hpp"

using namespace lamward;

namespace {

ControllerCfg small_cfg() {
  ControllerCfg c;
  c.action_dim = 2;
  c.latent_dim = 3;
  c.repr_dim = 4;
  c.embed = 16;
  c.hidden = 16;
  c.steps = 3000;
  c.batch = 64;
  c.lr = 3e-3;
  c.weight_decay = 0.0;
  return c;
}

}  // namespace

TEST_CASE("controller fits a realizable linear target") {
  Rng rng(1, "ctrl-lin");
  const std::size_t n = 512;
  ControllerDataset d{rng_draw(rng, Dist::normal, n, 4), rng_draw(rng, Dist::uniform, n, 2), Tensor(n, 3)};
  for (auto& v : d.actions.data()) v = 2.0 * v - 1.0;
  const Tensor A = rng_draw(rng, Dist::normal, 2, 3), B = rng_draw(rng, Dist::normal, 4, 3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      double z = 0.0;
      for (std::size_t j = 0; j < 2; ++j) z += 0.3 * d.actions(i, j) * A(j, k);
      for (std::size_t j = 0; j < 4; ++j) z += 0.1 * d.context(i, j) * B(j, k);
      d.targets(i, k) = z;
    }
  Controller c = make_controller(small_cfg(), 2);
  const auto log = train_controller(c, d);
  CHECK(log.final_mse < 1e-4);
  CHECK(log.loss.size() == small_cfg().steps);
}

TEST_CASE("constant targets give a constant controller") {
  Rng rng(2, "ctrl-const");
  const std::size_t n = 256;
  ControllerDataset d{rng_draw(rng, Dist::normal, n, 4), rng_draw(rng, Dist::normal, n, 2), Tensor(n, 3)};
  for (std::size_t i = 0; i < n; ++i) d.targets(i, 0) = 0.5, d.targets(i, 1) = -0.25, d.targets(i, 2) = 0.1;
  Controller c = make_controller(small_cfg(), 3);
  CHECK(train_controller(c, d).final_mse < 1e-4);
}

TEST_CASE("controller dataset, frozen bundle and rollout identities") {
  const WorldCfg w = fixture::small_world();
  const auto eps = make_dataset(w, 5, 6);
  const auto b = fixture::small_bundle(RegKind::sparse);
  std::vector<Tensor> reprs;
  for (const auto& e : eps) reprs.push_back(b.encoder.encode_episode(e));
  const auto d = build_controller_dataset(b, eps, reprs);
  CHECK(d.size() == eps.size() * (w.frames - 1));
  CHECK(d.context.row_copy(0) == reprs[0].row_copy(0));
  CHECK(d.actions.row_copy(1) == eps[0].actions.row_copy(1));

  const Episode cut = stitch_scene_cut(eps[0], eps[1], 3);
  const std::vector<Episode> one{cut};
  const std::vector<Tensor> one_r{b.encoder.encode_episode(cut)};
  CHECK(build_controller_dataset(b, one, one_r).size() == w.frames - 2);

  ControllerCfg cfg;
  cfg.action_dim = 2;
  cfg.latent_dim = 4;
  cfg.repr_dim = 12;
  cfg.embed = 8;
  cfg.hidden = 8;
  cfg.steps = 20;
  cfg.batch = 8;
  Controller c = make_controller(cfg, 1);
  const ModelBundle before = b;
  train_controller(c, d);
  CHECK(before == b);

  // A policy returning the IDM's own latents reproduces the IDM rollout.
  const Tensor& s = reprs[0];
  const auto idm = rollout(s, b, 2, LatentSource::idm);
  LatentPolicy same = [&](const Tensor&, std::size_t t) { return idm.latents.row_copy(t); };
  const auto via = rollout(s, b, 2, LatentSource::controller, RolloutOptions{nullptr, &same});
  CHECK(via.errors == idm.errors);

  const auto cr = rollout_controller(eps[0], s, b, c, 2);
  CHECK(cr.idm.errors == idm.errors);
  CHECK(cr.ratio == doctest::Approx(cr.controller.mean_error() / idm.mean_error()));
}

TEST_CASE("controller shape errors") {
  Controller c = make_controller(small_cfg(), 1);
  CHECK_THROWS_AS(controller_forward(c, Tensor(2, 3), Tensor(2, 4)), ShapeError);
  CHECK_THROWS_AS(controller_forward(c, Tensor(2, 2), Tensor(2, 5)), ShapeError);
  ControllerCfg nc = small_cfg();
  nc.use_context = false;
  Controller blind = make_controller(nc, 1);
  CHECK(controller_forward(blind, Tensor(2, 2), Tensor(2, 9)).cols() == 3);
  CHECK_THROWS(train_controller(c, ControllerDataset{}));
}
