#include "doctest.h"
#include "lamward/config.hpp"
#include "lamward/error.hpp"

using namespace lamward;

TEST_CASE("config text round trip is stable") {
  RunConfig c;
  c.model.reg.kind = RegKind::noisy;
  c.model.reg.beta = 1e-5;
  c.train.lr = 0.1 + 0.2;
  c.world.action_mode = ActionMode::both;
  c.controller.action_dim = 4;
  const std::string text = config_to_text(c);
  const RunConfig back = config_from_text(text);
  CHECK(back == c);
  CHECK(config_to_text(back) == text);
  CHECK(back.train.lr == 0.1 + 0.2);
  CHECK(config_digest(back) == config_digest(c));
}

TEST_CASE("partial configs keep defaults; unknown keys are rejected") {
  const RunConfig c = config_from_text(R"({"train": {"steps": 12}, "model": {"reg": {"kind": "discrete"}}})");
  CHECK(c.train.steps == 12);
  CHECK(c.train.batch == TrainCfg{}.batch);
  CHECK(c.model.reg.kind == RegKind::discrete);
  CHECK_THROWS_AS(config_from_text(R"({"trian": {}})"), FormatError);
  CHECK_THROWS_AS(config_from_text(R"({"train": {"stpes": 3}})"), FormatError);
  CHECK_THROWS_AS(config_from_text(R"({"train": {"steps": "many"}})"), FormatError);
  CHECK_THROWS_AS(config_from_text("{"), FormatError);
  CHECK_THROWS(config_from_text(R"({"world": {"action_mode": "tank"}})"));
}

TEST_CASE("digests separate training fields from the rest") {
  RunConfig a, b;
  b.eval.pairs = 7;
  CHECK(config_digest(a) != config_digest(b));
  CHECK(training_digest(a) == training_digest(b));
  b.train.seed = 99;
  CHECK(training_digest(a) != training_digest(b));
  CHECK(digest_hex(255) == "00000000000000ff");
}

TEST_CASE("validation catches cross-field mistakes") {
  RunConfig c;
  c.validate();
  c.encoder.grid = 12;
  CHECK_THROWS(c.validate());
  c = RunConfig{};
  c.eval.ctx = c.world.frames;
  CHECK_THROWS(c.validate());
}
