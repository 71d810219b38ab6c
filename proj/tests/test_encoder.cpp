#include <Eigen/Dense>
#include <set>

#include "doctest.h"
#include "lamward/encoder.hpp"
#include "lamward/error.hpp"

using namespace lamward;

TEST_CASE("encoder is frozen and deterministic") {
  const Encoder a(EncoderCfg{}), b(EncoderCfg{});
  CHECK(a == b);
  const Episode ep = make_episode(WorldCfg{}, 1);
  const Tensor s = a.encode_episode(ep);
  CHECK(s.rows() == ep.frames.size());
  CHECK(s.cols() == 64);
  for (double v : s.data()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
  for (std::size_t t = 0; t < ep.frames.size(); ++t) CHECK(a.encode_frame(ep.frames[t]) == s.row_copy(t));
  CHECK(a.encode_frames(ep.frames) == s);
  CHECK_THROWS_AS(a.encode_frame(Tensor(8, 8)), ShapeError);
  EncoderCfg other;
  other.seed = 99;
  CHECK_FALSE(Encoder(other) == a);
}

TEST_CASE("one-pixel sprite displacement changes the representation") {
  WorldCfg c;
  c.distractor_rate = 0.0;
  const Encoder enc(EncoderCfg{});
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Episode ep = make_episode(c, seed);
    WorldState moved = ep.initial;
    auto& agent = moved.sprites[0];
    agent.x = agent.x > 0 ? agent.x - 1 : agent.x + 1;
    const Tensor a = enc.encode_frame(render(ep.initial, c)), b = enc.encode_frame(render(moved, c));
    CHECK(l2_distance(a.row(0), b.row(0)) > 0.0);
  }
}

// Sprites differ only in intensity, so with several of them a linear readout of
// a linear-then-tanh code mixes their positions; the probe uses one sprite.
TEST_CASE("linear probe recovers the sprite position") {
  WorldCfg c;
  c.distractor_rate = 0.0;
  c.n_sprites = 1;
  const Encoder enc(EncoderCfg{});
  std::vector<Tensor> reprs;
  std::vector<double> xs;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Episode ep = make_episode(c, seed);
    const auto states = trajectory(ep);
    const Tensor s = enc.encode_episode(ep);
    for (std::size_t t = 0; t < states.size(); ++t) {
      reprs.push_back(s.row_copy(t));
      xs.push_back(states[t].sprites[0].x);
    }
  }
  const std::size_t n = reprs.size(), R = reprs[0].cols(), n_train = n / 2;
  Eigen::MatrixXd X(n, R + 1);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < R; ++j) X(i, j) = reprs[i][j];
    X(i, R) = 1.0;
    y(i) = xs[i];
  }
  const Eigen::VectorXd w = X.topRows(n_train).colPivHouseholderQr().solve(y.head(n_train));
  const Eigen::VectorXd pred = X.bottomRows(n - n_train) * w;
  const Eigen::VectorXd target = y.tail(n - n_train);
  const double ss_res = (pred - target).squaredNorm();
  const double ss_tot = (target.array() - target.mean()).matrix().squaredNorm();
  CHECK(1.0 - ss_res / ss_tot >= 0.8);
}

TEST_CASE("no representation collisions over distinct noiseless frames") {
  WorldCfg c;
  c.distractor_rate = 0.0;
  const Encoder enc(EncoderCfg{});
  std::set<std::vector<double>> frames, reprs;
  for (std::uint64_t seed = 0; frames.size() < 10000; ++seed) {
    const Episode ep = make_episode(c, seed);
    for (const auto& f : ep.frames) {
      std::vector<double> key(f.data().begin(), f.data().end());
      if (!frames.insert(key).second) continue;
      const Tensor s = enc.encode_frame(f);
      reprs.insert(std::vector<double>(s.data().begin(), s.data().end()));
    }
  }
  CHECK(reprs.size() == frames.size());
}
