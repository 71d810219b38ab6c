#pragma once

#include <vector>

#include "lamward/encoder.hpp"
#include "lamward/lam.hpp"
#include "lamward/worldgen.hpp"

namespace fixture {

using namespace lamward;

inline WorldCfg small_world() {
  WorldCfg w;
  w.grid = 8;
  w.frames = 8;
  w.n_sprites = 2;
  w.sprite_min = 2;
  w.sprite_max = 3;
  w.camera_range = 1;
  return w;
}

inline Encoder small_encoder() {
  EncoderCfg e;
  e.grid = 8;
  e.repr_dim = 12;
  return Encoder(e);
}

inline ModelBundle small_bundle(RegKind kind, std::uint64_t seed = 1) {
  ModelCfg m;
  m.latent_dim = 4;
  m.hidden = 10;
  m.reg.kind = kind;
  m.reg.codebook_size = 8;
  m.reg.reset_period = 5;
  TrainCfg t;
  t.steps = 40;
  t.batch = 4;
  t.lr = 3e-3;
  t.seed = seed;
  return make_bundle(m, t, small_encoder(), seed);
}

inline std::vector<Tensor> small_reprs(std::size_t n, std::uint64_t seed = 3) {
  const Encoder enc = small_encoder();
  std::vector<Tensor> out;
  for (const auto& ep : make_dataset(small_world(), seed, n)) out.push_back(enc.encode_episode(ep));
  return out;
}

}  // namespace fixture
