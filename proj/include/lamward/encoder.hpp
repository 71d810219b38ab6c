#pragma once

#include <cstdint>

#include "lamward/tensor.hpp"
#include "lamward/worldgen.hpp"

namespace lamward {

struct EncoderCfg {
  std::size_t repr_dim = 64;
  std::size_t grid = 16;
  std::uint64_t seed = 1234;
  bool operator==(const EncoderCfg&) const = default;
};

/// Frozen frame encoder s = tanh(x W + b), x the flattened frame. Weights are
/// drawn once from the seed and never trained; it never enters a ParamSet.
class Encoder {
 public:
  explicit Encoder(const EncoderCfg& cfg);
  Encoder(const EncoderCfg& cfg, Tensor weights, Tensor bias);

  const EncoderCfg& cfg() const { return cfg_; }
  /// grid^2 x repr_dim
  const Tensor& weights() const { return weights_; }
  /// 1 x repr_dim
  const Tensor& bias() const { return bias_; }

  /// 1 x repr_dim
  Tensor encode_frame(const Tensor& frame) const;
  /// frames.size() x repr_dim, one row per frame.
  Tensor encode_frames(std::span<const Tensor> frames) const;
  /// ReprSequence: T x repr_dim
  Tensor encode_episode(const Episode& ep) const;

  bool operator==(const Encoder&) const = default;

 private:
  EncoderCfg cfg_;
  Tensor weights_;
  Tensor bias_;
};

}  // namespace lamward
