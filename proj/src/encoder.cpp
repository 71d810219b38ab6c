#include "lamward/encoder.hpp"

#include <cmath>

#include "lamward/error.hpp"
#include "lamward/kernels.hpp"

namespace lamward {

Encoder::Encoder(const EncoderCfg& cfg) : cfg_(cfg) {
  if (cfg.repr_dim == 0 || cfg.grid == 0) throw std::invalid_argument("EncoderCfg: dimensions must be positive");
  Rng rng(cfg.seed, "encoder");
  const std::size_t in = cfg.grid * cfg.grid;
  // Roughly a quarter of the pixels are lit, so this keeps pre-activations O(1).
  const double w_scale = 2.0 / static_cast<double>(cfg.grid);
  Rng wr = rng.child("W");
  weights_ = rng_draw(wr, Dist::normal, in, cfg.repr_dim);
  for (auto& v : weights_.data()) v *= w_scale;
  Rng br = rng.child("b");
  bias_ = rng_draw(br, Dist::normal, 1, cfg.repr_dim);
  for (auto& v : bias_.data()) v *= 0.1;
}

Encoder::Encoder(const EncoderCfg& cfg, Tensor weights, Tensor bias)
    : cfg_(cfg), weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.rows() != cfg.grid * cfg.grid || weights_.cols() != cfg.repr_dim || bias_.rows() != 1 ||
      bias_.cols() != cfg.repr_dim)
    throw ShapeError("Encoder: weight shapes do not match cfg");
}

Tensor Encoder::encode_frames(std::span<const Tensor> frames) const {
  const std::size_t in = cfg_.grid * cfg_.grid;
  Tensor x(frames.size(), in);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.rows() != cfg_.grid || f.cols() != cfg_.grid)
      throw ShapeError("encode_frame: expected " + std::to_string(cfg_.grid) + "x" + std::to_string(cfg_.grid) +
                       " frame, got " + shape_str(f));
    std::copy(f.data().begin(), f.data().end(), x.row(i).begin());
  }
  Tensor s = kernels::matmul(x, weights_);
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) s(i, j) = std::tanh(s(i, j) + bias_[j]);
  return s;
}

Tensor Encoder::encode_frame(const Tensor& frame) const { return encode_frames(std::span<const Tensor>(&frame, 1)); }

Tensor Encoder::encode_episode(const Episode& ep) const { return encode_frames(ep.frames); }

}  // namespace lamward
