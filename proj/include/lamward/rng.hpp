#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace lamward {

/// Counter-based generator. Draw k of stream (seed, label) is a pure function of
/// (seed, label, k); the object only tracks the next k.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string label);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (cosine branch). Consumes two raw draws.
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Independent stream keyed by this stream's seed and label + "/" + sub.
  [[nodiscard]] Rng child(std::string_view sub) const;
  [[nodiscard]] Rng child(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }
  std::uint64_t position() const { return counter_; }
  void seek(std::uint64_t position) { counter_ = position; }

  /// Raw value at an absolute index without moving the cursor.
  std::uint64_t at(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::string label_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace lamward
