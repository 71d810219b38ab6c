#include "lamward/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lamward {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::string label)
    : seed_(seed), label_(std::move(label)), key_(splitmix64(seed ^ fnv1a64(label_))) {}

std::uint64_t Rng::at(std::uint64_t index) const {
  return splitmix64(key_ ^ splitmix64(index * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
}

std::uint64_t Rng::next_u64() { return at(counter_++); }

double Rng::uniform() {
  // 53 random bits, offset by half an ulp so 0 and 1 are never returned.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

Rng Rng::child(std::string_view sub) const {
  std::string l = label_;
  l += '/';
  l += sub;
  return Rng(seed_, std::move(l));
}

Rng Rng::child(std::uint64_t index) const { return child(std::to_string(index)); }

}  // namespace lamward
