#include <cmath>

#include "doctest.h"
#include "lamward/error.hpp"
#include "lamward/sampler.hpp"

using namespace lamward;

namespace {

std::pair<double, double> moments(const Tensor& s) {
  double m = 0.0, v = 0.0;
  const double n = static_cast<double>(s.size());
  for (double x : s.data()) m += x / n;
  for (double x : s.data()) v += (x - m) * (x - m) / n;
  return {m, v};
}

}  // namespace

TEST_CASE("sgld on the quadratic energy reaches the standard normal") {
  SgldCfg cfg;
  cfg.steps = 100000;
  cfg.start = {5.0};
  Rng rng(1, "sgld-quad");
  const Tensor s = sgld_sample(quadratic_energy_fn(), cfg, 1, rng);
  CHECK(s.rows() == (cfg.steps - cfg.burn_in()) / cfg.thin);
  const auto [m, v] = moments(s);
  CHECK(std::abs(m) <= 0.1);
  CHECK(std::abs(v - 1.0) <= 0.3);

  // One chain of this length has only ~200 effective samples, so the same
  // bands are also checked on a pool of independent chains.
  cfg.start = {5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0};
  Rng pool_rng(2, "sgld-quad-pool");
  const auto [pm, pv] = moments(sgld_sample(quadratic_energy_fn(), cfg, 16, pool_rng));
  CHECK(std::abs(pm) <= 0.1);
  CHECK(std::abs(pv - 1.0) <= 0.3);
}

TEST_CASE("noise-free sgld is gradient descent") {
  SgldCfg cfg;
  cfg.step_size = 1e-4;
  cfg.steps = 2000;
  cfg.burn_in_frac = 0.0;
  cfg.thin = 1;
  cfg.inject_noise = false;
  Rng rng(2, "sgld-gd");
  const auto energy = sparse_energy_fn(0.1, 1.0);
  const Tensor s = sgld_sample(energy, cfg, 4, rng);
  double prev = std::numeric_limits<double>::infinity();
  Tensor g;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const double e = energy(s.row_copy(i), g);
    CHECK(e <= prev);
    prev = e;
  }
}

// The stationary law exp(-E) carries about one unit of L1 energy per dimension,
// so the init box must be wide relative to 1/l1 for the comparison to bite.
TEST_CASE("sgld lowers the sparse energy below a wide initialization") {
  const auto energy = sparse_energy_fn(0.4, 1.0);
  SgldCfg cfg;
  cfg.init = SgldInit::uniform;
  cfg.init_box = 10.0;
  cfg.steps = 20000;
  Rng rng(3, "sgld-energy");
  Tensor g;
  double init_energy = 0.0;
  Rng init(4, "init-energy");
  for (int i = 0; i < 2000; ++i) {
    Tensor z(1, 16);
    for (auto& v : z.data()) v = init.uniform(-cfg.init_box, cfg.init_box);
    init_energy += energy(z, g) / 2000.0;
  }
  const Tensor s = sgld_sample(energy, cfg, 16, rng);
  double sample_energy = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i) sample_energy += energy(s.row_copy(i), g) / static_cast<double>(s.rows());
  CHECK(sample_energy < init_energy);
}

TEST_CASE("sgld determinism, divergence and validation") {
  SgldCfg cfg;
  cfg.steps = 500;
  Rng a(5, "det"), b(5, "det");
  const auto e = quadratic_energy_fn();
  CHECK(sgld_sample(e, cfg, 3, a) == sgld_sample(e, cfg, 3, b));
  const Rng base(6, "chains");
  CHECK(sgld_chains(e, cfg, 3, 4, base) == sgld_chains(e, cfg, 3, 4, base));

  EnergyFn repel = [](const Tensor& z, Tensor& g) {
    g = z;
    for (auto& v : g.data()) v = -v;
    return 0.0;
  };
  SgldCfg wild;
  wild.step_size = 0.5;
  wild.steps = 1000;
  Rng c(7, "wild");
  CHECK_THROWS_AS(sgld_sample(repel, wild, 2, c), NumericError);

  SgldCfg bad;
  bad.step_size = 0.0;
  CHECK_THROWS(bad.validate());
  bad = SgldCfg{};
  bad.burn_in_frac = 1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("prior samples") {
  Rng rng(8, "prior");
  CHECK(prior_sample(5, rng).cols() == 5);
  Rng x(9, "p"), y(9, "p");
  CHECK(prior_sample(3, x) == prior_sample(3, y));
  const int n = 10000;
  std::vector<double> m(4, 0.0), v(4, 0.0);
  std::vector<Tensor> draws;
  for (int i = 0; i < n; ++i) draws.push_back(prior_sample(4, rng));
  for (const auto& d : draws)
    for (std::size_t k = 0; k < 4; ++k) m[k] += d[k] / n;
  for (const auto& d : draws)
    for (std::size_t k = 0; k < 4; ++k) v[k] += (d[k] - m[k]) * (d[k] - m[k]) / n;
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(std::abs(m[k]) <= 0.05);
    CHECK(std::abs(v[k] - 1.0) <= 0.1);
  }
}

TEST_CASE("codebook samples") {
  Rng rng(10, "codes");
  const Tensor one(1, 3, std::vector<double>{1, 2, 3});
  for (int i = 0; i < 5; ++i) CHECK(codebook_sample(one, rng) == one);
  const Tensor book = rng_draw(rng, Dist::normal, 8, 3);
  std::vector<bool> used(8, false);
  used[5] = true;
  for (int i = 0; i < 5; ++i) CHECK(codebook_sample(book, rng, true, &used) == book.row_copy(5));
  std::vector<bool> none(8, false);
  CHECK_THROWS(codebook_sample(book, rng, true, &none));

  const int n = 10000;
  std::vector<int> counts(8, 0);
  for (int i = 0; i < n; ++i) {
    const Tensor z = codebook_sample(book, rng);
    for (std::size_t c = 0; c < 8; ++c)
      if (z == book.row_copy(c)) ++counts[c];
  }
  const double p = 1.0 / 8, sd = std::sqrt(n * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - n * p) <= 3 * sd);
}

TEST_CASE("separability probe") {
  Rng rng(11, "sep");
  const Tensor a = rng_draw(rng, Dist::normal, 400, 4), b = rng_draw(rng, Dist::normal, 400, 4);
  CHECK(std::abs(separability_accuracy(a, b) - 0.5) < 0.1);
  Tensor shifted = b;
  for (std::size_t i = 0; i < shifted.rows(); ++i) shifted(i, 0) += 6.0;
  CHECK(separability_accuracy(a, shifted) > 0.95);
}

TEST_CASE("sample dump round trip") {
  Rng rng(12, "dump");
  const SampleDump d{"{\"seed\":1}", "noisy", rng_draw(rng, Dist::normal, 7, 3)};
  const std::string bytes = encode_samples(d);
  CHECK(decode_samples(bytes) == d);
  std::string bad = bytes;
  bad[0] = 'Z';
  CHECK_THROWS_AS(decode_samples(bad), FormatError);
}
