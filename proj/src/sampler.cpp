#include "lamward/sampler.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lamward/autodiff.hpp"
#include "lamward/binio.hpp"
#include "lamward/error.hpp"
#include "lamward/kernels.hpp"
#include "lamward/lam.hpp"

namespace lamward {

EnergyFn sparse_energy_fn(double l1, double l2) {
  return [l1, l2](const Tensor& z, Tensor& grad_out) {
    ParamSet p;
    p.add("z", z);
    Tape t;
    Var e = sparse_energy(t.param(p, 0), l1, l2);
    auto g = grad(e, p);
    grad_out = std::move(g[0]);
    return e.value().item();
  };
}

EnergyFn quadratic_energy_fn() {
  return [](const Tensor& z, Tensor& grad_out) {
    grad_out = z;
    double e = 0.0;
    for (double v : z.data()) e += 0.5 * v * v;
    return e;
  };
}

void SgldCfg::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("SgldCfg: step size must be positive");
  if (thin == 0) throw std::invalid_argument("SgldCfg: thinning stride must be positive");
  if (!(burn_in_frac >= 0.0 && burn_in_frac < 1.0) || steps <= burn_in())
    throw std::invalid_argument("SgldCfg: steps must exceed burn-in");
}

std::size_t SgldCfg::burn_in() const {
  return static_cast<std::size_t>(burn_in_frac * static_cast<double>(steps));
}

namespace {

Tensor initial_state(const SgldCfg& cfg, std::size_t dim, Rng& rng) {
  if (!cfg.start.empty()) {
    if (cfg.start.size() != dim) throw ShapeError("sgld: start point has wrong dimension");
    return Tensor(1, dim, cfg.start);
  }
  Tensor z(1, dim);
  for (auto& v : z.data()) v = cfg.init == SgldInit::normal ? rng.normal() : rng.uniform(-cfg.init_box, cfg.init_box);
  return z;
}

// Runs the chain; calls keep(k, z) after every update k = 1..steps.
template <class Keep>
void run_chain(const EnergyFn& energy, const SgldCfg& cfg, std::size_t dim, Rng& rng, Keep&& keep) {
  cfg.validate();
  Tensor z = initial_state(cfg, dim, rng);
  Tensor g;
  const double half = 0.5 * cfg.step_size;
  const double noise_sd = std::sqrt(cfg.step_size);
  for (std::size_t k = 1; k <= cfg.steps; ++k) {
    energy(z, g);
    for (std::size_t j = 0; j < dim; ++j) {
      z[j] -= half * g[j];
      if (cfg.inject_noise) z[j] += noise_sd * rng.normal();
      if (!(std::abs(z[j]) <= cfg.divergence_bound)) {
        std::ostringstream os;
        os << "sgld diverged at step " << k << ": |z_" << j << "| = " << std::abs(z[j]) << " exceeds bound "
           << cfg.divergence_bound;
        throw NumericError(os.str());
      }
    }
    keep(k, z);
  }
}

}  // namespace

Tensor sgld_sample(const EnergyFn& energy, const SgldCfg& cfg, std::size_t dim, Rng& rng) {
  std::vector<Tensor> kept;
  const std::size_t burn = cfg.burn_in();
  run_chain(energy, cfg, dim, rng, [&](std::size_t k, const Tensor& z) {
    if (k > burn && (k - burn) % cfg.thin == 0) kept.push_back(z);
  });
  return vstack(kept);
}

Tensor sgld_chains(const EnergyFn& energy, const SgldCfg& cfg, std::size_t dim, std::size_t count, const Rng& rng) {
  Tensor out(count, dim);
  kernels::parallel_for(count, [&](std::size_t i) {
    Rng r = rng.child(i);
    Tensor last;
    run_chain(energy, cfg, dim, r, [&](std::size_t k, const Tensor& z) {
      if (k == cfg.steps) last = z;
    });
    std::copy(last.data().begin(), last.data().end(), out.row(i).begin());
  });
  return out;
}

Tensor prior_sample(std::size_t dim, Rng& rng) { return rng_draw(rng, Dist::normal, 1, dim); }

Tensor codebook_sample(const Tensor& codebook, Rng& rng, bool used_only, const std::vector<bool>* used) {
  if (codebook.rows() == 0) throw std::invalid_argument("codebook_sample: empty codebook");
  std::vector<std::size_t> pool;
  for (std::size_t c = 0; c < codebook.rows(); ++c) {
    if (used_only) {
      if (!used || used->size() != codebook.rows()) throw std::invalid_argument("codebook_sample: need a usage mask");
      if (!(*used)[c]) continue;
    }
    pool.push_back(c);
  }
  if (pool.empty()) throw std::invalid_argument("codebook_sample: no used codes to sample from");
  return codebook.row_copy(pool[rng.below(pool.size())]);
}

double separability_accuracy(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols() || a.rows() < 2 || b.rows() < 2) throw ShapeError("separability: bad sample sets");
  const std::size_t D = a.cols();
  std::vector<const Tensor*> sets{&a, &b};
  std::size_t n_train = 0, n_test = 0;
  for (const auto* s : sets) {
    n_train += (s->rows() + 1) / 2;
    n_test += s->rows() / 2;
  }
  Eigen::MatrixXd X(n_train, D + 1);
  Eigen::VectorXd y(n_train);
  std::size_t r = 0;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < sets[k]->rows(); i += 2, ++r) {
      for (std::size_t j = 0; j < D; ++j) X(r, j) = (*sets[k])(i, j);
      X(r, D) = 1.0;
      y(r) = k == 0 ? 1.0 : -1.0;
    }
  const Eigen::MatrixXd gram = X.transpose() * X + 1e-6 * Eigen::MatrixXd::Identity(D + 1, D + 1);
  const Eigen::VectorXd w = gram.ldlt().solve(X.transpose() * y);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 1; i < sets[k]->rows(); i += 2) {
      double s = w(D);
      for (std::size_t j = 0; j < D; ++j) s += w(j) * (*sets[k])(i, j);
      if ((s >= 0.0) == (k == 0)) ++correct;
    }
  return static_cast<double>(correct) / static_cast<double>(n_test);
}

std::string encode_samples(const SampleDump& d) {
  BinaryWriter w;
  w.bytes({kSampleMagic, sizeof kSampleMagic});
  w.u32(kSampleVersion);
  w.str(d.provenance);
  w.str(d.family);
  w.tensor(d.samples);
  return w.buffer();
}

SampleDump decode_samples(std::string data) {
  BinaryReader r(std::move(data));
  if (r.bytes(sizeof kSampleMagic) != std::string_view(kSampleMagic, sizeof kSampleMagic))
    throw FormatError("sample dump: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kSampleVersion) throw FormatError("sample dump: unsupported version " + std::to_string(version));
  SampleDump d;
  d.provenance = r.str();
  d.family = r.str();
  d.samples = r.tensor();
  if (!r.at_end()) throw FormatError("sample dump: trailing bytes");
  return d;
}

}  // namespace lamward
