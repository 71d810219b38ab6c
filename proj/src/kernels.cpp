#include "lamward/kernels.hpp"

#include <omp.h>

#include <cstdlib>
#include <exception>
#include <string>

#include "lamward/error.hpp"

namespace lamward::kernels {
namespace {

int g_threads = [] {
  if (const char* env = std::getenv("LAMWARD_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
}();

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 15;

void check_nn(const Tensor& a, const Tensor& b, Tensor& out) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimension mismatch " + shape_str(a) + " * " + shape_str(b));
  if (out.rows() != a.rows() || out.cols() != b.cols()) out = Tensor(a.rows(), b.cols());
}

void check_nt(const Tensor& a, const Tensor& b, Tensor& out) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: inner dimension mismatch " + shape_str(a) + " * " + shape_str(b) + "^T");
  if (out.rows() != a.rows() || out.cols() != b.rows()) out = Tensor(a.rows(), b.rows());
}

void check_tn(const Tensor& a, const Tensor& b, Tensor& out) {
  if (a.rows() != b.rows())
    throw ShapeError("matmul_tn: inner dimension mismatch " + shape_str(a) + "^T * " + shape_str(b));
  if (out.rows() != a.cols() || out.cols() != b.cols()) out = Tensor(a.cols(), b.cols());
}

inline void nn_row(const Tensor& a, const Tensor& b, Tensor& out, std::size_t i) {
  const std::size_t k_dim = a.cols(), m_dim = b.cols();
  double* o = out.row(i).data();
  for (std::size_t j = 0; j < m_dim; ++j) o[j] = 0.0;
  const double* ar = a.row(i).data();
  for (std::size_t k = 0; k < k_dim; ++k) {
    const double av = ar[k];
    const double* br = b.row(k).data();
    for (std::size_t j = 0; j < m_dim; ++j) o[j] += av * br[j];
  }
}

inline void nt_row(const Tensor& a, const Tensor& b, Tensor& out, std::size_t i) {
  const std::size_t k_dim = a.cols();
  const double* ar = a.row(i).data();
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const double* br = b.row(j).data();
    double s = 0.0;
    for (std::size_t k = 0; k < k_dim; ++k) s += ar[k] * br[k];
    out(i, j) = s;
  }
}

inline void tn_row(const Tensor& a, const Tensor& b, Tensor& out, std::size_t k) {
  const std::size_t m_dim = b.cols();
  double* o = out.row(k).data();
  for (std::size_t j = 0; j < m_dim; ++j) o[j] = 0.0;
  for (std::size_t n = 0; n < a.rows(); ++n) {
    const double av = a(n, k);
    if (av == 0.0) continue;
    const double* br = b.row(n).data();
    for (std::size_t j = 0; j < m_dim; ++j) o[j] += av * br[j];
  }
}

}  // namespace

int max_threads() { return g_threads; }
void set_max_threads(int n) { g_threads = n > 0 ? n : 1; }

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
  check_nn(a, b, out);
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
  const bool par = a.rows() * a.cols() * b.cols() >= kParallelWork && g_threads > 1;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (par)
  for (std::ptrdiff_t i = 0; i < rows; ++i) nn_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out) {
  check_nt(a, b, out);
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
  const bool par = a.rows() * a.cols() * b.rows() >= kParallelWork && g_threads > 1;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (par)
  for (std::ptrdiff_t i = 0; i < rows; ++i) nt_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out) {
  check_tn(a, b, out);
  const auto rows = static_cast<std::ptrdiff_t>(a.cols());
  const bool par = a.rows() * a.cols() * b.cols() >= kParallelWork && g_threads > 1;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (par)
  for (std::ptrdiff_t k = 0; k < rows; ++k) tn_row(a, b, out, static_cast<std::size_t>(k));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor out;
  matmul(a, b, out);
  return out;
}

namespace serial {

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
  check_nn(a, b, out);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) = 0.0;
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
  }
}

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out) {
  check_nt(a, b, out);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
}

void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out) {
  check_tn(a, b, out);
  out.fill(0.0);
  for (std::size_t k = 0; k < a.cols(); ++k)
    for (std::size_t n = 0; n < a.rows(); ++n) {
      if (a(n, k) == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(k, j) += a(n, k) * b(n, j);
    }
}

}  // namespace serial

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const auto count = static_cast<std::ptrdiff_t>(n);
  std::exception_ptr first;
#pragma omp parallel for schedule(dynamic, 1) num_threads(g_threads) if (g_threads > 1 && n > 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(lamward_parallel_for_error)
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace lamward::kernels
