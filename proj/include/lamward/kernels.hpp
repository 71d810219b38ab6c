#pragma once

#include <cstddef>
#include <functional>

#include "lamward/tensor.hpp"

// Dense matrix kernels. The default entry points are OpenMP-parallel over output
// rows; kernels::serial holds the reference loops they are tested against. Both
// accumulate every output element in the same order, so results are bit-identical
// for any thread count.
namespace lamward::kernels {

/// out = a * b
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
/// out = a * b^T
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out);
/// out = a^T * b
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out);

Tensor matmul(const Tensor& a, const Tensor& b);

namespace serial {
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out);
}  // namespace serial

/// Thread cap: LAMWARD_THREADS if set, else the OpenMP default.
int max_threads();
void set_max_threads(int n);

/// Runs fn(i) for i in [0, n) across threads. Callers write to disjoint slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lamward::kernels
