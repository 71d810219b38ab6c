#include <benchmark/benchmark.h>

#include "lamward/kernels.hpp"
#include "lamward/rng.hpp"
#include "lamward/tensor.hpp"

using namespace lamward;

namespace {

struct Operands {
  Tensor a, b, out;
  explicit Operands(std::size_t n) {
    Rng rng(1, "bench");
    a = rng_draw(rng, Dist::normal, n, n);
    b = rng_draw(rng, Dist::normal, n, n);
    out = Tensor(n, n);
  }
};

template <void (*Kernel)(const Tensor&, const Tensor&, Tensor&)>
void run(benchmark::State& state) {
  Operands ops(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Kernel(ops.a, ops.b, ops.out);
    benchmark::DoNotOptimize(ops.out.data().data());
  }
  const double n = static_cast<double>(state.range(0));
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
  state.counters["threads"] = kernels::max_threads();
}

}  // namespace

BENCHMARK(run<kernels::matmul>)->Name("matmul/openmp")->RangeMultiplier(2)->Range(32, 512);
BENCHMARK(run<kernels::serial::matmul>)->Name("matmul/serial")->RangeMultiplier(2)->Range(32, 512);
BENCHMARK(run<kernels::matmul_nt>)->Name("matmul_nt/openmp")->RangeMultiplier(2)->Range(32, 512);
BENCHMARK(run<kernels::serial::matmul_nt>)->Name("matmul_nt/serial")->RangeMultiplier(2)->Range(32, 512);
BENCHMARK(run<kernels::matmul_tn>)->Name("matmul_tn/openmp")->RangeMultiplier(2)->Range(32, 512);
BENCHMARK(run<kernels::serial::matmul_tn>)->Name("matmul_tn/serial")->RangeMultiplier(2)->Range(32, 512);

BENCHMARK_MAIN();
