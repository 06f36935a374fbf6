// Single-core matmul throughput probe. The numbers from this binary sized
// the default batch and step counts of the training presets.

#include <chrono>
#include <cstdio>
#include <vector>

#include "zskd/ops.hpp"
#include "zskd/rng.hpp"
#include "zskd/tensor.hpp"

using namespace zskd;

namespace {

double bench_kernel(int64_t m, int64_t k, int64_t n, int reps) {
  RngState rng(1);
  Tensor a = Tensor::gaussian({m, k}, 1.0, rng);
  Tensor b = Tensor::gaussian({k, n}, 1.0, rng);
  std::vector<double> c(static_cast<size_t>(m * n), 0.0);
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) {
    detail::mm_nn(a.data(), b.data(), c.data(), m, k, n);
  }
  auto t1 = std::chrono::steady_clock::now();
  double sec = std::chrono::duration<double>(t1 - t0).count();
  double flops = 2.0 * static_cast<double>(m * k * n) * reps;
  return flops / sec / 1e9;
}

}  // namespace

int main() {
  struct Case {
    int64_t m, k, n;
    int reps;
  };
  std::vector<Case> cases = {
      {64, 128, 128, 400},  {256, 128, 128, 100},  {512, 128, 512, 40},
      {1024, 32, 32, 400},  {256, 256, 256, 60},   {1024, 128, 128, 40},
  };
  std::printf("%8s %8s %8s %10s\n", "m", "k", "n", "GFLOP/s");
  for (const auto& c : cases) {
    double gflops = bench_kernel(c.m, c.k, c.n, c.reps);
    std::printf("%8lld %8lld %8lld %10.2f\n", static_cast<long long>(c.m),
                static_cast<long long>(c.k), static_cast<long long>(c.n),
                gflops);
  }
  return 0;
}
