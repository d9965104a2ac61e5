#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "klab/funcspace.hpp"
#include "klab/kernels.hpp"

namespace {

struct BernsteinInput {
  std::vector<double> f;
  std::vector<double> out;
  klab::Grid grid = klab::Grid::unit();
  std::size_t rows = 5;
  std::size_t knots = 0;
};

BernsteinInput bernstein_input(int n) {
  BernsteinInput in;
  in.knots = static_cast<std::size_t>(n) + 1;
  in.f.resize(in.rows * in.knots);
  for (std::size_t r = 0; r < in.rows; ++r)
    for (std::size_t k = 0; k < in.knots; ++k)
      in.f[r * in.knots + k] = std::pow(static_cast<double>(k) / n, static_cast<double>(r));
  in.out.resize(in.rows * in.grid.size());
  return in;
}

template <klab::Execution exec>
void BM_Bernstein(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto in = bernstein_input(n);
  for (auto _ : state) {
    klab::kernels::bernstein(exec, n, in.grid.nodes(), {in.f, in.rows, in.knots},
                             {in.out, in.rows, in.grid.size()});
    benchmark::DoNotOptimize(in.out.data());
  }
}

template <klab::Execution exec>
void BM_Fejer(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto kernel = klab::kernels::fejer_kernel(99, m);
  const std::size_t rows = 3;
  std::vector<double> f(rows * m);
  for (std::size_t r = 0; r < rows; ++r)
    for (int i = 0; i < m; ++i) f[r * m + i] = std::cos((r + 1.0) * klab::two_pi * i / m);
  std::vector<double> out(f.size());
  for (auto _ : state) {
    klab::kernels::fejer(exec, kernel, {f, rows, static_cast<std::size_t>(m)},
                         {out, rows, static_cast<std::size_t>(m)});
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_Bernstein<klab::Execution::serial>)->Arg(100)->Arg(1000)->Arg(10000);
BENCHMARK(BM_Bernstein<klab::Execution::parallel>)->Arg(100)->Arg(1000)->Arg(10000);
BENCHMARK(BM_Fejer<klab::Execution::serial>)->Arg(256)->Arg(1024);
BENCHMARK(BM_Fejer<klab::Execution::parallel>)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
