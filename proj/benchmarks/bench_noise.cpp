#include <benchmark/benchmark.h>

#include <vector>

#include "extmil/inverse_normal.hpp"
#include "extmil/noise.hpp"
#include "extmil/philox.hpp"
#include "extmil/sobol.hpp"

using namespace extmil;

namespace {

void BM_Philox(benchmark::State& state) {
  Philox4x32::Counter c{0, 0, 0, 0};
  const Philox4x32::Key k{1, 2};
  for (auto _ : state) {
    benchmark::DoNotOptimize(Philox4x32::generate(c, k));
    ++c[0];
  }
}

void BM_InverseNormal(benchmark::State& state) {
  double u = 0.0;
  for (auto _ : state) {
    u += 0x1.0p-20;
    if (u >= 1.0) u = 0x1.0p-20;
    benchmark::DoNotOptimize(inverse_normal_cdf(u));
  }
}

void BM_SobolPoint(benchmark::State& state) {
  const auto dims = static_cast<std::size_t>(state.range(0));
  const SobolSequence sobol(dims);
  std::vector<std::uint32_t> out(dims);
  std::uint64_t index = 1;
  for (auto _ : state) {
    sobol.point(index++, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Normals(benchmark::State& state, NoiseKind kind) {
  const auto dims = static_cast<std::size_t>(state.range(0));
  const auto source = kind == NoiseKind::PseudoRandom ? NoiseSource::pseudo_random(1, dims, 0)
                                                      : NoiseSource::randomized_sobol(1, dims, 0);
  std::vector<double> out(dims);
  std::uint64_t path = 0;
  for (auto _ : state) {
    source.standard_normals(path++, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Philox);
BENCHMARK(BM_InverseNormal);
BENCHMARK(BM_SobolPoint)->Arg(32)->Arg(1024);
BENCHMARK_CAPTURE(BM_Normals, mc, NoiseKind::PseudoRandom)->Arg(32)->Arg(512);
BENCHMARK_CAPTURE(BM_Normals, qmc, NoiseKind::RandomizedSobol)->Arg(32)->Arg(512);
