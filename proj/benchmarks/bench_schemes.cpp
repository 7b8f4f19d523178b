#include <benchmark/benchmark.h>

#include <vector>

#include "extmil/calculus.hpp"
#include "extmil/presets.hpp"
#include "extmil/schemes.hpp"

using namespace extmil;

namespace {

void BM_Advance(benchmark::State& state, const char* id, SchemeKind scheme) {
  const auto model = preset(id);
  Stepper stepper(model.model, scheme);
  std::vector<double> dB(model.model.noise_dim(), 0.05);
  auto x = model.x0;
  for (auto _ : state) {
    x = model.x0;
    stepper.advance(x, 1.0 / 16.0, dB);
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_LocalExpansion(benchmark::State& state) {
  const auto model = preset("heston-asian");
  LocalExpansion local(model.model);
  for (auto _ : state) {
    local.evaluate(model.x0, ExpansionDepth::Full);
    benchmark::DoNotOptimize(local.l_sigma(1, 2).data());
  }
}

void BM_Path(benchmark::State& state, SchemeKind scheme) {
  const auto model = preset("heston-asian");
  const auto steps = static_cast<std::size_t>(state.range(0));
  const auto noise = NoiseSource::pseudo_random(1, steps * model.model.noise_dim());
  const SimConfig cfg{model.horizon, steps, model.x0, scheme};
  std::uint64_t path = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_terminal(model.model, cfg, noise, path++).state);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Advance, bs_em, "bs-asian", SchemeKind::EulerMaruyama);
BENCHMARK_CAPTURE(BM_Advance, bs_tmilstein, "bs-asian", SchemeKind::TruncatedMilstein);
BENCHMARK_CAPTURE(BM_Advance, bs_extended, "bs-asian", SchemeKind::ExtendedMilstein);
BENCHMARK_CAPTURE(BM_Advance, heston_em, "heston-asian", SchemeKind::EulerMaruyama);
BENCHMARK_CAPTURE(BM_Advance, heston_tmilstein, "heston-asian", SchemeKind::TruncatedMilstein);
BENCHMARK_CAPTURE(BM_Advance, heston_extended, "heston-asian", SchemeKind::ExtendedMilstein);
BENCHMARK(BM_LocalExpansion);
BENCHMARK_CAPTURE(BM_Path, em, SchemeKind::EulerMaruyama)->Arg(16)->Arg(256);
BENCHMARK_CAPTURE(BM_Path, extended, SchemeKind::ExtendedMilstein)->Arg(16)->Arg(256);
BENCHMARK_MAIN();
