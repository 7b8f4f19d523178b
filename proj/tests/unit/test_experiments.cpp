#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "extmil/benchmark_cache.hpp"
#include "extmil/convergence.hpp"
#include "extmil/csv.hpp"
#include "extmil/epsilon_study.hpp"
#include "extmil/errors.hpp"
#include "extmil/estimator.hpp"
#include "extmil/presets.hpp"
#include "extmil/sweep.hpp"

using namespace extmil;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("extmil-unit-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string to_text(const CsvTable& table) {
  std::ostringstream out;
  write_csv(out, table);
  return out.str();
}

// e^{-rT} (A_T / T - K) for the zero-volatility Asian average S0 (e^{rT} - 1) / (rT).
double zero_vol_call(double k) {
  const double average = 100.0 * std::expm1(0.1) / 0.1;
  return std::exp(-0.1) * (average - k);
}

constexpr SchemeKind kAll[] = {SchemeKind::EulerMaruyama, SchemeKind::TruncatedMilstein,
                               SchemeKind::ExtendedMilstein};

}  // namespace

TEST_CASE("payoffs") {
  Payoff call{PayoffKind::AsianCall, 100.0, 2.0, 0.5, 1};
  const StateVector x{0.0, 230.0};
  CHECK(call(x) == doctest::Approx(0.5 * 15.0));
  call.strike = 120.0;
  CHECK(call(x) == 0.0);
  Payoff digital{PayoffKind::AsianDigital, 115.0, 2.0, 100.0, 1};
  CHECK(digital(x) == 100.0);
  digital.strike = 115.0001;
  CHECK(digital(x) == 0.0);
  CHECK(parse_payoff("asian-call") == PayoffKind::AsianCall);
  CHECK(parse_payoff("asian-digital") == PayoffKind::AsianDigital);
  CHECK_FALSE(parse_payoff("call").has_value());
}

TEST_CASE("preset defaults") {
  const auto bs = preset("bs-asian");
  CHECK(bs.parameters.at("r") == 0.1);
  CHECK(bs.parameters.at("sigma") == 0.4);
  CHECK(bs.x0 == StateVector{100.0, 0.0});
  CHECK(bs.horizon == 1.0);
  CHECK(bs.payoff_kind == PayoffKind::AsianCall);
  CHECK(bs.payoff_scale == doctest::Approx(std::exp(-0.1)));

  const auto h = preset("heston-asian");
  CHECK(h.parameters.at("alpha") == 2.0);
  CHECK(h.parameters.at("theta") == 0.09);
  CHECK(h.parameters.at("nu") == 0.1);
  CHECK(h.parameters.at("rho") == 0.7);
  CHECK(h.x0 == StateVector{100.0, 0.09, 0.0});
  CHECK(h.horizon == 1.0);
  CHECK(h.payoff_kind == PayoffKind::AsianDigital);
  CHECK(h.payoff_scale == 100.0);

  const auto sd = preset("small-diffusion");
  CHECK(sd.x0 == StateVector{1.0, 0.0});
  CHECK(sd.model.diffusion(1, sd.x0) == StateVector{0.1, 0.0});

  CHECK(preset("gbm", {{"sigma", 0.3}}).parameters.at("sigma") == 0.3);
  CHECK(preset("bs-asian").fingerprint() == "A0=0;S0=100;T=1;r=0.1;sigma=0.4");
}

TEST_CASE("preset errors") {
  try {
    preset("heston-asian", {{"nu", 0.7}, {"alpha", 1.0}, {"theta", 0.09}});
    FAIL("expected a Feller violation");
  } catch (const ContractViolation& e) {
    CHECK(std::string(e.what()).find("2*alpha*theta > nu^2") != std::string::npos);
  }
  try {
    preset("vasicek");
    FAIL("expected an unknown-model error");
  } catch (const ContractViolation& e) {
    CHECK(std::string(e.what()).find("heston-asian") != std::string::npos);
  }
  CHECK_THROWS_AS(preset("gbm", {{"kappa", 1.0}}), ContractViolation);
  CHECK_THROWS_AS(preset("small-diffusion", {{"eps", 1.0}}), ContractViolation);
}

TEST_CASE("zero-volatility BS-Asian approaches the ODE limit") {
  const auto model = preset("bs-asian", {{"sigma", 0.0}});
  const auto payoff = model.payoff(100.0);
  SamplingPlan plan{NoiseKind::PseudoRandom, 1, 4, 1, 1};
  const double exact = zero_vol_call(100.0);
  CHECK(exact == doctest::Approx(4.67887).epsilon(1e-5));

  const auto ext = estimate(model.model, {1.0, 256, model.x0, SchemeKind::ExtendedMilstein}, payoff, plan);
  CHECK(std::abs(ext.mean - exact) < 1e-3);
  CHECK(ext.std_error == 0.0);

  // EM (and truncated Milstein, identical here) carries the first-order
  // Riemann-sum bias, about e^{-rT} h S0 (e^{rT} - 1) / 2 = 0.019 at n = 256.
  for (auto s : {SchemeKind::EulerMaruyama, SchemeKind::TruncatedMilstein}) {
    const double e128 = exact - estimate(model.model, {1.0, 128, model.x0, s}, payoff, plan).mean;
    const double e256 = exact - estimate(model.model, {1.0, 256, model.x0, s}, payoff, plan).mean;
    CHECK(e256 > 0.0);
    CHECK(e256 < 0.02);
    CHECK(e128 / e256 == doctest::Approx(2.0).epsilon(0.01));
  }
}

TEST_CASE("estimator edge cases") {
  const auto heston = preset("heston-asian");
  SamplingPlan mc{NoiseKind::PseudoRandom, 3, 1000, 1, 1};
  const auto digital = estimate(heston.model, {1.0, 4, heston.x0, SchemeKind::ExtendedMilstein},
                                Payoff{PayoffKind::AsianDigital, 0.0, 1.0, 100.0, 2}, mc);
  CHECK(digital.mean == 100.0);
  CHECK(digital.std_error == 0.0);
  CHECK(digital.paths_total == 1000);
  CHECK(digital.paths_invalid == 0);

  const auto bs = preset("bs-asian");
  const auto far = estimate(bs.model, {1.0, 4, bs.x0, SchemeKind::EulerMaruyama}, bs.payoff(1e6), mc);
  CHECK(far.mean == 0.0);

  SamplingPlan bad{NoiseKind::RandomizedSobol, 3, 1000, 1, 1};
  CHECK_THROWS_AS(estimate(bs.model, {1.0, 4, bs.x0, SchemeKind::EulerMaruyama}, bs.payoff(100), bad),
                  ContractViolation);
}

TEST_CASE("all-invalid batches fail explicitly") {
  FieldSpec explode{[](std::span<const double> x, std::span<double> out) {
    out[0] = x[0] * x[0];
    out[1] = 0.0;
  }};
  FieldSpec flat{[](std::span<const double>, std::span<double> out) { out[0] = out[1] = 0.0; }};
  const auto model = make_function_model("explode", 2, explode, {flat});
  SamplingPlan mc{NoiseKind::PseudoRandom, 3, 10, 1, 1};
  CHECK_THROWS_AS(estimate(model, {1.0, 4, {1e200, 0.0}, SchemeKind::EulerMaruyama},
                           Payoff{PayoffKind::AsianCall, 1.0, 1.0, 1.0, 1}, mc),
                  RuntimeFailure);
}

TEST_CASE("results are bit-identical across thread counts") {
  const auto heston = preset("heston-asian");
  std::vector<Payoff> payoffs{heston.payoff(90.0), heston.payoff(100.0), heston.payoff(110.0)};
  for (auto kind : {NoiseKind::PseudoRandom, NoiseKind::RandomizedSobol}) {
    SamplingPlan plan{kind, 11, 5000, 3, 1};
    const auto one = run_batch(heston.model, 1.0, 8, heston.x0, kAll, payoffs, plan);
    plan.threads = 4;
    const auto four = run_batch(heston.model, 1.0, 8, heston.x0, kAll, payoffs, plan);
    for (std::size_t s = 0; s < 3; ++s) {
      CHECK(one.audit[s] == four.audit[s]);
      CHECK(one.audit[s] == one.audit[0]);
      for (std::size_t p = 0; p < payoffs.size(); ++p) {
        CHECK(one.estimates[s][p].mean == four.estimates[s][p].mean);
        CHECK(one.estimates[s][p].std_error == four.estimates[s][p].std_error);
      }
    }
  }
}

TEST_CASE("benchmark of the zero-volatility model matches the closed form") {
  const auto model = preset("bs-asian", {{"sigma", 0.0}});
  BenchmarkSettings s{2, 16384, 1, 1};
  const std::vector<double> strikes{90.0, 100.0};
  const auto table = compute_benchmark(model, strikes, s);
  for (double k : strikes) CHECK(std::abs(table.find(k)->value - zero_vol_call(k)) < 1e-3);
}

TEST_CASE("benchmark cache") {
  const auto dir = scratch_dir("cache");
  const auto model = preset("bs-asian");
  BenchmarkSettings s{4000, 16, 77, 1};
  BenchmarkCache cache(dir);
  const std::vector<double> strikes{90.0, 100.0};

  CHECK_THROWS_AS(benchmark(model, strikes, s, &cache, false), RuntimeFailure);
  const auto first = benchmark(model, strikes, s, &cache, true);
  REQUIRE(fs::exists(cache.file_for(first.key)));
  const auto loaded = cache.load(first.key);
  REQUIRE(loaded.has_value());
  CHECK(loaded->seed == 77);
  CHECK(loaded->paths == 4000);
  CHECK(loaded->steps == 16);
  const auto again = benchmark(model, strikes, s, &cache, false);
  for (std::size_t i = 0; i < strikes.size(); ++i) {
    CHECK(again.points[i].value == first.points[i].value);
    CHECK(again.points[i].std_error == first.points[i].std_error);
  }

  // Extending the strike set keeps the old values bit for bit.
  const std::vector<double> more{80.0, 90.0, 100.0};
  const auto wider = benchmark(model, more, s, &cache, true);
  CHECK(wider.find(90.0)->value == first.find(90.0)->value);
  CHECK(wider.find(100.0)->value == first.find(100.0)->value);
  CHECK(wider.find(80.0) != nullptr);

  // Different provenance, different key.
  BenchmarkSettings other = s;
  other.seed = 78;
  CHECK(benchmark_cache_key(model, other) != benchmark_cache_key(model, s));
  CHECK_FALSE(cache.load(benchmark_cache_key(model, other)).has_value());
}

TEST_CASE("strike sweep") {
  const auto model = preset("bs-asian");
  const auto strikes = strike_range(90.0, 110.0, 10.0);
  REQUIRE(strikes.size() == 3);
  const auto bench = compute_benchmark(model, strikes, {4000, 32, 5, 1});
  SamplingPlan plan{NoiseKind::RandomizedSobol, 2, 1000, 4, 1};

  const SchemeKind em[] = {SchemeKind::EulerMaruyama};
  const std::size_t n4[] = {4};
  const double k100[] = {100.0};
  const auto single = strike_sweep(model, em, n4, k100, plan, bench);
  REQUIRE(single.rows.size() == 1);
  const auto& row = single.rows[0];
  CHECK(row.error == row.benchmark - row.estimate);
  CHECK(row.benchmark == bench.find(100.0)->value);
  CHECK(row.paths == 4000);
  REQUIRE(single.sup.size() == 1);
  CHECK(single.sup[0].sup_abs_error == std::abs(row.error));

  const std::size_t ns[] = {2, 4};
  const auto full = strike_sweep(model, kAll, ns, strikes, plan, bench);
  CHECK(full.rows.size() == 18);
  CHECK(full.sup.size() == 6);
  for (std::size_t i = 0; i < full.audit.size(); i += 3) {
    CHECK(full.audit[i] == full.audit[i + 1]);
    CHECK(full.audit[i] == full.audit[i + 2]);
  }
  for (const auto& r : full.rows) CHECK(r.error == r.benchmark - r.estimate);
  for (const auto& s : full.sup) {
    double worst = 0.0;
    for (const auto& r : full.rows) {
      if (r.scheme == s.scheme && r.n == s.n) worst = std::max(worst, std::abs(r.error));
    }
    CHECK(s.sup_abs_error == worst);
    CHECK(s.combined_std_error() == std::hypot(s.std_error, s.benchmark_std_error));
  }

  const double missing[] = {95.0};
  CHECK_THROWS_AS(strike_sweep(model, em, n4, missing, plan, bench), RuntimeFailure);
  CHECK(default_strikes().size() == 20);
  CHECK(default_strikes().back() == 200.0);
  CHECK(strike_range(100.0, 100.0, 10.0) == std::vector<double>{100.0});
}

TEST_CASE("CSV round trip") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(100.0) == "100");
  CHECK_THROWS_AS(parse_double("1.5x"), RuntimeFailure);

  const auto model = preset("heston-asian");
  const auto strikes = strike_range(90.0, 110.0, 10.0);
  const auto bench = compute_benchmark(model, strikes, {2000, 16, 5, 1});
  const std::size_t ns[] = {2, 4};
  const auto result = strike_sweep(model, kAll, ns, strikes, {NoiseKind::RandomizedSobol, 2, 500, 2, 1}, bench);

  const auto text = to_text(sweep_to_csv(result));
  CHECK(text.rfind("scheme,n,K,M,estimate,stderr,benchmark,error\n", 0) == 0);
  CHECK(text.find('\r') == std::string::npos);
  std::istringstream in(text);
  const auto rows = sweep_rows_from_csv(read_csv(in));
  REQUIRE(rows.size() == result.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].estimate == result.rows[i].estimate);
    CHECK(rows[i].error == rows[i].benchmark - rows[i].estimate);
  }
  SweepResult again;
  again.rows = rows;
  CHECK(to_text(sweep_to_csv(again)) == text);

  const auto sup_text = to_text(sup_errors_to_csv(result.sup));
  std::istringstream sup_in(sup_text);
  const auto sup_rows = sup_errors_from_csv(read_csv(sup_in));
  CHECK(to_text(sup_errors_to_csv(sup_rows)) == sup_text);

  const auto dir = scratch_dir("csv");
  write_csv_file((dir / "sub" / "x.csv").string(), sweep_to_csv(result));
  CHECK(to_text(read_csv_file((dir / "sub" / "x.csv").string())) == text);
  CHECK_FALSE(fs::exists(dir / "sub" / "x.csv.tmp"));
}

TEST_CASE("convergence order fits") {
  std::vector<ErrorPoint> first, second;
  for (std::size_t n : {2u, 4u, 8u, 16u}) {
    first.push_back({n, 3.0 / static_cast<double>(n)});
    second.push_back({n, 3.0 / static_cast<double>(n * n)});
  }
  CHECK(convergence_order(first).slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(convergence_order(first).order() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(convergence_order(second).slope == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(convergence_order(first).intercept == doctest::Approx(std::log2(3.0)).epsilon(1e-12));

  auto noisy = first;
  noisy[1].error = -0.01;
  const auto fit = convergence_order(noisy);
  CHECK(fit.points_excluded == 1);
  CHECK(fit.points_used == 3);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(1e-12));

  const std::vector<ErrorPoint> two{{2, 1.0}, {4, 0.5}};
  CHECK_THROWS_AS(convergence_order(two), ContractViolation);
  const std::vector<ErrorPoint> dead{{2, 1.0}, {4, 0.0}, {8, -1.0}};
  CHECK_THROWS_AS(convergence_order(dead), RuntimeFailure);

  std::vector<SupErrorRow> rows;
  for (std::size_t n : {2u, 4u, 8u}) {
    SupErrorRow em{SchemeKind::EulerMaruyama, n, 10, 1.0 / n, 100.0, 0.01, 0.0, 0};
    SupErrorRow ext{SchemeKind::ExtendedMilstein, n, 10, 0.1 / n, 100.0, 0.01, 0.0, 0};
    rows.push_back(em);
    rows.push_back(ext);
  }
  const auto ratios = scheme_ratios(rows, SchemeKind::ExtendedMilstein, SchemeKind::EulerMaruyama);
  REQUIRE(ratios.size() == 3);
  for (const auto& r : ratios) CHECK(r.ratio == doctest::Approx(0.1));
  CHECK(sup_error_series(rows, SchemeKind::EulerMaruyama).size() == 3);
}

TEST_CASE("small-diffusion exact law") {
  const auto model = preset("small-diffusion", {{"eps", 0.3}, {"T", 2.0}});
  const auto law = small_diffusion_law(model);
  CHECK(law.mean == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-14));
  // Variance eps^2 int_0^T (1 - e^{-u})^2 du by Simpson's rule.
  const int m = 2000;
  double integral = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double u = 2.0 * i / m;
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    integral += w * std::pow(1.0 - std::exp(-u), 2);
  }
  integral *= 2.0 / (3.0 * m);
  CHECK(law.std_dev == doctest::Approx(0.3 * std::sqrt(integral)).epsilon(1e-10));

  // Digital and call prices against a quadrature of the Gaussian density.
  for (double k : {0.3, 0.43, 0.6}) {
    double digital = 0.0, call = 0.0;
    const double mu = law.mean / 2.0, sd = law.std_dev / 2.0;
    const int q = 200000;
    const double lo = mu - 12 * sd, step = 24 * sd / q;
    for (int i = 0; i < q; ++i) {
      const double x = lo + (i + 0.5) * step;
      const double dens = std::exp(-0.5 * std::pow((x - mu) / sd, 2)) / (sd * std::sqrt(2 * M_PI));
      if (x >= k) digital += dens * step;
      call += std::max(x - k, 0.0) * dens * step;
    }
    auto digital_model = model;
    digital_model.payoff_kind = PayoffKind::AsianDigital;
    CHECK(small_diffusion_price(digital_model, digital_model.payoff(k)) == doctest::Approx(digital).epsilon(1e-4));
    auto call_model = model;
    call_model.payoff_kind = PayoffKind::AsianCall;
    CHECK(small_diffusion_price(call_model, call_model.payoff(k)) == doctest::Approx(call).epsilon(1e-6));
  }
}

TEST_CASE("epsilon study") {
  EpsilonStudyConfig config;
  config.eps_values = {0.4, 0.0};
  SamplingPlan plan{NoiseKind::RandomizedSobol, 1, 4000, 4, 1};
  const auto result = epsilon_study(config, plan);
  REQUIRE(result.rows.size() == 6);
  REQUIRE(result.ratios.size() == 2);
  CHECK(result.ratios[0].ratio < 0.5);

  // eps = 0: deterministic paths; EM and truncated Milstein coincide.
  const auto& em0 = result.rows[3].sup;
  const auto& tm0 = result.rows[4].sup;
  CHECK(result.rows[3].eps == 0.0);
  CHECK(em0.std_error == 0.0);
  CHECK(em0.sup_abs_error == tm0.sup_abs_error);

  EpsilonStudyConfig bad = config;
  bad.eps_values = {1.0};
  CHECK_THROWS_AS(epsilon_study(bad, plan), ContractViolation);
  CHECK(epsilon_ratios_to_csv(result).rows.size() == 2);
}
