#include "extmil/epsilon_study.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "extmil/errors.hpp"

namespace extmil {

GaussianLaw small_diffusion_law(const PresetModel& model) {
  require(model.id == "small-diffusion", "small_diffusion_law: needs the small-diffusion preset");
  const auto& p = model.parameters;
  const double t = p.at("T"), eps = p.at("eps");
  const double decay = -std::expm1(-t);
  const double variance = eps * eps * (t - 2.0 * decay - 0.5 * std::expm1(-2.0 * t));
  return {p.at("S0") + p.at("R0") * decay, std::sqrt(std::max(variance, 0.0))};
}

double small_diffusion_price(const PresetModel& model, const Payoff& payoff) {
  const auto law = small_diffusion_law(model);
  // A_T / T with A = X_S.
  const double mean = law.mean / payoff.horizon, sd = law.std_dev / payoff.horizon;
  const double k = payoff.strike;
  if (sd == 0.0) return payoff({std::array{0.0, mean * payoff.horizon}.data(), 2});
  const double z = (mean - k) / sd;
  const double tail = 0.5 * std::erfc(-z / std::numbers::sqrt2);  // P(A_T/T >= K)
  if (payoff.kind == PayoffKind::AsianDigital) return payoff.scale * tail;
  const double density = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return payoff.scale * ((mean - k) * tail + sd * density);
}

EpsilonStudyResult epsilon_study(const EpsilonStudyConfig& config, const SamplingPlan& plan) {
  require(!config.eps_values.empty(), "epsilon_study: at least one eps value is required");
  require(!config.z_values.empty(), "epsilon_study: at least one strike offset is required");
  require(config.steps > 0, "epsilon_study: steps must be positive");
  require(config.degenerate_scale > 0.0, "epsilon_study: degenerate_scale must be positive");
  for (double eps : config.eps_values) {
    require(eps >= 0.0 && eps < 1.0, "epsilon_study: eps must lie in [0, 1)");
  }
  const SchemeKind schemes[] = {SchemeKind::EulerMaruyama, SchemeKind::TruncatedMilstein,
                                SchemeKind::ExtendedMilstein};
  const std::size_t steps[] = {config.steps};

  EpsilonStudyResult result;
  for (double eps : config.eps_values) {
    auto overrides = config.overrides;
    overrides["eps"] = eps;
    auto model = preset("small-diffusion", overrides);
    model.payoff_kind = config.payoff;
    const auto law = small_diffusion_law(model);
    const double mean = law.mean / model.horizon;
    const double scale = law.std_dev > 0.0 ? law.std_dev / model.horizon : config.degenerate_scale;

    std::vector<double> strikes;
    BenchmarkTable exact;
    exact.key = "exact";
    for (double z : config.z_values) {
      const double k = mean + z * scale;
      require(k > 0.0, "epsilon_study: strike grid reaches a non-positive strike");
      strikes.push_back(k);
      exact.points.push_back({k, small_diffusion_price(model, model.payoff(k)), 0.0});
    }
    const auto sweep = strike_sweep(model, schemes, steps, strikes, plan, exact);
    for (const auto& row : sweep.sup) result.rows.push_back({eps, row});
    for (const auto& row : sweep.rows) {
      result.sweep_rows.push_back(row);
      result.sweep_eps.push_back(eps);
    }

    const auto& em = sweep.sup_for(SchemeKind::EulerMaruyama, config.steps);
    const auto& ext = sweep.sup_for(SchemeKind::ExtendedMilstein, config.steps);
    EpsilonRatio ratio;
    ratio.eps = eps;
    const double a = ext.sup_abs_error, b = em.sup_abs_error;
    if (b > 0.0) {
      ratio.ratio = a / b;
      ratio.std_error = std::hypot(ext.combined_std_error() / b, a * em.combined_std_error() / (b * b));
    } else {
      ratio.ratio = a > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
      ratio.std_error = 0.0;
    }
    result.ratios.push_back(ratio);
  }
  return result;
}

CsvTable epsilon_rows_to_csv(const EpsilonStudyResult& result) {
  CsvTable table;
  table.header = {"eps", "scheme", "n", "M", "sup_abs_error", "argmax_K", "stderr"};
  for (const auto& row : result.rows) {
    table.rows.push_back({format_double(row.eps), to_string(row.sup.scheme), std::to_string(row.sup.n),
                          std::to_string(row.sup.paths), format_double(row.sup.sup_abs_error),
                          format_double(row.sup.argmax_strike), format_double(row.sup.std_error)});
  }
  return table;
}

CsvTable epsilon_ratios_to_csv(const EpsilonStudyResult& result) {
  CsvTable table;
  table.header = {"eps", "ratio_extended_em", "stderr"};
  for (const auto& r : result.ratios) {
    table.rows.push_back({format_double(r.eps), format_double(r.ratio), format_double(r.std_error)});
  }
  return table;
}

}  // namespace extmil
