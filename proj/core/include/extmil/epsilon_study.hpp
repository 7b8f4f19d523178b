#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "extmil/csv.hpp"
#include "extmil/estimator.hpp"
#include "extmil/payoff.hpp"
#include "extmil/presets.hpp"
#include "extmil/sweep.hpp"

namespace extmil {

/// Law of X_S(T) for the small-diffusion preset, which is Gaussian:
///   mean     = S0 + R0 (1 - e^{-T})
///   variance = eps^2 (T - 2 (1 - e^{-T}) + (1 - e^{-2T}) / 2)
struct GaussianLaw {
  double mean = 0.0;
  double std_dev = 0.0;
};
GaussianLaw small_diffusion_law(const PresetModel& model);

/// Exact price of `payoff` under the preset's terminal law.
double small_diffusion_price(const PresetModel& model, const Payoff& payoff);

struct EpsilonStudyConfig {
  std::vector<double> eps_values{0.4, 0.2, 0.1};
  std::size_t steps = 8;
  PayoffKind payoff = PayoffKind::AsianDigital;
  /// Strikes are mean + z * std_dev of the exact law of A_T / T for z on this
  /// grid; when eps = 0 the scale falls back to `degenerate_scale`.
  std::vector<double> z_values{-2.0, -1.75, -1.5, -1.25, -1.0, -0.75, -0.5, -0.25, 0.0,
                               0.25, 0.5,   0.75,  1.0,  1.25,  1.5,  1.75, 2.0};
  double degenerate_scale = 1e-3;
  ParameterSet overrides;  // applied to the small-diffusion preset besides eps
};

struct EpsilonRow {
  double eps = 0.0;
  SupErrorRow sup;
};

struct EpsilonRatio {
  double eps = 0.0;
  double ratio = 0.0;  // sup error extended / sup error EM
  double std_error = 0.0;
};

struct EpsilonStudyResult {
  std::vector<EpsilonRow> rows;      // ordered by eps as given, then scheme
  std::vector<EpsilonRatio> ratios;  // one per eps
  std::vector<SweepRow> sweep_rows;  // underlying per-strike rows, eps order
  std::vector<double> sweep_eps;     // eps of each entry of sweep_rows
};

/// For each eps runs EM, truncated Milstein and extended Milstein with common
/// random numbers against the exact prices. eps must lie in [0, 1).
EpsilonStudyResult epsilon_study(const EpsilonStudyConfig& config, const SamplingPlan& plan);

CsvTable epsilon_rows_to_csv(const EpsilonStudyResult& result);
CsvTable epsilon_ratios_to_csv(const EpsilonStudyResult& result);

}  // namespace extmil
