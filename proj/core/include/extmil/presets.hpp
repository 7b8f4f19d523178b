#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "extmil/model.hpp"
#include "extmil/payoff.hpp"

namespace extmil {

using ParameterSet = std::map<std::string, double>;

/// A named model with its default experiment: start point, horizon and the
/// payoff family priced on it.
///
/// | id              | parameters (defaults)                                          | payoff        |
/// |-----------------|----------------------------------------------------------------|---------------|
/// | gbm             | r=0.1 sigma=0.2 S0=100 T=1                                     | call on S_T/T |
/// | bs-asian        | r=0.1 sigma=0.4 S0=100 A0=0 T=1                                | asian-call    |
/// | heston-asian    | alpha=2 theta=0.09 nu=0.1 rho=0.7 S0=100 v0=0.09 A0=0 T=1 Cpn=100 | asian-digital |
/// | small-diffusion | eps=0.1 R0=1 S0=0 T=1 Cpn=1                                     | asian-digital on X_S |
///
/// Call payoffs are discounted by e^{-rT} (r = 0 where the model has no rate).
struct PresetModel {
  std::string id;
  SdeModel model;
  ParameterSet parameters;  // fully resolved, overrides applied
  StateVector x0;
  double horizon = 1.0;
  PayoffKind payoff_kind = PayoffKind::AsianCall;
  double payoff_scale = 1.0;
  std::size_t average_coordinate = 0;
  std::string admissible_region;

  Payoff payoff(double strike) const {
    return Payoff{payoff_kind, strike, horizon, payoff_scale, average_coordinate};
  }

  /// Canonical "name=value;..." rendering of the parameters (shortest
  /// round-trip doubles, sorted by name), used for cache keys and manifests.
  std::string fingerprint() const;
};

std::vector<std::string> preset_ids();

/// Throws ContractViolation for an unknown id, an unknown parameter name or
/// parameters outside the model's admissible set (e.g. the Feller condition).
PresetModel preset(std::string_view id, const ParameterSet& overrides = {});

}  // namespace extmil
