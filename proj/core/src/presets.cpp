#include "extmil/presets.hpp"

#include <cmath>

#include "extmil/csv.hpp"
#include "extmil/errors.hpp"
#include "extmil/models.hpp"

namespace extmil {

namespace {

ParameterSet resolve(std::string_view id, ParameterSet defaults, const ParameterSet& overrides) {
  for (const auto& [name, value] : overrides) {
    auto it = defaults.find(name);
    if (it == defaults.end()) {
      std::string known;
      for (const auto& [k, v] : defaults) known += (known.empty() ? "" : ", ") + k;
      throw ContractViolation("preset '" + std::string(id) + "' has no parameter '" + name +
                              "' (known: " + known + ")");
    }
    if (!std::isfinite(value)) {
      throw ContractViolation("preset parameter '" + name + "' must be finite");
    }
    it->second = value;
  }
  return defaults;
}

}  // namespace

std::string PresetModel::fingerprint() const {
  std::string out;
  for (const auto& [name, value] : parameters) {
    if (!out.empty()) out += ';';
    out += name + '=' + format_double(value);
  }
  return out;
}

std::vector<std::string> preset_ids() { return {"bs-asian", "gbm", "heston-asian", "small-diffusion"}; }

PresetModel preset(std::string_view id, const ParameterSet& overrides) {
  if (id == "gbm") {
    auto p = resolve(id, {{"r", 0.1}, {"sigma", 0.2}, {"S0", 100.0}, {"T", 1.0}}, overrides);
    require(p["T"] > 0.0, "gbm: T must be positive");
    auto model = make_gbm({p["r"], p["sigma"]});
    return PresetModel{std::string(id), std::move(model), p, {p["S0"]}, p["T"],
                       PayoffKind::AsianCall, std::exp(-p["r"] * p["T"]), 0, "S > 0"};
  }
  if (id == "bs-asian") {
    auto p = resolve(id, {{"r", 0.1}, {"sigma", 0.4}, {"S0", 100.0}, {"A0", 0.0}, {"T", 1.0}}, overrides);
    require(p["T"] > 0.0, "bs-asian: T must be positive");
    auto model = make_bs_asian({p["r"], p["sigma"]});
    return PresetModel{std::string(id), std::move(model), p, {p["S0"], p["A0"]}, p["T"],
                       PayoffKind::AsianCall, std::exp(-p["r"] * p["T"]), 1, "S > 0"};
  }
  if (id == "heston-asian") {
    auto p = resolve(id,
                     {{"alpha", 2.0}, {"theta", 0.09}, {"nu", 0.1}, {"rho", 0.7}, {"S0", 100.0},
                      {"v0", 0.09}, {"A0", 0.0}, {"T", 1.0}, {"Cpn", 100.0}},
                     overrides);
    require(p["T"] > 0.0, "heston-asian: T must be positive");
    require(p["v0"] >= 0.0, "heston-asian: v0 must be nonnegative");
    auto model = make_heston_asian({p["alpha"], p["theta"], p["nu"], p["rho"]});
    return PresetModel{std::string(id), std::move(model), p, {p["S0"], p["v0"], p["A0"]}, p["T"],
                       PayoffKind::AsianDigital, p["Cpn"], 2,
                       "v >= 0; sqrt(v) evaluated as sqrt(max(v, 0)) off the region"};
  }
  if (id == "small-diffusion") {
    auto p = resolve(id, {{"eps", 0.1}, {"R0", 1.0}, {"S0", 0.0}, {"T", 1.0}, {"Cpn", 1.0}}, overrides);
    require(p["T"] > 0.0, "small-diffusion: T must be positive");
    auto model = make_small_diffusion({p["eps"]});
    return PresetModel{std::string(id), std::move(model), p, {p["R0"], p["S0"]}, p["T"],
                       PayoffKind::AsianDigital, p["Cpn"], 1, "all of R^2"};
  }
  std::string known;
  for (const auto& name : preset_ids()) known += (known.empty() ? "" : ", ") + name;
  throw ContractViolation("unknown model '" + std::string(id) + "' (known: " + known + ")");
}

}  // namespace extmil
