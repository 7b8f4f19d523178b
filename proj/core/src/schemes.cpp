#include "extmil/schemes.hpp"

#include <bit>
#include <cmath>

#include "extmil/errors.hpp"

namespace extmil {

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::EulerMaruyama:
      return "em";
    case SchemeKind::TruncatedMilstein:
      return "tmilstein";
    case SchemeKind::ExtendedMilstein:
      return "extended";
  }
  return "unknown";
}

std::optional<SchemeKind> parse_scheme(std::string_view name) {
  if (name == "em") return SchemeKind::EulerMaruyama;
  if (name == "tmilstein") return SchemeKind::TruncatedMilstein;
  if (name == "extended") return SchemeKind::ExtendedMilstein;
  return std::nullopt;
}

Stepper::Stepper(const SdeModel& model, SchemeKind scheme)
    : model_(&model), scheme_(scheme), local_(model) {}

void Stepper::advance(std::span<double> x, double h, std::span<const double> dB) {
  const std::size_t n = model_->state_dim();
  const std::size_t d = model_->noise_dim();
  switch (scheme_) {
    case SchemeKind::EulerMaruyama:
      local_.evaluate(x, ExpansionDepth::Fields);
      break;
    case SchemeKind::TruncatedMilstein:
      local_.evaluate(x, ExpansionDepth::DiffusionOperators);
      break;
    case SchemeKind::ExtendedMilstein:
      local_.evaluate(x, ExpansionDepth::Full);
      break;
  }

  // Increment vector with dB^0 = h; index j in 0..d.
  auto increment = [&](std::size_t j) { return j == 0 ? h : dB[j - 1]; };

  // Euler part, shared by all schemes.
  for (std::size_t j = 0; j <= d; ++j) {
    const auto field = local_.field(j);
    const double w = increment(j);
    for (std::size_t i = 0; i < n; ++i) x[i] += field[i] * w;
  }

  if (scheme_ == SchemeKind::TruncatedMilstein) {
    for (std::size_t j1 = 1; j1 <= d; ++j1) {
      for (std::size_t j2 = 1; j2 <= d; ++j2) {
        const double w = 0.5 * (dB[j1 - 1] * dB[j2 - 1] - (j1 == j2 ? h : 0.0));
        const auto g = local_.l_sigma(j2, j1);  // g_{j1 j2}
        for (std::size_t i = 0; i < n; ++i) x[i] += g[i] * w;
      }
    }
  } else if (scheme_ == SchemeKind::ExtendedMilstein) {
    for (std::size_t j1 = 0; j1 <= d; ++j1) {
      for (std::size_t j2 = 0; j2 <= d; ++j2) {
        const double w = 0.5 * (increment(j1) * increment(j2) - (j1 == j2 && j1 != 0 ? h : 0.0));
        const auto term = local_.l_sigma(j1, j2);
        for (std::size_t i = 0; i < n; ++i) x[i] += term[i] * w;
      }
    }
  }
}

namespace {

StateVector step_checked(const SdeModel& model, SchemeKind scheme, const StepInput& in) {
  model.check_state(in.x);
  require(in.h > 0.0, "step: h must be positive");
  require(in.dB.size() == model.noise_dim(), "step: dB length must equal the noise dimension");
  Stepper stepper(model, scheme);
  StateVector x = in.x;
  stepper.advance(x, in.h, in.dB);
  return x;
}

}  // namespace

StateVector step_em(const SdeModel& model, const StepInput& in) {
  return step_checked(model, SchemeKind::EulerMaruyama, in);
}

StateVector step_truncated_milstein(const SdeModel& model, const StepInput& in) {
  return step_checked(model, SchemeKind::TruncatedMilstein, in);
}

StateVector step_extended_milstein(const SdeModel& model, const StepInput& in) {
  return step_checked(model, SchemeKind::ExtendedMilstein, in);
}

StateVector step(const SdeModel& model, SchemeKind scheme, const StepInput& in) {
  return step_checked(model, scheme, in);
}

void NoiseAudit::record(double increment, std::uint64_t position) {
  std::uint64_t z = std::bit_cast<std::uint64_t>(increment) ^ (position * 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  checksum += z ^ (z >> 31);
  ++increments;
}

TerminalState simulate_with_normals(Stepper& stepper, const SdeModel& model, const SimConfig& cfg,
                                    std::span<const double> standard_normals, std::span<double> dB_buffer,
                                    NoiseAudit* audit) {
  const std::size_t d = model.noise_dim();
  const double h = cfg.step_size();
  const double root_h = std::sqrt(h);
  const auto guard = model.nonnegative_coordinate();

  TerminalState out;
  out.state = cfg.x0;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    for (std::size_t j = 0; j < d; ++j) dB_buffer[j] = root_h * standard_normals[k * d + j];
    if (audit) {
      for (std::size_t j = 0; j < d; ++j) audit->record(dB_buffer[j], k * d + j);
    }
    stepper.advance(out.state, h, dB_buffer.first(d));
    bool finite = true;
    for (double v : out.state) finite = finite && std::isfinite(v);
    if (!finite) {
      out.finite = false;
      return out;
    }
    if (guard && out.state[*guard] < 0.0) ++out.negative_steps;
  }
  return out;
}

TerminalState simulate_terminal(const SdeModel& model, const SimConfig& cfg, const NoiseSource& noise,
                                std::uint64_t path_index) {
  model.check_state(cfg.x0);
  require(cfg.steps >= 1, "simulate_terminal: need at least one step");
  require(cfg.horizon > 0.0, "simulate_terminal: horizon must be positive");
  const std::size_t needed = cfg.steps * model.noise_dim();
  if (needed > noise.dims_per_path()) {
    throw RuntimeFailure("noise budget exhausted: path needs " + std::to_string(needed) +
                         " increments, source provides " + std::to_string(noise.dims_per_path()));
  }
  std::vector<double> normals(needed);
  noise.standard_normals(path_index, normals);
  std::vector<double> dB(model.noise_dim());
  Stepper stepper(model, cfg.scheme);
  return simulate_with_normals(stepper, model, cfg, normals, dB);
}

}  // namespace extmil
