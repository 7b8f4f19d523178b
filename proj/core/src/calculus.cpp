#include "extmil/calculus.hpp"

#include <algorithm>
#include <cmath>

#include "extmil/errors.hpp"

namespace extmil {

LocalExpansion::LocalExpansion(const SdeModel& model)
    : model_(&model),
      n_(model.state_dim()),
      d_(model.noise_dim()),
      fields_((d_ + 1) * n_),
      jacobians_((d_ + 1) * n_ * n_),
      hessian_(n_ * n_ * n_),
      a_(n_ * n_),
      l_sigma_((d_ + 1) * (d_ + 1) * n_) {}

void LocalExpansion::evaluate(std::span<const double> x, ExpansionDepth depth) {
  const auto& coeffs = model_->coefficients();
  for (std::size_t j = 0; j <= d_; ++j) {
    coeffs.field(j, x, std::span<double>(&fields_[j * n_], n_));
  }
  if (depth == ExpansionDepth::Fields) return;

  const std::size_t first = depth == ExpansionDepth::Full ? 0 : 1;
  for (std::size_t j = first; j <= d_; ++j) {
    coeffs.jacobian(j, x, std::span<double>(&jacobians_[j * n_ * n_], n_ * n_));
  }

  // L_{j1} sigma_{j2} = J_{j2} sigma_{j1} for j1 >= 1.
  for (std::size_t j1 = 1; j1 <= d_; ++j1) {
    const double* along = &fields_[j1 * n_];
    for (std::size_t j2 = first; j2 <= d_; ++j2) {
      const double* jac = &jacobians_[j2 * n_ * n_];
      double* out = &l_sigma_[(j1 * (d_ + 1) + j2) * n_];
      for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (std::size_t l = 0; l < n_; ++l) acc += jac[i * n_ + l] * along[l];
        out[i] = acc;
      }
    }
  }
  if (depth != ExpansionDepth::Full) return;

  bool curved = false;
  for (std::size_t j = 0; j <= d_; ++j) curved = curved || !coeffs.affine(j);
  if (curved) {
    std::fill(a_.begin(), a_.end(), 0.0);
    for (std::size_t k = 1; k <= d_; ++k) {
      const double* s = &fields_[k * n_];
      for (std::size_t l = 0; l < n_; ++l) {
        for (std::size_t m = 0; m < n_; ++m) a_[l * n_ + m] += s[l] * s[m];
      }
    }
  }

  // L_0 sigma_{j2} = J_{j2} b + 1/2 a : H_{j2}.
  const double* drift = &fields_[0];
  for (std::size_t j2 = 0; j2 <= d_; ++j2) {
    const bool flat = coeffs.affine(j2);
    if (!flat) coeffs.hessian(j2, x, hessian_);
    const double* jac = &jacobians_[j2 * n_ * n_];
    double* out = &l_sigma_[j2 * n_];
    for (std::size_t i = 0; i < n_; ++i) {
      double first_order = 0.0;
      for (std::size_t l = 0; l < n_; ++l) first_order += jac[i * n_ + l] * drift[l];
      double second_order = 0.0;
      if (!flat) {
        const double* h = &hessian_[i * n_ * n_];
        for (std::size_t k = 0; k < n_ * n_; ++k) second_order += a_[k] * h[k];
      }
      out[i] = first_order + 0.5 * second_order;
    }
  }
}

namespace {

void check_noise_index(const SdeModel& model, std::size_t j, bool allow_drift, const char* what) {
  if ((!allow_drift && j == 0) || j > model.noise_dim()) {
    throw ContractViolation(std::string(what) + ": index " + std::to_string(j) + " out of range " +
                            (allow_drift ? "0.." : "1..") + std::to_string(model.noise_dim()));
  }
}

}  // namespace

double apply_L(const SdeModel& model, std::size_t j, const ScalarField& phi,
               std::span<const double> x) {
  model.check_state(x);
  check_noise_index(model, j, true, "apply_L");
  require(static_cast<bool>(phi.gradient), "apply_L: scalar field needs a gradient");
  if (j == 0 && !phi.hessian) {
    throw ContractViolation("apply_L: the generator (j = 0) needs the Hessian of the test function");
  }
  const std::size_t n = model.state_dim();
  std::vector<double> grad(n);
  phi.gradient(x, grad);

  LocalExpansion local(model);
  local.evaluate(x, ExpansionDepth::Fields);
  const auto field = local.field(j);
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) value += field[i] * grad[i];
  if (j != 0) return value;

  std::vector<double> hess(n * n);
  phi.hessian(x, hess);
  double second = 0.0;
  for (std::size_t k = 1; k <= model.noise_dim(); ++k) {
    const auto s = local.field(k);
    for (std::size_t i1 = 0; i1 < n; ++i1) {
      for (std::size_t i2 = 0; i2 < n; ++i2) second += s[i1] * s[i2] * hess[i1 * n + i2];
    }
  }
  return value + 0.5 * second;
}

StateVector l_sigma(const SdeModel& model, std::size_t j1, std::size_t j2, std::span<const double> x) {
  model.check_state(x);
  check_noise_index(model, j1, true, "l_sigma");
  check_noise_index(model, j2, true, "l_sigma");
  LocalExpansion local(model);
  local.evaluate(x, (j1 == 0 || j2 == 0) ? ExpansionDepth::Full : ExpansionDepth::DiffusionOperators);
  const auto v = local.l_sigma(j1, j2);
  return {v.begin(), v.end()};
}

StateVector lie_bracket(const SdeModel& model, std::size_t j1, std::size_t j2, std::span<const double> x) {
  model.check_state(x);
  check_noise_index(model, j1, false, "lie_bracket");
  check_noise_index(model, j2, false, "lie_bracket");
  LocalExpansion local(model);
  local.evaluate(x, ExpansionDepth::DiffusionOperators);
  const auto forward = local.l_sigma(j1, j2);
  const auto backward = local.l_sigma(j2, j1);
  StateVector out(model.state_dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward[i] - backward[i];
  return out;
}

StateVector stratonovich_drift(const SdeModel& model, std::span<const double> x) {
  model.check_state(x);
  LocalExpansion local(model);
  local.evaluate(x, ExpansionDepth::DiffusionOperators);
  const auto b = local.field(0);
  StateVector out(b.begin(), b.end());
  for (std::size_t k = 1; k <= model.noise_dim(); ++k) {
    const auto correction = local.l_sigma(k, k);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= 0.5 * correction[i];
  }
  return out;
}

CommutativityReport commutativity_check(const SdeModel& model, std::span<const StateVector> points,
                                        double tolerance) {
  require(!points.empty(), "commutativity_check: at least one sample point is required");
  require(tolerance >= 0.0, "commutativity_check: tolerance must be nonnegative");
  const std::size_t n = model.state_dim();
  const std::size_t d = model.noise_dim();
  CommutativityReport report;
  report.witness_point = points.front();
  report.sample_count = points.size();

  LocalExpansion local(model);
  double sigma_scale = 0.0;
  for (const auto& x : points) {
    model.check_state(x);
    local.evaluate(x, ExpansionDepth::DiffusionOperators);
    for (std::size_t k = 1; k <= d; ++k) {
      for (double s : local.field(k)) sigma_scale = std::max(sigma_scale, std::abs(s));
    }
    for (std::size_t j1 = 1; j1 <= d; ++j1) {
      for (std::size_t j2 = j1 + 1; j2 <= d; ++j2) {
        // g_{j1 j2} - g_{j2 j1} = L_{j2} sigma_{j1} - L_{j1} sigma_{j2}
        const auto g12 = local.l_sigma(j2, j1);
        const auto g21 = local.l_sigma(j1, j2);
        for (std::size_t i = 0; i < n; ++i) {
          const double defect = std::abs(g12[i] - g21[i]);
          if (defect > report.max_defect) {
            report.max_defect = defect;
            report.witness_point = x;
          }
        }
      }
    }
  }
  report.threshold = tolerance * (1.0 + sigma_scale);
  report.commutative = report.max_defect <= report.threshold;
  return report;
}

Phi1Coefficients phi1_coefficient_fields(const SdeModel& model, std::span<const double> x) {
  model.check_state(x);
  const std::size_t n = model.state_dim();
  const std::size_t d = model.noise_dim();
  LocalExpansion local(model);
  local.evaluate(x, ExpansionDepth::Full);

  Phi1Coefficients out{StateVector(n), Matrix(n, n)};
  const auto l0b = local.l_sigma(0, 0);
  for (std::size_t i = 0; i < n; ++i) out.vector[i] = 0.5 * l0b[i];
  for (std::size_t m = 1; m <= d; ++m) {
    const auto sigma = local.field(m);
    const auto lm_b = local.l_sigma(m, 0);
    const auto l0_sigma = local.l_sigma(0, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) out.matrix(i, j) += 0.5 * sigma[i] * (lm_b[j] + l0_sigma[j]);
    }
  }
  return out;
}

Phi2Coefficients phi2_coefficient_fields(const SdeModel& model, std::span<const double> x) {
  model.check_state(x);
  const std::size_t n = model.state_dim();
  const std::size_t d = model.noise_dim();
  LocalExpansion local(model);
  local.evaluate(x, ExpansionDepth::DiffusionOperators);

  Phi2Coefficients out{Tensor3(n, n, n), Matrix(n, n)};
  for (std::size_t m1 = 1; m1 <= d; ++m1) {
    for (std::size_t m2 = 1; m2 <= d; ++m2) {
      const auto l12 = local.l_sigma(m1, m2);
      const auto l21 = local.l_sigma(m2, m1);
      const auto s1 = local.field(m1);
      const auto s2 = local.field(m2);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          out.matrix(i, j) += 0.125 * l12[i] * (l12[j] + l21[j]);
          for (std::size_t k = 0; k < n; ++k) out.tensor(i, j, k) += 0.5 * l12[i] * s1[j] * s2[k];
        }
      }
    }
  }
  return out;
}

Matrix phi3_coefficient_tensor(const SdeModel& model, std::span<const double> x) {
  model.check_state(x);
  const std::size_t n = model.state_dim();
  const std::size_t d = model.noise_dim();
  LocalExpansion local(model);
  local.evaluate(x, ExpansionDepth::DiffusionOperators);

  Matrix out(n, n);
  for (std::size_t m1 = 1; m1 <= d; ++m1) {
    for (std::size_t m2 = 1; m2 <= d; ++m2) {
      if (m1 == m2) continue;  // [L_m, L_m] = 0
      const auto l12 = local.l_sigma(m1, m2);
      const auto l21 = local.l_sigma(m2, m1);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) out(i, j) += 0.125 * l12[i] * (l12[j] - l21[j]);
      }
    }
  }
  return out;
}

}  // namespace extmil
