#include "extmil/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "extmil/errors.hpp"

namespace extmil {

namespace {

double first_order_step(double xl) {
  static const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  return base * std::max(1.0, std::abs(xl));
}

double second_order_step(double xl) {
  static const double base = std::sqrt(std::sqrt(std::numeric_limits<double>::epsilon()));
  return base * std::max(1.0, std::abs(xl));
}

}  // namespace

SdeModel::SdeModel(std::string label, std::size_t state_dim, std::size_t noise_dim,
                   std::shared_ptr<const Coefficients> coefficients)
    : label_(std::move(label)),
      state_dim_(state_dim),
      noise_dim_(noise_dim),
      coefficients_(std::move(coefficients)) {
  require(state_dim_ > 0, "SdeModel: state dimension must be positive");
  require(noise_dim_ > 0, "SdeModel: noise dimension must be positive");
  require(coefficients_ != nullptr, "SdeModel: coefficients must not be null");
}

SdeModel& SdeModel::with_nonnegative_coordinate(std::size_t index) {
  require(index < state_dim_, "SdeModel: nonnegative coordinate out of range");
  nonnegative_coordinate_ = index;
  return *this;
}

void SdeModel::check_state(std::span<const double> x) const {
  if (x.size() != state_dim_) {
    throw ContractViolation("state has length " + std::to_string(x.size()) + ", model '" +
                            label_ + "' expects " + std::to_string(state_dim_));
  }
}

void SdeModel::check_field_index(std::size_t j) const {
  if (j > noise_dim_) {
    throw ContractViolation("field index " + std::to_string(j) + " out of range 0.." +
                            std::to_string(noise_dim_));
  }
}

StateVector SdeModel::field(std::size_t j, std::span<const double> x) const {
  check_state(x);
  check_field_index(j);
  StateVector out(state_dim_);
  coefficients_->field(j, x, out);
  return out;
}

Matrix SdeModel::jacobian(std::size_t j, std::span<const double> x) const {
  check_state(x);
  check_field_index(j);
  Matrix out(state_dim_, state_dim_);
  coefficients_->jacobian(j, x, out.data());
  return out;
}

Tensor3 SdeModel::hessian(std::size_t j, std::span<const double> x) const {
  check_state(x);
  check_field_index(j);
  Tensor3 out(state_dim_, state_dim_, state_dim_);
  coefficients_->hessian(j, x, out.data());
  return out;
}

StateVector SdeModel::diffusion(std::size_t j, std::span<const double> x) const {
  require(j >= 1, "diffusion column index starts at 1");
  return field(j, x);
}

Matrix SdeModel::diffusion_jacobian(std::size_t j, std::span<const double> x) const {
  require(j >= 1, "diffusion column index starts at 1");
  return jacobian(j, x);
}

Tensor3 SdeModel::diffusion_hessian(std::size_t j, std::span<const double> x) const {
  require(j >= 1, "diffusion column index starts at 1");
  return hessian(j, x);
}

void finite_difference_jacobian(const FieldFunction& f, std::size_t state_dim,
                                std::size_t output_dim, std::span<const double> x,
                                std::span<double> out) {
  std::vector<double> xp(x.begin(), x.end());
  std::vector<double> plus(output_dim), minus(output_dim);
  for (std::size_t l = 0; l < state_dim; ++l) {
    const double step = first_order_step(x[l]);
    xp[l] = x[l] + step;
    f(xp, plus);
    xp[l] = x[l] - step;
    f(xp, minus);
    xp[l] = x[l];
    for (std::size_t i = 0; i < output_dim; ++i) {
      out[i * state_dim + l] = (plus[i] - minus[i]) / (2.0 * step);
    }
  }
}

void finite_difference_hessian(const FieldFunction& f, std::size_t state_dim,
                               std::span<const double> x, std::span<double> out) {
  const std::size_t n = state_dim;
  std::vector<double> xp(x.begin(), x.end());
  std::vector<double> pp(n), pm(n), mp(n), mm(n);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t m = l; m < n; ++m) {
      const double hl = second_order_step(x[l]);
      const double hm = second_order_step(x[m]);
      auto eval = [&](double sl, double sm, std::vector<double>& dst) {
        xp[l] += sl * hl;
        xp[m] += sm * hm;
        f(xp, dst);
        xp[l] = x[l];
        xp[m] = x[m];
      };
      eval(+1, +1, pp);
      eval(+1, -1, pm);
      eval(-1, +1, mp);
      eval(-1, -1, mm);
      for (std::size_t i = 0; i < n; ++i) {
        const double v = (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * hl * hm);
        out[(i * n + l) * n + m] = v;
        out[(i * n + m) * n + l] = v;
      }
    }
  }
}

FunctionCoefficients::FunctionCoefficients(std::size_t state_dim, std::vector<FieldSpec> fields)
    : state_dim_(state_dim), fields_(std::move(fields)) {
  require(fields_.size() >= 2, "FunctionCoefficients: need a drift and at least one diffusion column");
  for (const auto& spec : fields_) {
    require(static_cast<bool>(spec.value), "FunctionCoefficients: every field needs a value evaluator");
  }
}

void FunctionCoefficients::field(std::size_t j, std::span<const double> x,
                                 std::span<double> out) const {
  fields_.at(j).value(x, out);
}

void FunctionCoefficients::jacobian(std::size_t j, std::span<const double> x,
                                    std::span<double> out) const {
  const auto& spec = fields_.at(j);
  if (spec.jacobian) {
    spec.jacobian(x, out);
  } else {
    finite_difference_jacobian(spec.value, state_dim_, state_dim_, x, out);
  }
}

void FunctionCoefficients::hessian(std::size_t j, std::span<const double> x,
                                   std::span<double> out) const {
  const auto& spec = fields_.at(j);
  if (spec.hessian) {
    spec.hessian(x, out);
  } else if (spec.jacobian) {
    finite_difference_jacobian(spec.jacobian, state_dim_, state_dim_ * state_dim_, x, out);
  } else {
    finite_difference_hessian(spec.value, state_dim_, x, out);
  }
}

SdeModel make_function_model(std::string label, std::size_t state_dim, FieldSpec drift,
                             std::vector<FieldSpec> diffusion) {
  const std::size_t noise_dim = diffusion.size();
  std::vector<FieldSpec> fields;
  fields.reserve(noise_dim + 1);
  fields.push_back(std::move(drift));
  for (auto& column : diffusion) fields.push_back(std::move(column));
  auto coefficients = std::make_shared<FunctionCoefficients>(state_dim, std::move(fields));
  return SdeModel(std::move(label), state_dim, noise_dim, std::move(coefficients));
}

DerivativeCheck check_derivatives(const SdeModel& model, std::span<const StateVector> points) {
  const std::size_t n = model.state_dim();
  const auto& coeffs = model.coefficients();
  DerivativeCheck report;
  std::vector<double> analytic_jac(n * n), fd_jac(n * n);
  std::vector<double> analytic_hess(n * n * n), fd_hess(n * n * n);

  for (const auto& x : points) {
    model.check_state(x);
    ++report.points;
    for (std::size_t j = 0; j <= model.noise_dim(); ++j) {
      FieldFunction value = [&coeffs, j](std::span<const double> y, std::span<double> out) {
        coeffs.field(j, y, out);
      };
      FieldFunction jac = [&coeffs, j](std::span<const double> y, std::span<double> out) {
        coeffs.jacobian(j, y, out);
      };
      coeffs.jacobian(j, x, analytic_jac);
      finite_difference_jacobian(value, n, n, x, fd_jac);
      for (std::size_t k = 0; k < n * n; ++k) {
        const double err = std::abs(analytic_jac[k] - fd_jac[k]) / std::max(1.0, std::abs(analytic_jac[k]));
        report.max_jacobian_error = std::max(report.max_jacobian_error, err);
      }

      coeffs.hessian(j, x, analytic_hess);
      finite_difference_jacobian(jac, n, n * n, x, fd_hess);
      for (std::size_t k = 0; k < n * n * n; ++k) {
        const double err = std::abs(analytic_hess[k] - fd_hess[k]) / std::max(1.0, std::abs(analytic_hess[k]));
        report.max_hessian_error = std::max(report.max_hessian_error, err);
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < n; ++l) {
          for (std::size_t m = l + 1; m < n; ++m) {
            const double a = analytic_hess[(i * n + l) * n + m];
            const double b = analytic_hess[(i * n + m) * n + l];
            report.max_hessian_asymmetry = std::max(report.max_hessian_asymmetry, std::abs(a - b));
          }
        }
      }
    }
  }
  return report;
}

}  // namespace extmil
