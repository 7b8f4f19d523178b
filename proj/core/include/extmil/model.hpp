#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "extmil/tensor.hpp"

namespace extmil {

/// Coefficient evaluators of an autonomous Ito SDE
///
///   dX = b(X) dt + sum_{j=1..d} sigma_j(X) dB^j,   X in R^N.
///
/// Fields are indexed 0..d with field 0 = drift b and field j >= 1 = the
/// j-th diffusion column sigma_j. All outputs are written into caller
/// buffers so the hot path never allocates.
///
///   jacobian(j, x, out):  out[i*N + l]         = d_l sigma_j^i(x)
///   hessian(j, x, out):   out[(i*N + l)*N + m] = d_l d_m sigma_j^i(x)
class Coefficients {
 public:
  virtual ~Coefficients() = default;

  virtual void field(std::size_t j, std::span<const double> x, std::span<double> out) const = 0;
  virtual void jacobian(std::size_t j, std::span<const double> x, std::span<double> out) const = 0;
  virtual void hessian(std::size_t j, std::span<const double> x, std::span<double> out) const = 0;
  /// True when field j is affine in x, i.e. its Hessian is identically zero.
  virtual bool affine(std::size_t) const { return false; }
};

/// An SDE together with its coefficient calculus inputs. Immutable and safe
/// to share between threads.
class SdeModel {
 public:
  SdeModel(std::string label, std::size_t state_dim, std::size_t noise_dim,
           std::shared_ptr<const Coefficients> coefficients);

  const std::string& label() const { return label_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t noise_dim() const { return noise_dim_; }
  const Coefficients& coefficients() const { return *coefficients_; }

  /// Index of a coordinate that the exact dynamics keep nonnegative
  /// (Heston variance). Simulators count steps where it goes negative.
  std::optional<std::size_t> nonnegative_coordinate() const { return nonnegative_coordinate_; }
  SdeModel& with_nonnegative_coordinate(std::size_t index);

  StateVector drift(std::span<const double> x) const { return field(0, x); }
  StateVector diffusion(std::size_t j, std::span<const double> x) const;
  Matrix drift_jacobian(std::span<const double> x) const { return jacobian(0, x); }
  Matrix diffusion_jacobian(std::size_t j, std::span<const double> x) const;
  Tensor3 drift_hessian(std::span<const double> x) const { return hessian(0, x); }
  Tensor3 diffusion_hessian(std::size_t j, std::span<const double> x) const;

  /// Field-indexed access, j in 0..d (0 = drift).
  StateVector field(std::size_t j, std::span<const double> x) const;
  Matrix jacobian(std::size_t j, std::span<const double> x) const;
  Tensor3 hessian(std::size_t j, std::span<const double> x) const;

  void check_state(std::span<const double> x) const;
  void check_field_index(std::size_t j) const;

 private:
  std::string label_;
  std::size_t state_dim_;
  std::size_t noise_dim_;
  std::shared_ptr<const Coefficients> coefficients_;
  std::optional<std::size_t> nonnegative_coordinate_;
};

/// Evaluator of one vector field R^N -> R^N.
using FieldFunction = std::function<void(std::span<const double> x, std::span<double> out)>;

/// Ad-hoc model built from plain callables. Fields are required; Jacobians and
/// Hessians are optional and fall back to central finite differences.
struct FieldSpec {
  FieldFunction value;
  FieldFunction jacobian;  // may be empty
  FieldFunction hessian;   // may be empty
};

class FunctionCoefficients final : public Coefficients {
 public:
  FunctionCoefficients(std::size_t state_dim, std::vector<FieldSpec> fields);

  void field(std::size_t j, std::span<const double> x, std::span<double> out) const override;
  void jacobian(std::size_t j, std::span<const double> x, std::span<double> out) const override;
  void hessian(std::size_t j, std::span<const double> x, std::span<double> out) const override;

 private:
  std::size_t state_dim_;
  std::vector<FieldSpec> fields_;
};

/// Builds a model from drift and diffusion callables; any missing derivative
/// is approximated by central differences with step eps^{1/3} * max(1, |x_l|)
/// (first order) or eps^{1/4} * max(1, |x_l|) (second order).
SdeModel make_function_model(std::string label, std::size_t state_dim,
                             FieldSpec drift, std::vector<FieldSpec> diffusion);

/// Central-difference helpers, exposed for derivative cross-checks.
/// `f` maps R^N to R^output_dim; out[i*N + l] ~ d_l f^i. Applied to a Jacobian
/// evaluator (output_dim = N*N) this yields the Hessian layout directly.
void finite_difference_jacobian(const FieldFunction& f, std::size_t state_dim,
                                std::size_t output_dim, std::span<const double> x,
                                std::span<double> out);
void finite_difference_hessian(const FieldFunction& f, std::size_t state_dim,
                               std::span<const double> x, std::span<double> out);

struct DerivativeCheck {
  double max_jacobian_error = 0.0;  // relative, over all fields and points
  double max_hessian_error = 0.0;
  double max_hessian_asymmetry = 0.0;
  std::size_t points = 0;
};

/// Compares the model's analytic Jacobians/Hessians against central finite
/// differences of the lower-order evaluators at the given points. The error
/// for an entry is |analytic - fd| / max(1, |analytic|).
DerivativeCheck check_derivatives(const SdeModel& model, std::span<const StateVector> points);

}  // namespace extmil
