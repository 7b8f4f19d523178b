#pragma once

// Coefficient-level calculus on an SdeModel.
//
// Index conventions (sigma_0 = b throughout):
//   L_j phi         = sum_i sigma_j^i d_i phi                      (j >= 1)
//   L_0 phi         = sum_i b^i d_i phi + 1/2 sum_{i1,i2} a^{i1 i2} d_{i1 i2} phi,  a = sigma sigma^T
//   L_{j1} sigma_{j2} = "differentiate sigma_{j2} along field j1", applied componentwise
//   g_{j1 j2}       = L_{j2} sigma_{j1}   (the Milstein correction coefficient)
//   [L_{j1}, L_{j2}] = L_{j1} sigma_{j2} - L_{j2} sigma_{j1}

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "extmil/model.hpp"
#include "extmil/tensor.hpp"

namespace extmil {

enum class ExpansionDepth {
  Fields,              // sigma_0..sigma_d only
  DiffusionOperators,  // + L_{j1} sigma_{j2} for j1, j2 >= 1
  Full,                // + every L_{j1} sigma_{j2} with 0 <= j1, j2 <= d
};

/// Reusable workspace holding the fields and first-order operator
/// applications of a model at one point. Not thread-safe; one per worker.
class LocalExpansion {
 public:
  explicit LocalExpansion(const SdeModel& model);

  void evaluate(std::span<const double> x, ExpansionDepth depth);

  std::size_t state_dim() const { return n_; }
  std::size_t noise_dim() const { return d_; }

  std::span<const double> field(std::size_t j) const { return {&fields_[j * n_], n_}; }
  std::span<const double> jacobian(std::size_t j) const { return {&jacobians_[j * n_ * n_], n_ * n_}; }
  /// (L_{j1} sigma_{j2})(x).
  std::span<const double> l_sigma(std::size_t j1, std::size_t j2) const {
    return {&l_sigma_[(j1 * (d_ + 1) + j2) * n_], n_};
  }

 private:
  const SdeModel* model_;
  std::size_t n_;
  std::size_t d_;
  std::vector<double> fields_;
  std::vector<double> jacobians_;
  std::vector<double> hessian_;
  std::vector<double> a_;
  std::vector<double> l_sigma_;
};

/// A scalar test function given by its gradient and (optionally) Hessian.
struct ScalarField {
  std::function<void(std::span<const double> x, std::span<double> grad)> gradient;
  std::function<void(std::span<const double> x, std::span<double> hess)> hessian;  // N*N row-major
};

/// L_j phi(x); j = 0 applies the generator and needs the Hessian.
double apply_L(const SdeModel& model, std::size_t j, const ScalarField& phi, std::span<const double> x);

/// (L_{j1} sigma_{j2})(x), 0 <= j1, j2 <= d.
StateVector l_sigma(const SdeModel& model, std::size_t j1, std::size_t j2, std::span<const double> x);

/// [L_{j1}, L_{j2}](x) for diffusion fields, 1 <= j1, j2 <= d.
StateVector lie_bracket(const SdeModel& model, std::size_t j1, std::size_t j2, std::span<const double> x);

/// Drift of the equivalent Stratonovich equation,
/// b~^i = b^i - 1/2 sum_k sum_j sigma_k^j d_j sigma_k^i.
StateVector stratonovich_drift(const SdeModel& model, std::span<const double> x);

struct CommutativityReport {
  bool commutative = true;
  double max_defect = 0.0;
  StateVector witness_point;
  std::size_t sample_count = 0;
  double threshold = 0.0;  // absolute defect threshold actually applied
};

inline constexpr double kDefaultCommutativityTolerance = 1e-10;

/// Samples |g_{j1 j2} - g_{j2 j1}| over the points for all j1 < j2. The model
/// is declared commutative when the largest defect is at most
/// tolerance * (1 + max sampled |sigma_j^i|).
CommutativityReport commutativity_check(const SdeModel& model, std::span<const StateVector> points,
                                        double tolerance = kDefaultCommutativityTolerance);

/// Coefficients of d_i u and d_ij u in the first error piece:
///   vector^i = 1/2 (L_0 b)^i,
///   matrix^{ij} = 1/2 sum_m sigma_m^i ((L_m b)^j + (L_0 sigma_m)^j).
struct Phi1Coefficients {
  StateVector vector;
  Matrix matrix;
};
Phi1Coefficients phi1_coefficient_fields(const SdeModel& model, std::span<const double> x);

/// Coefficients of d_ijk u and d_ij u in the second error piece.
struct Phi2Coefficients {
  Tensor3 tensor;
  Matrix matrix;
};
Phi2Coefficients phi2_coefficient_fields(const SdeModel& model, std::span<const double> x);

/// C^{ij} = 1/8 sum_{m1,m2} (L_{m1} sigma_{m2})^i [L_{m1}, L_{m2}]^j, the
/// coefficient of d_ij u in the only error piece the extended scheme keeps.
Matrix phi3_coefficient_tensor(const SdeModel& model, std::span<const double> x);

}  // namespace extmil
