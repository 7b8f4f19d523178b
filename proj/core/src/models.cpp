#include "extmil/models.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "extmil/errors.hpp"

namespace extmil {

namespace {

void zero(std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); }

class GbmCoefficients final : public Coefficients {
 public:
  explicit GbmCoefficients(GbmParams p) : p_(p) {}

  void field(std::size_t j, std::span<const double> x, std::span<double> out) const override {
    out[0] = (j == 0 ? p_.rate : p_.volatility) * x[0];
  }
  void jacobian(std::size_t j, std::span<const double>, std::span<double> out) const override {
    out[0] = j == 0 ? p_.rate : p_.volatility;
  }
  void hessian(std::size_t, std::span<const double>, std::span<double> out) const override { zero(out); }
  bool affine(std::size_t) const override { return true; }

 private:
  GbmParams p_;
};

// State (S, A).
class BsAsianCoefficients final : public Coefficients {
 public:
  explicit BsAsianCoefficients(BsAsianParams p) : p_(p) {}

  void field(std::size_t j, std::span<const double> x, std::span<double> out) const override {
    if (j == 0) {
      out[0] = p_.rate * x[0];
      out[1] = x[0];
    } else {
      out[0] = p_.volatility * x[0];
      out[1] = 0.0;
    }
  }
  void jacobian(std::size_t j, std::span<const double>, std::span<double> out) const override {
    zero(out);
    if (j == 0) {
      out[0] = p_.rate;  // d_S b^S
      out[2] = 1.0;      // d_S b^A
    } else {
      out[0] = p_.volatility;
    }
  }
  void hessian(std::size_t, std::span<const double>, std::span<double> out) const override { zero(out); }
  bool affine(std::size_t) const override { return true; }

 private:
  BsAsianParams p_;
};

// State (S, v, A); N = 3.
class HestonAsianCoefficients final : public Coefficients {
 public:
  explicit HestonAsianCoefficients(HestonAsianParams p)
      : p_(p), orthogonal_(p.vol_of_vol * std::sqrt(1.0 - p.correlation * p.correlation)) {}

  void field(std::size_t j, std::span<const double> x, std::span<double> out) const override {
    const double q = std::sqrt(std::max(x[1], 0.0));
    switch (j) {
      case 0:
        out[0] = 0.0;
        out[1] = p_.mean_reversion * (p_.long_run_variance - x[1]);
        out[2] = x[0];
        break;
      case 1:
        out[0] = q * x[0];
        out[1] = p_.vol_of_vol * p_.correlation * q;
        out[2] = 0.0;
        break;
      default:
        out[0] = 0.0;
        out[1] = orthogonal_ * q;
        out[2] = 0.0;
        break;
    }
  }

  void jacobian(std::size_t j, std::span<const double> x, std::span<double> out) const override {
    zero(out);
    const auto r = root(x[1]);
    switch (j) {
      case 0:
        out[1 * 3 + 1] = -p_.mean_reversion;
        out[2 * 3 + 0] = 1.0;
        break;
      case 1:
        out[0 * 3 + 0] = r.value;
        out[0 * 3 + 1] = x[0] * r.first;
        out[1 * 3 + 1] = p_.vol_of_vol * p_.correlation * r.first;
        break;
      default:
        out[1 * 3 + 1] = orthogonal_ * r.first;
        break;
    }
  }

  bool affine(std::size_t j) const override { return j == 0; }

  void hessian(std::size_t j, std::span<const double> x, std::span<double> out) const override {
    zero(out);
    if (j == 0) return;
    const auto r = root(x[1]);
    auto at = [&](std::size_t i, std::size_t l, std::size_t m) -> double& { return out[(i * 3 + l) * 3 + m]; };
    if (j == 1) {
      at(0, 0, 1) = r.first;
      at(0, 1, 0) = r.first;
      at(0, 1, 1) = x[0] * r.second;
      at(1, 1, 1) = p_.vol_of_vol * p_.correlation * r.second;
    } else {
      at(1, 1, 1) = orthogonal_ * r.second;
    }
  }

 private:
  struct Root {
    double value, first, second;
  };
  // sqrt(max(v, 0)) and its derivatives; flat for v <= 0.
  static Root root(double v) {
    if (v <= 0.0) return {0.0, 0.0, 0.0};
    const double q = std::sqrt(v);
    return {q, 0.5 / q, -0.25 / (v * q)};
  }

  HestonAsianParams p_;
  double orthogonal_;
};

// State (X_R, X_S).
class SmallDiffusionCoefficients final : public Coefficients {
 public:
  explicit SmallDiffusionCoefficients(SmallDiffusionParams p) : p_(p) {}

  void field(std::size_t j, std::span<const double> x, std::span<double> out) const override {
    if (j == 0) {
      out[0] = -x[0];
      out[1] = x[0];
    } else {
      out[0] = p_.epsilon;
      out[1] = 0.0;
    }
  }
  void jacobian(std::size_t j, std::span<const double>, std::span<double> out) const override {
    zero(out);
    if (j == 0) {
      out[0] = -1.0;
      out[2] = 1.0;
    }
  }
  void hessian(std::size_t, std::span<const double>, std::span<double> out) const override { zero(out); }
  bool affine(std::size_t) const override { return true; }

 private:
  SmallDiffusionParams p_;
};

}  // namespace

SdeModel make_gbm(const GbmParams& params) {
  return SdeModel("gbm", 1, 1, std::make_shared<GbmCoefficients>(params));
}

SdeModel make_bs_asian(const BsAsianParams& params) {
  return SdeModel("bs-asian", 2, 1, std::make_shared<BsAsianCoefficients>(params));
}

SdeModel make_heston_asian(const HestonAsianParams& params) {
  const double feller_lhs = 2.0 * params.mean_reversion * params.long_run_variance;
  const double feller_rhs = params.vol_of_vol * params.vol_of_vol;
  if (!(feller_lhs > feller_rhs)) {
    std::ostringstream msg;
    msg << "heston-asian: Feller condition 2*alpha*theta > nu^2 violated (2*alpha*theta = "
        << feller_lhs << ", nu^2 = " << feller_rhs << ")";
    throw ContractViolation(msg.str());
  }
  require(params.mean_reversion > 0.0 && params.long_run_variance > 0.0 && params.vol_of_vol > 0.0,
          "heston-asian: alpha, theta and nu must be positive");
  require(std::abs(params.correlation) <= 1.0, "heston-asian: correlation rho must lie in [-1, 1]");
  SdeModel model("heston-asian", 3, 2, std::make_shared<HestonAsianCoefficients>(params));
  model.with_nonnegative_coordinate(1);
  return model;
}

SdeModel make_small_diffusion(const SmallDiffusionParams& params) {
  require(params.epsilon >= 0.0 && params.epsilon < 1.0, "small-diffusion: epsilon must lie in [0, 1)");
  return SdeModel("small-diffusion", 2, 1, std::make_shared<SmallDiffusionCoefficients>(params));
}

}  // namespace extmil
