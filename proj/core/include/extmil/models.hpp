#pragma once

// Concrete SDE families with analytic first and second derivatives.
//
//   gbm             dS = r S dt + sigma S dB                          (N=1, d=1)
//   bs-asian        dS = r S dt + sigma S dB,  dA = S dt              (N=2, d=1)
//   heston-asian    dS = sqrt(v) S dB1
//                   dv = alpha (theta - v) dt + nu sqrt(v) (rho dB1 + sqrt(1-rho^2) dB2)
//                   dA = S dt                                         (N=3, d=2)
//   small-diffusion dX_R = -X_R dt + eps dB,  dX_S = X_R dt           (N=2, d=1)
//
// Admissible regions: gbm and bs-asian on S > 0; small-diffusion on all of
// R^2; heston-asian on v >= 0. For v < 0 every sqrt(v) is evaluated as
// sqrt(max(v, 0)) and its derivatives as 0, so a discretised variance that
// dips below zero switches its diffusion off without modifying the state.

#include "extmil/model.hpp"

namespace extmil {

struct GbmParams {
  double rate = 0.1;
  double volatility = 0.2;
};

struct BsAsianParams {
  double rate = 0.1;
  double volatility = 0.4;
};

struct HestonAsianParams {
  double mean_reversion = 2.0;      // alpha
  double long_run_variance = 0.09;  // theta
  double vol_of_vol = 0.1;          // nu
  double correlation = 0.7;         // rho
};

struct SmallDiffusionParams {
  double epsilon = 0.1;
};

SdeModel make_gbm(const GbmParams& params = {});
SdeModel make_bs_asian(const BsAsianParams& params = {});
/// Throws ContractViolation unless 2 alpha theta > nu^2 and |rho| <= 1.
SdeModel make_heston_asian(const HestonAsianParams& params = {});
/// Throws ContractViolation unless 0 <= epsilon < 1.
SdeModel make_small_diffusion(const SmallDiffusionParams& params = {});

}  // namespace extmil
