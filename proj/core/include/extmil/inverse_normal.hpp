#pragma once

namespace extmil {

/// Standard normal quantile Phi^{-1}(u) for u in (0, 1), Wichura's AS241
/// (PPND16), relative accuracy about 1e-16. Throws ContractViolation
/// outside (0, 1).
double inverse_normal_cdf(double u);

}  // namespace extmil
