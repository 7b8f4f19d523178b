#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "extmil/sweep.hpp"

namespace extmil {

struct ErrorPoint {
  std::size_t n = 0;
  double error = 0.0;
};

/// Least-squares line log2|error| = intercept + slope * log2(n).
struct ConvergenceFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points_used = 0;
  std::size_t points_excluded = 0;  // non-positive errors

  double order() const { return -slope; }
};

/// Needs at least 3 distinct n (ContractViolation otherwise). Points with
/// error <= 0 are dropped and counted; fewer than 2 usable distinct n left
/// is a RuntimeFailure.
ConvergenceFit convergence_order(std::span<const ErrorPoint> errors);

/// Sup-error series of one scheme, ordered by n.
std::vector<ErrorPoint> sup_error_series(std::span<const SupErrorRow> rows, SchemeKind scheme);

struct SchemeRatio {
  std::size_t n = 0;
  double ratio = 0.0;      // sup error of `numerator` / sup error of `denominator`
  double std_error = 0.0;  // delta method, independent errors assumed
  double gap = 0.0;        // denominator sup error - numerator sup error
  double gap_std_error = 0.0;
};

/// Per-n ratio table; n values missing for either scheme are skipped.
std::vector<SchemeRatio> scheme_ratios(std::span<const SupErrorRow> rows, SchemeKind numerator,
                                       SchemeKind denominator);

}  // namespace extmil
