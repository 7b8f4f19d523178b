#include "extmil/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "extmil/errors.hpp"

namespace extmil {

ConvergenceFit convergence_order(std::span<const ErrorPoint> errors) {
  std::set<std::size_t> distinct;
  for (const auto& p : errors) {
    require(p.n > 0, "convergence_order: n must be positive");
    distinct.insert(p.n);
  }
  require(distinct.size() >= 3, "convergence_order: at least 3 distinct n values are required");

  ConvergenceFit fit;
  std::vector<std::pair<double, double>> xy;
  std::set<std::size_t> usable;
  for (const auto& p : errors) {
    if (!(p.error > 0.0) || !std::isfinite(p.error)) {
      ++fit.points_excluded;
      continue;
    }
    xy.emplace_back(std::log2(static_cast<double>(p.n)), std::log2(p.error));
    usable.insert(p.n);
  }
  if (usable.size() < 2) {
    throw RuntimeFailure("convergence_order: fewer than 2 distinct n with positive error remain");
  }
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : xy) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(xy.size());
  my /= static_cast<double>(xy.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : xy) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points_used = xy.size();
  return fit;
}

std::vector<ErrorPoint> sup_error_series(std::span<const SupErrorRow> rows, SchemeKind scheme) {
  std::vector<ErrorPoint> out;
  for (const auto& row : rows) {
    if (row.scheme == scheme) out.push_back({row.n, row.sup_abs_error});
  }
  std::stable_sort(out.begin(), out.end(), [](const ErrorPoint& a, const ErrorPoint& b) { return a.n < b.n; });
  return out;
}

std::vector<SchemeRatio> scheme_ratios(std::span<const SupErrorRow> rows, SchemeKind numerator,
                                       SchemeKind denominator) {
  std::vector<SchemeRatio> out;
  for (const auto& top : rows) {
    if (top.scheme != numerator) continue;
    auto bottom = std::find_if(rows.begin(), rows.end(),
                               [&](const SupErrorRow& r) { return r.scheme == denominator && r.n == top.n; });
    if (bottom == rows.end()) continue;
    SchemeRatio r;
    r.n = top.n;
    const double a = top.sup_abs_error, b = bottom->sup_abs_error;
    const double sa = top.combined_std_error(), sb = bottom->combined_std_error();
    r.ratio = b > 0.0 ? a / b : std::numeric_limits<double>::infinity();
    r.std_error = b > 0.0 ? std::hypot(sa / b, a * sb / (b * b)) : std::numeric_limits<double>::infinity();
    r.gap = b - a;
    r.gap_std_error = std::hypot(sa, sb);
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const SchemeRatio& x, const SchemeRatio& y) { return x.n < y.n; });
  return out;
}

}  // namespace extmil
