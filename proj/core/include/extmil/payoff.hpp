#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace extmil {

enum class PayoffKind { AsianCall, AsianDigital };

/// "asian-call" / "asian-digital".
std::string to_string(PayoffKind kind);
std::optional<PayoffKind> parse_payoff(std::string_view name);

/// Terminal functional of the running-integral coordinate A:
///   AsianCall:    scale * max(A_T / T - K, 0)   (scale = discount e^{-rT})
///   AsianDigital: scale * 1{A_T / T >= K}       (scale = coupon)
struct Payoff {
  PayoffKind kind = PayoffKind::AsianCall;
  double strike = 100.0;
  double horizon = 1.0;
  double scale = 1.0;
  std::size_t average_coordinate = 0;

  double operator()(std::span<const double> terminal_state) const {
    const double average = terminal_state[average_coordinate] / horizon;
    if (kind == PayoffKind::AsianCall) {
      return average > strike ? scale * (average - strike) : 0.0;
    }
    return average >= strike ? scale : 0.0;
  }
};

}  // namespace extmil
