#include "extmil/payoff.hpp"

namespace extmil {

std::string to_string(PayoffKind kind) {
  return kind == PayoffKind::AsianCall ? "asian-call" : "asian-digital";
}

std::optional<PayoffKind> parse_payoff(std::string_view name) {
  if (name == "asian-call") return PayoffKind::AsianCall;
  if (name == "asian-digital") return PayoffKind::AsianDigital;
  return std::nullopt;
}

}  // namespace extmil
