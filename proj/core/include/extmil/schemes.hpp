#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "extmil/calculus.hpp"
#include "extmil/model.hpp"
#include "extmil/noise.hpp"

namespace extmil {

/// One-step maps. On commutative models TruncatedMilstein is the classical
/// Milstein scheme; for non-commutative models the Levy-area terms are
/// dropped and no exact Milstein variant is offered.
enum class SchemeKind { EulerMaruyama, TruncatedMilstein, ExtendedMilstein };

/// CLI spellings: "em", "tmilstein", "extended".
std::string to_string(SchemeKind kind);
std::optional<SchemeKind> parse_scheme(std::string_view name);
inline constexpr std::string_view kSchemeNames = "{em, tmilstein, extended}";

struct StepInput {
  StateVector x;
  double h = 0.0;
  std::vector<double> dB;  // length d, each ~ N(0, h)
};

struct SimConfig {
  double horizon = 1.0;  // T
  std::size_t steps = 1;  // n; uniform grid h = T / n
  StateVector x0;
  SchemeKind scheme = SchemeKind::EulerMaruyama;

  double step_size() const { return horizon / static_cast<double>(steps); }
};

/// Allocation-free stepper. Holds a LocalExpansion workspace, so each worker
/// thread owns its own instance.
class Stepper {
 public:
  Stepper(const SdeModel& model, SchemeKind scheme);

  SchemeKind scheme() const { return scheme_; }

  /// x <- one step of the scheme from x with step h and increments dB.
  void advance(std::span<double> x, double h, std::span<const double> dB);

 private:
  const SdeModel* model_;
  SchemeKind scheme_;
  LocalExpansion local_;
};

/// x + b h + sum_j sigma_j dB^j
StateVector step_em(const SdeModel& model, const StepInput& in);
/// EM + 1/2 sum_{j1,j2>=1} g_{j1 j2} (dB^{j1} dB^{j2} - h 1{j1=j2}),  g_{j1 j2} = L_{j2} sigma_{j1}
StateVector step_truncated_milstein(const SdeModel& model, const StepInput& in);
/// x + sum_{j=0..d} sigma_j dB^j + 1/2 sum_{j1,j2=0..d} L_{j1} sigma_{j2} (dB^{j1} dB^{j2} - h 1{j1=j2!=0}),  dB^0 = h
StateVector step_extended_milstein(const SdeModel& model, const StepInput& in);
StateVector step(const SdeModel& model, SchemeKind scheme, const StepInput& in);

/// Count and order-independent checksum of the Brownian increments a
/// simulation consumed. Under common random numbers two schemes run on the
/// same paths must report equal audits.
struct NoiseAudit {
  std::uint64_t increments = 0;
  std::uint64_t checksum = 0;

  void record(double increment, std::uint64_t position);
  void merge(const NoiseAudit& other) {
    increments += other.increments;
    checksum += other.checksum;
  }
  friend bool operator==(const NoiseAudit&, const NoiseAudit&) = default;
};

struct TerminalState {
  StateVector state;
  bool finite = true;               // false if the path overflowed or produced NaN
  std::size_t negative_steps = 0;   // steps ending with the model's nonnegative coordinate < 0
};

/// Runs cfg.steps steps from cfg.x0 with increments of path `path_index`.
/// Throws RuntimeFailure when the source has fewer than n*d coordinates per path.
TerminalState simulate_terminal(const SdeModel& model, const SimConfig& cfg, const NoiseSource& noise,
                                std::uint64_t path_index);

/// Same as simulate_terminal but with caller-provided standard normals
/// (length n*d, step-major) and workspace; used by the batch engine.
TerminalState simulate_with_normals(Stepper& stepper, const SdeModel& model, const SimConfig& cfg,
                                    std::span<const double> standard_normals, std::span<double> dB_buffer,
                                    NoiseAudit* audit = nullptr);

}  // namespace extmil
