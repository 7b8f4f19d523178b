#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "extmil/noise.hpp"
#include "extmil/payoff.hpp"
#include "extmil/schemes.hpp"

namespace extmil {

/// How paths are sampled.
///   PseudoRandom:    `paths` Philox paths per replication; stderr from the
///                    pooled path variance.
///   RandomizedSobol: `replications` independent digital shifts of the first
///                    `paths` Sobol points; stderr from the spread of the
///                    replication means (needs replications >= 2).
struct SamplingPlan {
  NoiseKind kind = NoiseKind::RandomizedSobol;
  std::uint64_t seed = 1;
  std::uint64_t paths = 100'000;
  std::uint32_t replications = 16;
  unsigned threads = 1;

  std::uint64_t total_paths() const { return paths * replications; }
  void validate() const;
};

struct EstimateResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t paths_total = 0;
  std::uint64_t paths_invalid = 0;
  std::uint32_t replications = 0;
  std::uint64_t negative_steps = 0;  // steps with the model's nonnegative coordinate < 0
};

struct BatchResult {
  std::vector<SchemeKind> schemes;
  std::vector<std::vector<EstimateResult>> estimates;  // [scheme][payoff]
  std::vector<NoiseAudit> audit;                       // [scheme]
};

/// Simulates every path once per scheme with shared increments and evaluates
/// all payoffs on each terminal state.
///
/// Reduction contract: paths are grouped into fixed blocks of kBlockPaths
/// consecutive indices inside a replication; each block is summed in path
/// order and block partials are combined in block order with compensated
/// summation. The result is bit-identical for any `threads` value.
BatchResult run_batch(const SdeModel& model, double horizon, std::size_t steps, const StateVector& x0,
                      std::span<const SchemeKind> schemes, std::span<const Payoff> payoffs,
                      const SamplingPlan& plan);

inline constexpr std::uint64_t kBlockPaths = 2048;

/// Mean payoff over the plan's paths for one scheme and payoff. Throws
/// RuntimeFailure when every path is invalid.
EstimateResult estimate(const SdeModel& model, const SimConfig& cfg, const Payoff& payoff,
                        const SamplingPlan& plan);

}  // namespace extmil
