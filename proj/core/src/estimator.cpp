#include "extmil/estimator.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "extmil/errors.hpp"

namespace extmil {

namespace {

// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double compensation = 0.0;

  void add(double value) {
    const double t = sum + value;
    if (std::abs(sum) >= std::abs(value)) {
      compensation += (sum - t) + value;
    } else {
      compensation += (value - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + compensation; }
};

struct BlockPartial {
  std::uint32_t replication = 0;
  std::vector<double> sum;    // [scheme * payoffs + payoff]
  std::vector<double> sumsq;  // same layout
  std::vector<std::uint64_t> valid;
  std::vector<std::uint64_t> negative;
  std::vector<NoiseAudit> audit;
};

NoiseSource make_source(const SamplingPlan& plan, std::size_t dims, std::uint32_t replication) {
  if (plan.kind == NoiseKind::PseudoRandom) return NoiseSource::pseudo_random(plan.seed, dims, replication);
  return NoiseSource::randomized_sobol(plan.seed, dims, replication);
}

}  // namespace

void SamplingPlan::validate() const {
  require(paths >= 1, "sampling plan: paths must be positive");
  require(replications >= 1, "sampling plan: replications must be positive");
  if (kind == NoiseKind::PseudoRandom) {
    require(total_paths() >= 2, "sampling plan: Monte Carlo needs at least 2 paths");
  } else {
    require(replications >= 2, "sampling plan: randomized QMC needs at least 2 replications for an error bar");
  }
}

BatchResult run_batch(const SdeModel& model, double horizon, std::size_t steps, const StateVector& x0,
                      std::span<const SchemeKind> schemes, std::span<const Payoff> payoffs,
                      const SamplingPlan& plan) {
  plan.validate();
  model.check_state(x0);
  require(!schemes.empty(), "run_batch: at least one scheme is required");
  require(!payoffs.empty(), "run_batch: at least one payoff is required");
  require(steps >= 1 && horizon > 0.0, "run_batch: need steps >= 1 and a positive horizon");
  for (const auto& payoff : payoffs) {
    require(payoff.average_coordinate < model.state_dim(), "run_batch: payoff coordinate out of range");
  }

  const std::size_t d = model.noise_dim();
  const std::size_t dims = steps * d;
  const std::size_t n_schemes = schemes.size();
  const std::size_t n_payoffs = payoffs.size();

  std::vector<NoiseSource> sources;
  sources.reserve(plan.replications);
  for (std::uint32_t r = 0; r < plan.replications; ++r) sources.push_back(make_source(plan, dims, r));

  const std::uint64_t blocks_per_rep = (plan.paths + kBlockPaths - 1) / kBlockPaths;
  const std::uint64_t total_blocks = blocks_per_rep * plan.replications;
  std::vector<BlockPartial> partials(total_blocks);

  SimConfig cfg;
  cfg.horizon = horizon;
  cfg.steps = steps;
  cfg.x0 = x0;

  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    try {
      std::vector<Stepper> steppers;
      steppers.reserve(n_schemes);
      for (auto scheme : schemes) steppers.emplace_back(model, scheme);
      std::vector<double> normals(dims);
      std::vector<double> dB(d);
      std::vector<double> payoff_values(n_payoffs);

      for (std::uint64_t block = next++; block < total_blocks; block = next++) {
        const auto replication = static_cast<std::uint32_t>(block / blocks_per_rep);
        const std::uint64_t first = (block % blocks_per_rep) * kBlockPaths;
        const std::uint64_t last = std::min(first + kBlockPaths, plan.paths);

        BlockPartial partial;
        partial.replication = replication;
        partial.sum.assign(n_schemes * n_payoffs, 0.0);
        partial.sumsq.assign(n_schemes * n_payoffs, 0.0);
        partial.valid.assign(n_schemes, 0);
        partial.negative.assign(n_schemes, 0);
        partial.audit.assign(n_schemes, {});

        for (std::uint64_t path = first; path < last; ++path) {
          sources[replication].standard_normals(path, normals);

          for (std::size_t s = 0; s < n_schemes; ++s) {
            cfg.scheme = schemes[s];
            const auto terminal = simulate_with_normals(steppers[s], model, cfg, normals, dB, &partial.audit[s]);
            partial.negative[s] += terminal.negative_steps;
            if (!terminal.finite) continue;
            ++partial.valid[s];
            for (std::size_t p = 0; p < n_payoffs; ++p) {
              const double value = payoffs[p](terminal.state);
              partial.sum[s * n_payoffs + p] += value;
              partial.sumsq[s * n_payoffs + p] += value * value;
            }
          }
        }
        partials[block] = std::move(partial);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = total_blocks;
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(plan.threads, static_cast<unsigned>(total_blocks)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  BatchResult result;
  result.schemes.assign(schemes.begin(), schemes.end());
  result.estimates.assign(n_schemes, std::vector<EstimateResult>(n_payoffs));
  result.audit.assign(n_schemes, {});

  for (std::size_t s = 0; s < n_schemes; ++s) {
    std::uint64_t valid_total = 0;
    std::uint64_t negative_total = 0;
    std::vector<std::uint64_t> valid_per_rep(plan.replications, 0);
    for (const auto& partial : partials) {
      valid_total += partial.valid[s];
      negative_total += partial.negative[s];
      valid_per_rep[partial.replication] += partial.valid[s];
      result.audit[s].merge(partial.audit[s]);
    }
    if (valid_total == 0) {
      throw RuntimeFailure("every simulated path is invalid for scheme " + to_string(schemes[s]) +
                           " (non-finite states)");
    }

    for (std::size_t p = 0; p < n_payoffs; ++p) {
      const std::size_t slot = s * n_payoffs + p;
      EstimateResult& est = result.estimates[s][p];
      est.paths_total = plan.total_paths();
      est.paths_invalid = plan.total_paths() - valid_total;
      est.replications = plan.replications;
      est.negative_steps = negative_total;

      CompensatedSum total, total_sq;
      std::vector<CompensatedSum> rep_sum(plan.replications);
      for (const auto& partial : partials) {
        total.add(partial.sum[slot]);
        total_sq.add(partial.sumsq[slot]);
        rep_sum[partial.replication].add(partial.sum[slot]);
      }
      const double n_valid = static_cast<double>(valid_total);
      est.mean = total.value() / n_valid;

      if (plan.kind == NoiseKind::PseudoRandom) {
        const double variance = valid_total > 1
            ? std::max(0.0, (total_sq.value() - total.value() * est.mean) / (n_valid - 1.0))
            : 0.0;
        est.std_error = std::sqrt(variance / n_valid);
      } else {
        CompensatedSum spread;
        std::uint32_t reps_used = 0;
        for (std::uint32_t r = 0; r < plan.replications; ++r) {
          if (valid_per_rep[r] == 0) continue;
          const double rep_mean = rep_sum[r].value() / static_cast<double>(valid_per_rep[r]);
          spread.add((rep_mean - est.mean) * (rep_mean - est.mean));
          ++reps_used;
        }
        est.std_error = reps_used > 1
            ? std::sqrt(spread.value() / (static_cast<double>(reps_used) - 1.0) / static_cast<double>(reps_used))
            : 0.0;
      }
    }
  }
  return result;
}

EstimateResult estimate(const SdeModel& model, const SimConfig& cfg, const Payoff& payoff,
                        const SamplingPlan& plan) {
  const SchemeKind scheme = cfg.scheme;
  const auto batch = run_batch(model, cfg.horizon, cfg.steps, cfg.x0, std::span(&scheme, 1),
                               std::span(&payoff, 1), plan);
  return batch.estimates[0][0];
}

}  // namespace extmil
