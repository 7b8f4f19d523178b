#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "extmil/benchmark_cache.hpp"
#include "extmil/csv.hpp"
#include "extmil/estimator.hpp"
#include "extmil/presets.hpp"

namespace extmil {

struct SweepRow {
  SchemeKind scheme = SchemeKind::EulerMaruyama;
  std::size_t n = 0;
  double strike = 0.0;
  std::uint64_t paths = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double benchmark = 0.0;
  double error = 0.0;  // benchmark - estimate
};

/// sup over strikes of |benchmark - estimate| for one (scheme, n), with the
/// error bars at the maximizing strike.
struct SupErrorRow {
  SchemeKind scheme = SchemeKind::EulerMaruyama;
  std::size_t n = 0;
  std::uint64_t paths = 0;
  double sup_abs_error = 0.0;
  double argmax_strike = 0.0;
  double std_error = 0.0;            // estimator stderr at argmax
  double benchmark_std_error = 0.0;  // benchmark stderr at argmax
  std::uint64_t paths_invalid = 0;

  double combined_std_error() const;
};

struct SweepResult {
  std::vector<SweepRow> rows;        // ordered by n, then scheme, then strike
  std::vector<SupErrorRow> sup;      // ordered by n, then scheme
  std::vector<NoiseAudit> audit;     // parallel to `sup`

  const SupErrorRow& sup_for(SchemeKind scheme, std::size_t n) const;
};

/// Strike grid start, start+step, ..., up to and including stop (within 1e-9 step).
std::vector<double> strike_range(double start, double stop, double step);
/// 10, 20, ..., 200.
std::vector<double> default_strikes();

/// Estimates every (scheme, n, strike) with common random numbers across
/// schemes, and tabulates errors against the benchmark. Throws
/// RuntimeFailure when the benchmark lacks a requested strike.
SweepResult strike_sweep(const PresetModel& model, std::span<const SchemeKind> schemes,
                         std::span<const std::size_t> n_values, std::span<const double> strikes,
                         const SamplingPlan& plan, const BenchmarkTable& benchmark);

/// Recomputes the sup-error table from sweep rows and benchmark stderrs
/// (used when re-reading a sweep CSV).
std::vector<SupErrorRow> summarize_sup_errors(std::span<const SweepRow> rows, const BenchmarkTable* benchmark);

CsvTable sweep_to_csv(const SweepResult& result);
std::vector<SweepRow> sweep_rows_from_csv(const CsvTable& table);
CsvTable sup_errors_to_csv(std::span<const SupErrorRow> rows);
std::vector<SupErrorRow> sup_errors_from_csv(const CsvTable& table);

}  // namespace extmil
