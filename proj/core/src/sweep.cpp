#include "extmil/sweep.hpp"

#include <algorithm>
#include <cmath>

#include "extmil/csv.hpp"
#include "extmil/errors.hpp"

namespace extmil {

double SupErrorRow::combined_std_error() const {
  return std::hypot(std_error, benchmark_std_error);
}

const SupErrorRow& SweepResult::sup_for(SchemeKind scheme, std::size_t n) const {
  for (const auto& row : sup) {
    if (row.scheme == scheme && row.n == n) return row;
  }
  throw ContractViolation("sweep has no row for scheme " + to_string(scheme) + ", n=" + std::to_string(n));
}

std::vector<double> strike_range(double start, double stop, double step) {
  require(step > 0.0, "strike range: step must be positive");
  require(stop >= start, "strike range: stop must not be below start");
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double k = start + static_cast<double>(i) * step;
    if (k > stop + 1e-9 * step) break;
    out.push_back(k);
  }
  return out;
}

std::vector<double> default_strikes() { return strike_range(10.0, 200.0, 10.0); }

SweepResult strike_sweep(const PresetModel& model, std::span<const SchemeKind> schemes,
                         std::span<const std::size_t> n_values, std::span<const double> strikes,
                         const SamplingPlan& plan, const BenchmarkTable& benchmark) {
  require(!schemes.empty() && !n_values.empty() && !strikes.empty(),
          "strike_sweep: schemes, n values and strikes must be non-empty");
  std::vector<const BenchmarkPoint*> reference;
  for (double k : strikes) {
    require(k > 0.0, "strike_sweep: strikes must be positive");
    const auto* point = benchmark.find(k);
    if (!point) throw RuntimeFailure("benchmark has no value for strike K=" + format_double(k));
    reference.push_back(point);
  }
  std::vector<Payoff> payoffs;
  for (double k : strikes) payoffs.push_back(model.payoff(k));

  SweepResult result;
  for (std::size_t n : n_values) {
    const auto batch = run_batch(model.model, model.horizon, n, model.x0, schemes, payoffs, plan);
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      for (std::size_t p = 0; p < strikes.size(); ++p) {
        const auto& est = batch.estimates[s][p];
        SweepRow row;
        row.scheme = schemes[s];
        row.n = n;
        row.strike = strikes[p];
        row.paths = est.paths_total;
        row.estimate = est.mean;
        row.std_error = est.std_error;
        row.benchmark = reference[p]->value;
        row.error = row.benchmark - row.estimate;
        result.rows.push_back(row);
      }
      result.audit.push_back(batch.audit[s]);
    }
    const auto summary = summarize_sup_errors(
        std::span(result.rows).last(schemes.size() * strikes.size()), &benchmark);
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      auto row = summary[s];
      row.paths_invalid = batch.estimates[s][0].paths_invalid;
      result.sup.push_back(row);
    }
  }
  return result;
}

std::vector<SupErrorRow> summarize_sup_errors(std::span<const SweepRow> rows, const BenchmarkTable* benchmark) {
  std::vector<SupErrorRow> out;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const SupErrorRow& s) { return s.scheme == row.scheme && s.n == row.n; });
    if (it == out.end()) {
      SupErrorRow fresh;
      fresh.scheme = row.scheme;
      fresh.n = row.n;
      fresh.paths = row.paths;
      fresh.sup_abs_error = -1.0;
      out.push_back(fresh);
      it = std::prev(out.end());
    }
    const double magnitude = std::abs(row.error);
    if (magnitude > it->sup_abs_error) {
      it->sup_abs_error = magnitude;
      it->argmax_strike = row.strike;
      it->std_error = row.std_error;
      const auto* point = benchmark ? benchmark->find(row.strike) : nullptr;
      it->benchmark_std_error = point ? point->std_error : 0.0;
    }
  }
  return out;
}

CsvTable sweep_to_csv(const SweepResult& result) {
  CsvTable table;
  table.header = {"scheme", "n", "K", "M", "estimate", "stderr", "benchmark", "error"};
  for (const auto& row : result.rows) {
    table.rows.push_back({to_string(row.scheme), std::to_string(row.n), format_double(row.strike),
                          std::to_string(row.paths), format_double(row.estimate), format_double(row.std_error),
                          format_double(row.benchmark), format_double(row.error)});
  }
  return table;
}

namespace {

SchemeKind scheme_field(const std::string& text) {
  const auto scheme = parse_scheme(text);
  if (!scheme) throw RuntimeFailure("unknown scheme '" + text + "' in CSV");
  return *scheme;
}

}  // namespace

std::vector<SweepRow> sweep_rows_from_csv(const CsvTable& table) {
  const auto c_scheme = table.column("scheme"), c_n = table.column("n"), c_k = table.column("K"),
             c_m = table.column("M"), c_est = table.column("estimate"), c_se = table.column("stderr"),
             c_bench = table.column("benchmark"), c_err = table.column("error");
  std::vector<SweepRow> rows;
  for (const auto& fields : table.rows) {
    SweepRow row;
    row.scheme = scheme_field(fields[c_scheme]);
    row.n = std::stoull(fields[c_n]);
    row.strike = parse_double(fields[c_k]);
    row.paths = std::stoull(fields[c_m]);
    row.estimate = parse_double(fields[c_est]);
    row.std_error = parse_double(fields[c_se]);
    row.benchmark = parse_double(fields[c_bench]);
    row.error = parse_double(fields[c_err]);
    rows.push_back(row);
  }
  return rows;
}

CsvTable sup_errors_to_csv(std::span<const SupErrorRow> rows) {
  CsvTable table;
  table.header = {"scheme", "n", "M", "sup_abs_error", "argmax_K", "stderr", "benchmark_stderr", "combined_stderr"};
  for (const auto& row : rows) {
    table.rows.push_back({to_string(row.scheme), std::to_string(row.n), std::to_string(row.paths),
                          format_double(row.sup_abs_error), format_double(row.argmax_strike),
                          format_double(row.std_error), format_double(row.benchmark_std_error),
                          format_double(row.combined_std_error())});
  }
  return table;
}

std::vector<SupErrorRow> sup_errors_from_csv(const CsvTable& table) {
  const auto c_scheme = table.column("scheme"), c_n = table.column("n"), c_sup = table.column("sup_abs_error");
  const auto has = [&](const char* name) {
    return std::find(table.header.begin(), table.header.end(), name) != table.header.end();
  };
  std::vector<SupErrorRow> rows;
  for (const auto& fields : table.rows) {
    SupErrorRow row;
    row.scheme = scheme_field(fields[c_scheme]);
    row.n = std::stoull(fields[c_n]);
    row.sup_abs_error = parse_double(fields[c_sup]);
    if (has("M")) row.paths = std::stoull(fields[table.column("M")]);
    if (has("argmax_K")) row.argmax_strike = parse_double(fields[table.column("argmax_K")]);
    if (has("stderr")) row.std_error = parse_double(fields[table.column("stderr")]);
    if (has("benchmark_stderr")) row.benchmark_std_error = parse_double(fields[table.column("benchmark_stderr")]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace extmil
