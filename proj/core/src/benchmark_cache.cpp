#include "extmil/benchmark_cache.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "extmil/csv.hpp"
#include "extmil/errors.hpp"
#include "extmil/estimator.hpp"

namespace extmil {

namespace {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

bool same_strike(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

}  // namespace

const BenchmarkPoint* BenchmarkTable::find(double strike) const {
  for (const auto& point : points) {
    if (same_strike(point.strike, strike)) return &point;
  }
  return nullptr;
}

std::string benchmark_cache_key(const PresetModel& model, const BenchmarkSettings& settings) {
  return "model=" + model.id + ";params={" + model.fingerprint() + "};payoff=" + to_string(model.payoff_kind) +
         ";seed=" + std::to_string(settings.seed) + ";M=" + std::to_string(settings.paths) +
         ";n=" + std::to_string(settings.steps);
}

BenchmarkTable compute_benchmark(const PresetModel& model, std::span<const double> strikes,
                                 const BenchmarkSettings& settings) {
  require(!strikes.empty(), "benchmark: need at least one strike");
  std::vector<Payoff> payoffs;
  for (double k : strikes) payoffs.push_back(model.payoff(k));

  SamplingPlan plan;
  plan.kind = NoiseKind::PseudoRandom;
  plan.seed = settings.seed;
  plan.paths = settings.paths;
  plan.replications = 1;
  plan.threads = settings.threads;

  const SchemeKind scheme = SchemeKind::EulerMaruyama;
  const auto batch = run_batch(model.model, model.horizon, settings.steps, model.x0, std::span(&scheme, 1),
                               payoffs, plan);
  BenchmarkTable table;
  table.key = benchmark_cache_key(model, settings);
  table.seed = settings.seed;
  table.paths = settings.paths;
  table.steps = settings.steps;
  for (std::size_t i = 0; i < strikes.size(); ++i) {
    const auto& est = batch.estimates[0][i];
    table.points.push_back({strikes[i], est.mean, est.std_error});
  }
  return table;
}

BenchmarkCache::BenchmarkCache(std::filesystem::path directory) : directory_(std::move(directory)) {}

std::filesystem::path BenchmarkCache::file_for(const std::string& key) const {
  char name[64];
  std::snprintf(name, sizeof(name), "benchmark-%016llx.csv", static_cast<unsigned long long>(fnv1a(key)));
  return directory_ / name;
}

std::optional<BenchmarkTable> BenchmarkCache::load(const std::string& key) const {
  const auto path = file_for(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  const auto csv = read_csv_file(path.string());
  const std::string expected = "extmil-benchmark key=" + key;
  if (csv.comments.empty() || csv.comments.front() != expected) {
    throw RuntimeFailure("benchmark cache file '" + path.string() + "' does not match key " + key);
  }
  BenchmarkTable table;
  table.key = key;
  for (const auto& comment : csv.comments) {
    std::size_t pos = 0;
    while (pos < comment.size()) {
      const auto end = comment.find(' ', pos);
      const auto token = comment.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
      const auto eq = token.find('=');
      if (eq != std::string::npos) {
        const auto name = token.substr(0, eq);
        const auto value = token.substr(eq + 1);
        if (name == "seed") table.seed = std::stoull(value);
        if (name == "M") table.paths = std::stoull(value);
        if (name == "n") table.steps = std::stoull(value);
      }
      if (end == std::string::npos) break;
      pos = end + 1;
    }
  }
  const auto k = csv.column("K");
  const auto v = csv.column("value");
  const auto e = csv.column("stderr");
  for (const auto& row : csv.rows) {
    table.points.push_back({parse_double(row[k]), parse_double(row[v]), parse_double(row[e])});
  }
  return table;
}

void BenchmarkCache::store(const BenchmarkTable& table) const {
  CsvTable csv;
  csv.comments.push_back("extmil-benchmark key=" + table.key);
  csv.comments.push_back("scheme=em noise=mc seed=" + std::to_string(table.seed) + " M=" +
                         std::to_string(table.paths) + " n=" + std::to_string(table.steps));
  csv.header = {"K", "value", "stderr"};
  for (const auto& point : table.points) {
    csv.rows.push_back({format_double(point.strike), format_double(point.value), format_double(point.std_error)});
  }
  write_csv_file(file_for(table.key).string(), csv);
}

BenchmarkTable benchmark(const PresetModel& model, std::span<const double> strikes,
                         const BenchmarkSettings& settings, const BenchmarkCache* cache, bool allow_compute) {
  const auto key = benchmark_cache_key(model, settings);
  std::optional<BenchmarkTable> cached;
  if (cache) cached = cache->load(key);
  if (cached) {
    const bool covers = std::all_of(strikes.begin(), strikes.end(),
                                    [&](double k) { return cached->find(k) != nullptr; });
    if (covers) return *cached;
  }
  if (!allow_compute) {
    throw RuntimeFailure("no cached benchmark for " + key +
                         (cache ? " in " + cache->directory().string() : std::string()) +
                         "; rerun with --make-benchmark or run the 'benchmark' command first");
  }
  std::vector<double> all(strikes.begin(), strikes.end());
  if (cached) {
    for (const auto& point : cached->points) {
      if (std::none_of(all.begin(), all.end(), [&](double k) { return same_strike(k, point.strike); })) {
        all.push_back(point.strike);
      }
    }
  }
  std::sort(all.begin(), all.end());
  auto table = compute_benchmark(model, all, settings);
  if (cache) cache->store(table);
  return table;
}

}  // namespace extmil
