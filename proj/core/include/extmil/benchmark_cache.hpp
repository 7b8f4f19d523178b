#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "extmil/presets.hpp"

namespace extmil {

struct BenchmarkPoint {
  double strike = 0.0;
  double value = 0.0;
  double std_error = 0.0;
};

/// Reference prices per strike from a high-resolution Euler-Maruyama Monte
/// Carlo run, with the provenance needed to reproduce them.
struct BenchmarkTable {
  std::string key;
  std::uint64_t seed = 0;
  std::uint64_t paths = 0;
  std::size_t steps = 0;
  std::vector<BenchmarkPoint> points;

  /// Point whose strike equals `strike` up to 1e-12 relative; nullptr if absent.
  const BenchmarkPoint* find(double strike) const;
};

struct BenchmarkSettings {
  std::uint64_t paths = 1'000'000;
  std::size_t steps = 256;
  std::uint64_t seed = 20240101;
  unsigned threads = 1;
};

/// Cache key: model id, parameter fingerprint, payoff family, seed, M and n.
std::string benchmark_cache_key(const PresetModel& model, const BenchmarkSettings& settings);

/// EM, pseudo-random, `settings.paths` paths with `settings.steps` steps.
BenchmarkTable compute_benchmark(const PresetModel& model, std::span<const double> strikes,
                                 const BenchmarkSettings& settings);

/// One CSV per key:
///   # extmil-benchmark key=<key>
///   # scheme=em noise=mc seed=<seed> M=<paths> n=<steps>
///   K,value,stderr
class BenchmarkCache {
 public:
  explicit BenchmarkCache(std::filesystem::path directory);

  const std::filesystem::path& directory() const { return directory_; }
  std::filesystem::path file_for(const std::string& key) const;

  std::optional<BenchmarkTable> load(const std::string& key) const;
  void store(const BenchmarkTable& table) const;

 private:
  std::filesystem::path directory_;
};

/// Returns the cached table when it covers every strike; otherwise computes
/// the union of cached and requested strikes and stores it (when `cache` is
/// not null and `allow_compute` is set). Throws RuntimeFailure when the
/// table is missing and computing is not allowed.
BenchmarkTable benchmark(const PresetModel& model, std::span<const double> strikes,
                         const BenchmarkSettings& settings, const BenchmarkCache* cache,
                         bool allow_compute = true);

}  // namespace extmil
