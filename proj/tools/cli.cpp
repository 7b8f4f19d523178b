#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "extmil/benchmark_cache.hpp"
#include "extmil/calculus.hpp"
#include "extmil/convergence.hpp"
#include "extmil/csv.hpp"
#include "extmil/epsilon_study.hpp"
#include "extmil/errors.hpp"
#include "extmil/estimator.hpp"
#include "extmil/philox.hpp"
#include "extmil/presets.hpp"
#include "extmil/sweep.hpp"

#ifndef EXTMIL_VERSION
#define EXTMIL_VERSION "0.3.0"
#endif

namespace extmil::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  UsageError(const std::string& flag, const std::string& message)
      : std::runtime_error(flag.empty() ? message : flag + ": " + message) {}
};

using Job = std::function<int()>;

std::string fmt(double v, int precision = 7) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

std::string join(const std::vector<std::string>& parts, const char* sep = ",") {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : sep) + p;
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

double number(const std::string& flag, const std::string& text) {
  try {
    return parse_double(text);
  } catch (const std::exception&) {
    throw UsageError(flag, "'" + text + "' is not a number");
  }
}

std::size_t count(const std::string& flag, const std::string& text) {
  const double v = number(flag, text);
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e15) throw UsageError(flag, "'" + text + "' is not a positive integer");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> parse_counts(const std::string& flag, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& part : split(text, ',')) out.push_back(count(flag, part));
  if (out.empty()) throw UsageError(flag, "expected a comma-separated list of positive integers");
  return out;
}

std::vector<double> parse_strikes(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw UsageError(flag, "range must be start:stop:step");
    const double start = number(flag, parts[0]), stop = number(flag, parts[1]), step = number(flag, parts[2]);
    if (!(step > 0.0)) throw UsageError(flag, "range step must be positive");
    if (stop < start) throw UsageError(flag, "range stop must not be below start");
    out = strike_range(start, stop, step);
  } else {
    for (const auto& part : split(text, ',')) out.push_back(number(flag, part));
  }
  if (out.empty()) throw UsageError(flag, "no strikes given");
  for (double k : out) {
    if (!(k > 0.0)) throw UsageError(flag, "strike must be positive (got " + fmt(k) + ")");
  }
  return out;
}

std::vector<SchemeKind> parse_schemes(const std::string& flag, const std::string& text) {
  std::vector<SchemeKind> out;
  for (const auto& part : split(text, ',')) {
    const auto s = parse_scheme(part);
    if (!s) throw UsageError(flag, "unknown scheme '" + part + "' (expected one of " + std::string(kSchemeNames) + ")");
    if (std::find(out.begin(), out.end(), *s) != out.end()) throw UsageError(flag, "scheme '" + part + "' listed twice");
    out.push_back(*s);
  }
  if (out.empty()) throw UsageError(flag, "no schemes given");
  return out;
}

std::string list_of(const std::vector<double>& values) {
  std::vector<std::string> parts;
  for (double v : values) parts.push_back(format_double(v));
  return join(parts);
}

std::string list_of(const std::vector<std::size_t>& values) {
  std::vector<std::string> parts;
  for (auto v : values) parts.push_back(std::to_string(v));
  return join(parts);
}

std::string list_of(const std::vector<SchemeKind>& values) {
  std::vector<std::string> parts;
  for (auto v : values) parts.push_back(to_string(v));
  return join(parts);
}

std::string point_text(std::span<const double> x) {
  std::vector<std::string> parts;
  for (double v : x) parts.push_back(fmt(v));
  return "(" + join(parts, ", ") + ")";
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write " + tmp.string());
    out << text;
    if (!out) throw RuntimeFailure("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Options

struct GlobalOptions {
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out;
  bool qmc = false;
  bool mc = false;
  bool paper_scale = false;
};

struct ModelOptions {
  std::string model;
  std::vector<std::string> sets;
  std::string payoff;
};

struct PlanOptions {
  std::string paths;
  std::string reps = "16";
};

struct BenchOptions {
  std::string cache_dir = "extmil-cache";
  std::string paths;
  std::string steps;
  std::uint64_t seed = 20240101;
  bool make = false;
};

void add_model_options(CLI::App* cmd, ModelOptions& m, bool with_payoff = true) {
  cmd->add_option("--model", m.model, "Preset id: bs-asian, heston-asian, gbm, small-diffusion")->required();
  cmd->add_option("--set", m.sets, "Override a preset parameter, name=value (repeatable)");
  if (with_payoff) cmd->add_option("--payoff", m.payoff, "asian-call or asian-digital (default: preset's)");
}

void add_plan_options(CLI::App* cmd, PlanOptions& p) {
  cmd->add_option("--paths", p.paths, "Paths per replication (default 1e5; 1e6 with --paper-scale)");
  cmd->add_option("--reps", p.reps, "QMC replications (default 16)");
}

void add_bench_options(CLI::App* cmd, BenchOptions& b, bool with_make) {
  cmd->add_option("--cache-dir", b.cache_dir, "Benchmark cache directory");
  cmd->add_option("--bench-paths", b.paths, "Benchmark paths (default 1e6; 1e7 with --paper-scale)");
  cmd->add_option("--bench-n", b.steps, "Benchmark steps (default 256; 1024/2048 with --paper-scale)");
  cmd->add_option("--bench-seed", b.seed, "Benchmark seed");
  if (with_make) cmd->add_flag("--make-benchmark", b.make, "Compute the benchmark when it is not cached");
}

// Resolved settings shared by several commands.
struct Setup {
  PresetModel model;
  Manifest manifest;
};

Setup resolve_model(const ModelOptions& m, const std::string& command) {
  const auto ids = preset_ids();
  if (std::find(ids.begin(), ids.end(), m.model) == ids.end()) {
    throw UsageError("--model", "unknown model '" + m.model + "' (known: " + join(ids, ", ") + ")");
  }
  ParameterSet overrides;
  for (const auto& s : m.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set", "expected name=value, got '" + s + "'");
    overrides[s.substr(0, eq)] = number("--set", s.substr(eq + 1));
  }
  Setup setup{[&] {
                try {
                  return preset(m.model, overrides);
                } catch (const ContractViolation& e) {
                  throw UsageError(m.sets.empty() ? "--model" : "--set", e.what());
                }
              }(),
              {}};
  if (!m.payoff.empty()) {
    const auto kind = parse_payoff(m.payoff);
    if (!kind) throw UsageError("--payoff", "unknown payoff '" + m.payoff + "' (expected one of {asian-call, asian-digital})");
    setup.model.payoff_kind = *kind;
  }
  auto& mf = setup.manifest;
  mf["command"] = command;
  mf["extmil_version"] = EXTMIL_VERSION;
  mf["timestamp"] = timestamp_utc();
  mf["model"] = m.model;
  for (const auto& [name, value] : setup.model.parameters) mf["set." + name] = format_double(value);
  mf["payoff"] = to_string(setup.model.payoff_kind);
  return setup;
}

SamplingPlan resolve_plan(const GlobalOptions& g, const PlanOptions& p, Manifest& mf,
                          std::uint64_t desk_paths, std::uint64_t paper_paths) {
  if (g.qmc && g.mc) throw UsageError("--qmc", "--qmc and --mc are mutually exclusive");
  SamplingPlan plan;
  plan.kind = g.mc ? NoiseKind::PseudoRandom : NoiseKind::RandomizedSobol;
  plan.seed = g.seed;
  plan.threads = g.threads;
  plan.paths = p.paths.empty() ? (g.paper_scale ? paper_paths : desk_paths) : count("--paths", p.paths);
  const auto reps = count("--reps", p.reps);
  if (reps > 1'000'000) throw UsageError("--reps", "too many replications");
  plan.replications = static_cast<std::uint32_t>(reps);
  if (plan.kind == NoiseKind::PseudoRandom) {
    if (plan.total_paths() < 2) throw UsageError("--paths", "Monte Carlo needs at least 2 paths");
  } else if (plan.replications < 2) {
    throw UsageError("--reps", "randomized QMC needs at least 2 replications");
  }
  mf[plan.kind == NoiseKind::PseudoRandom ? "mc" : "qmc"] = "true";
  mf["seed"] = std::to_string(plan.seed);
  mf["paths"] = std::to_string(plan.paths);
  mf["reps"] = std::to_string(plan.replications);
  return plan;
}

std::size_t paper_bench_steps(const PresetModel& model) { return model.id == "heston-asian" ? 2048 : 1024; }

BenchmarkSettings resolve_bench(const GlobalOptions& g, const BenchOptions& b, const PresetModel& model,
                                Manifest& mf) {
  BenchmarkSettings s;
  s.paths = b.paths.empty() ? (g.paper_scale ? 10'000'000 : 1'000'000) : count("--bench-paths", b.paths);
  if (s.paths < 2) throw UsageError("--bench-paths", "benchmark needs at least 2 paths");
  s.steps = b.steps.empty() ? (g.paper_scale ? paper_bench_steps(model) : 256) : count("--bench-n", b.steps);
  s.seed = b.seed;
  s.threads = g.threads;
  if (b.cache_dir.empty()) throw UsageError("--cache-dir", "must not be empty");
  mf["bench-paths"] = std::to_string(s.paths);
  mf["bench-n"] = std::to_string(s.steps);
  mf["bench-seed"] = std::to_string(s.seed);
  mf["cache-dir"] = b.cache_dir;
  return s;
}

std::vector<double> default_strikes_for(const PresetModel& model) {
  if (model.id == "small-diffusion") return strike_range(0.35, 0.95, 0.05);
  return default_strikes();
}

fs::path output_dir(const GlobalOptions& g) { return g.out.empty() ? fs::path(".") : fs::path(g.out); }

void finish_manifest(Manifest& mf, const GlobalOptions& g) {
  mf["threads"] = std::to_string(g.threads);
  if (!g.out.empty()) mf["out"] = g.out;
  if (g.paper_scale) mf["paper-scale"] = "true";
}

void print_estimate(std::ostream& out, const std::string& label, const EstimateResult& r) {
  out << label << fmt(r.mean, 10) << " +/- " << fmt(r.std_error, 3) << "  (M=" << r.paths_total;
  if (r.replications > 1) out << " in " << r.replications << " replications";
  out << ", invalid=" << r.paths_invalid;
  if (r.negative_steps) out << ", negative-variance steps=" << r.negative_steps;
  out << ")\n";
}

void print_sup_table(std::ostream& out, std::span<const SupErrorRow> rows) {
  out << "scheme      n   sup|error|     argmax K   stderr(comb)\n";
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %3zu  %-13s %-10s %s\n", to_string(r.scheme).c_str(), r.n,
                  fmt(r.sup_abs_error, 6).c_str(), fmt(r.argmax_strike, 6).c_str(),
                  fmt(r.combined_std_error(), 3).c_str());
    out << line;
  }
}

void print_convergence(std::ostream& out, std::span<const SupErrorRow> rows) {
  std::vector<SchemeKind> schemes;
  for (const auto& r : rows) {
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) schemes.push_back(r.scheme);
  }
  for (auto scheme : schemes) {
    const auto series = sup_error_series(rows, scheme);
    out << "order " << to_string(scheme) << ": ";
    try {
      const auto fit = convergence_order(series);
      out << fmt(fit.order(), 4) << " (slope " << fmt(fit.slope, 4) << ", " << fit.points_used << " points";
      if (fit.points_excluded) out << ", " << fit.points_excluded << " non-positive excluded";
      out << ")\n";
    } catch (const std::exception& e) {
      out << "n/a (" << e.what() << ")\n";
    }
  }
  const bool has_pair = std::find(schemes.begin(), schemes.end(), SchemeKind::ExtendedMilstein) != schemes.end() &&
                        std::find(schemes.begin(), schemes.end(), SchemeKind::EulerMaruyama) != schemes.end();
  if (!has_pair) return;
  out << "n   extended/em   stderr    gap/stderr\n";
  for (const auto& r : scheme_ratios(rows, SchemeKind::ExtendedMilstein, SchemeKind::EulerMaruyama)) {
    char line[128];
    std::snprintf(line, sizeof line, "%-3zu %-13s %-9s %s\n", r.n, fmt(r.ratio, 4).c_str(), fmt(r.std_error, 2).c_str(),
                  r.gap_std_error > 0 ? fmt(r.gap / r.gap_std_error, 3).c_str() : "inf");
    out << line;
  }
}

// ---------------------------------------------------------------------------
// Commands

struct PriceOptions {
  ModelOptions model;
  PlanOptions plan;
  std::string scheme = "extended";
  std::string strike;
  std::string steps = "16";
};

Job prepare_price(const GlobalOptions& g, const PriceOptions& o, std::ostream& out) {
  auto setup = resolve_model(o.model, "price");
  auto& mf = setup.manifest;
  const auto scheme = parse_scheme(o.scheme);
  if (!scheme) throw UsageError("--scheme", "unknown scheme '" + o.scheme + "' (expected one of " + std::string(kSchemeNames) + ")");
  double strike = 0.0;
  if (o.strike.empty()) {
    strike = setup.model.id == "small-diffusion" ? small_diffusion_law(setup.model).mean / setup.model.horizon
                                                 : setup.model.parameters.at("S0");
  } else {
    strike = number("--strike", o.strike);
    if (!(strike > 0.0)) throw UsageError("--strike", "strike must be positive (got " + o.strike + ")");
  }
  const auto n = count("--n", o.steps);
  auto plan = resolve_plan(g, o.plan, mf, 100'000, 1'000'000);
  if (plan.kind == NoiseKind::RandomizedSobol && n * setup.model.model.noise_dim() > SobolSequence::kMaxDimensions) {
    throw UsageError("--n", "n*d exceeds the Sobol dimension limit " + std::to_string(SobolSequence::kMaxDimensions) + "; use --mc");
  }
  mf["scheme"] = to_string(*scheme);
  mf["strike"] = format_double(strike);
  mf["n"] = std::to_string(n);
  finish_manifest(mf, g);

  return [=, &out, setup = std::move(setup)]() mutable {
    SimConfig cfg{setup.model.horizon, n, setup.model.x0, *scheme};
    const auto payoff = setup.model.payoff(strike);
    const auto r = estimate(setup.model.model, cfg, payoff, plan);
    out << setup.model.id << " " << to_string(*scheme) << " " << to_string(payoff.kind) << " K=" << fmt(strike)
        << " n=" << n << " " << to_string(plan.kind) << "\n";
    print_estimate(out, "estimate ", r);
    if (!g.out.empty()) {
      const auto dir = output_dir(g);
      CsvTable table;
      table.header = {"model", "scheme", "payoff", "n", "K", "M", "estimate", "stderr", "invalid"};
      table.rows.push_back({setup.model.id, to_string(*scheme), to_string(payoff.kind), std::to_string(n),
                            format_double(strike), std::to_string(r.paths_total), format_double(r.mean),
                            format_double(r.std_error), std::to_string(r.paths_invalid)});
      write_csv_file((dir / "price.csv").string(), table);
      setup.manifest["output.price"] = (dir / "price.csv").string();
      write_text_file(dir / "manifest.txt", render_manifest(setup.manifest));
    }
    return kExitOk;
  };
}

struct SweepOptions {
  ModelOptions model;
  PlanOptions plan;
  BenchOptions bench;
  std::string schemes = "em,tmilstein,extended";
  std::string steps = "2,4,8,16";
  std::string strikes;
  std::string input;  // convergence only
};

struct SweepSetup {
  Setup base;
  std::vector<SchemeKind> schemes;
  std::vector<std::size_t> n_values;
  std::vector<double> strikes;
  SamplingPlan plan;
  BenchmarkSettings bench;
  bool make_benchmark = false;
};

SweepSetup resolve_sweep(const GlobalOptions& g, const SweepOptions& o, const std::string& command) {
  SweepSetup s{resolve_model(o.model, command), {}, {}, {}, {}, {}, o.bench.make};
  auto& mf = s.base.manifest;
  s.schemes = parse_schemes("--schemes", o.schemes);
  s.n_values = parse_counts("--n", o.steps);
  s.strikes = o.strikes.empty() ? default_strikes_for(s.base.model) : parse_strikes("--strikes", o.strikes);
  s.plan = resolve_plan(g, o.plan, mf, 100'000, 1'000'000);
  if (s.plan.kind == NoiseKind::RandomizedSobol) {
    for (auto n : s.n_values) {
      if (n * s.base.model.model.noise_dim() > SobolSequence::kMaxDimensions) {
        throw UsageError("--n", "n*d exceeds the Sobol dimension limit " +
                                    std::to_string(SobolSequence::kMaxDimensions) + "; use --mc");
      }
    }
  }
  s.bench = resolve_bench(g, o.bench, s.base.model, mf);
  mf["schemes"] = list_of(s.schemes);
  mf["n"] = list_of(s.n_values);
  mf["strikes"] = list_of(s.strikes);
  if (s.make_benchmark) mf["make-benchmark"] = "true";
  finish_manifest(mf, g);
  return s;
}

SweepResult execute_sweep(SweepSetup& s, std::ostream& out) {
  BenchmarkCache cache(s.base.manifest.at("cache-dir"));
  const auto key = benchmark_cache_key(s.base.model, s.bench);
  const bool cached = [&] {
    const auto t = cache.load(key);
    if (!t) return false;
    return std::all_of(s.strikes.begin(), s.strikes.end(), [&](double k) { return t->find(k) != nullptr; });
  }();
  if (!cached && s.make_benchmark) {
    out << "computing benchmark (EM, M=" << s.bench.paths << ", n=" << s.bench.steps << ") ...\n";
  }
  const auto table = benchmark(s.base.model, s.strikes, s.bench, &cache, s.make_benchmark);
  s.base.manifest["benchmark"] = cache.file_for(key).string();
  return strike_sweep(s.base.model, s.schemes, s.n_values, s.strikes, s.plan, table);
}

Job prepare_sweep(const GlobalOptions& g, const SweepOptions& o, std::ostream& out) {
  auto s = resolve_sweep(g, o, "sweep");
  return [=, &out, s = std::move(s)]() mutable {
    const auto result = execute_sweep(s, out);
    const auto dir = output_dir(g);
    const auto sweep_path = dir / "sweep.csv";
    const auto sup_path = dir / "sup_errors.csv";
    write_csv_file(sweep_path.string(), sweep_to_csv(result));
    write_csv_file(sup_path.string(), sup_errors_to_csv(result.sup));
    s.base.manifest["output.sweep"] = sweep_path.string();
    s.base.manifest["output.sup"] = sup_path.string();
    write_text_file(dir / "manifest.txt", render_manifest(s.base.manifest));
    print_sup_table(out, result.sup);
    out << "wrote " << sweep_path.string() << ", " << sup_path.string() << "\n";
    return kExitOk;
  };
}

Job prepare_convergence(const GlobalOptions& g, const SweepOptions& o, std::ostream& out) {
  if (!o.input.empty()) {
    if (!fs::exists(o.input)) throw UsageError("--in", "no such file '" + o.input + "'");
    const std::string input = o.input;
    return [=, &out] {
      std::vector<SupErrorRow> rows;
      const auto table = read_csv_file(input);
      const bool per_strike = std::find(table.header.begin(), table.header.end(), "K") != table.header.end();
      if (per_strike) {
        const auto sweep_rows = sweep_rows_from_csv(table);
        rows = summarize_sup_errors(sweep_rows, nullptr);
      } else {
        rows = sup_errors_from_csv(table);
      }
      print_convergence(out, rows);
      return kExitOk;
    };
  }
  auto s = resolve_sweep(g, o, "convergence");
  return [=, &out, s = std::move(s)]() mutable {
    const auto result = execute_sweep(s, out);
    print_sup_table(out, result.sup);
    print_convergence(out, result.sup);
    if (!g.out.empty()) {
      const auto dir = output_dir(g);
      write_csv_file((dir / "sweep.csv").string(), sweep_to_csv(result));
      write_csv_file((dir / "sup_errors.csv").string(), sup_errors_to_csv(result.sup));
      s.base.manifest["output.sweep"] = (dir / "sweep.csv").string();
      s.base.manifest["output.sup"] = (dir / "sup_errors.csv").string();
      write_text_file(dir / "manifest.txt", render_manifest(s.base.manifest));
    }
    return kExitOk;
  };
}

struct BenchmarkOptions {
  ModelOptions model;
  BenchOptions bench;
  std::string strikes;
};

Job prepare_benchmark(const GlobalOptions& g, const BenchmarkOptions& o, std::ostream& out) {
  auto setup = resolve_model(o.model, "benchmark");
  const auto strikes = o.strikes.empty() ? default_strikes_for(setup.model) : parse_strikes("--strikes", o.strikes);
  const auto settings = resolve_bench(g, o.bench, setup.model, setup.manifest);
  setup.manifest["strikes"] = list_of(strikes);
  finish_manifest(setup.manifest, g);
  return [=, &out, setup = std::move(setup)]() mutable {
    BenchmarkCache cache(o.bench.cache_dir);
    const auto table = benchmark(setup.model, strikes, settings, &cache, true);
    const auto path = cache.file_for(table.key);
    out << "benchmark " << setup.model.id << " (EM, M=" << table.paths << ", n=" << table.steps
        << ", seed=" << table.seed << ") -> " << path.string() << "\n";
    for (double k : strikes) {
      const auto* p = table.find(k);
      out << "K=" << fmt(k) << "  " << fmt(p->value, 10) << " +/- " << fmt(p->std_error, 3) << "\n";
    }
    if (!g.out.empty()) {
      setup.manifest["output.benchmark"] = path.string();
      write_text_file(output_dir(g) / "manifest.txt", render_manifest(setup.manifest));
    }
    return kExitOk;
  };
}

struct CheckOptions {
  ModelOptions model;
  std::size_t samples = 0;
};

std::vector<StateVector> sample_points(const PresetModel& model, std::size_t extra, std::uint64_t seed) {
  std::vector<StateVector> points{model.x0};
  for (std::size_t p = 0; p < extra; ++p) {
    StateVector x = model.x0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto bits = Philox4x32::generate({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(p), 0x43484b, 0},
                                             {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
      const double z = 2.0 * bits_to_open_unit((std::uint64_t{bits[0]} << 32) | bits[1]) - 1.0;
      x[i] = x[i] > 0.0 ? x[i] * std::exp(0.5 * z) : x[i] + z;
    }
    points.push_back(std::move(x));
  }
  return points;
}

Job prepare_check(const GlobalOptions& g, const CheckOptions& o, std::ostream& out) {
  auto setup = resolve_model(o.model, "check");
  if (o.samples > 1'000'000) throw UsageError("--samples", "at most 1000000 extra points");
  const auto points = sample_points(setup.model, o.samples, g.seed);
  return [=, &out, setup = std::move(setup)] {
    const auto& model = setup.model.model;
    const auto report = commutativity_check(model, points);
    double phi3_max = 0.0;
    std::size_t arg_i = 0, arg_j = 0;
    StateVector phi3_at = points.front();
    for (const auto& x : points) {
      const auto c = phi3_coefficient_tensor(model, x);
      for (std::size_t i = 0; i < c.rows(); ++i) {
        for (std::size_t j = 0; j < c.cols(); ++j) {
          if (std::abs(c(i, j)) > phi3_max) {
            phi3_max = std::abs(c(i, j));
            arg_i = i;
            arg_j = j;
            phi3_at = x;
          }
        }
      }
    }
    out << "model: " << setup.model.id << " (N=" << model.state_dim() << ", d=" << model.noise_dim()
        << ", points=" << report.sample_count << ")\n";
    out << "commutative: " << (report.commutative ? "true" : "false") << ", max defect " << fmt(report.max_defect)
        << " at " << point_text(report.witness_point) << ", phi3 max: " << fmt(phi3_max);
    if (phi3_max > 0.0) out << " (C" << arg_i + 1 << arg_j + 1 << " at " << point_text(phi3_at) << ")";
    out << "\n";
    return kExitOk;
  };
}

struct EpsilonOptions {
  PlanOptions plan;
  std::vector<std::string> sets;
  std::string eps = "0.4,0.2,0.1";
  std::string steps = "8";
  std::string payoff = "asian-digital";
};

Job prepare_epsilon(const GlobalOptions& g, const EpsilonOptions& o, std::ostream& out) {
  ModelOptions m{"small-diffusion", o.sets, o.payoff};
  auto setup = resolve_model(m, "epsilon");
  auto& mf = setup.manifest;
  EpsilonStudyConfig config;
  config.eps_values.clear();
  for (const auto& part : split(o.eps, ',')) {
    const double e = number("--eps", part);
    if (!(e >= 0.0 && e < 1.0)) throw UsageError("--eps", "eps must lie in [0, 1) (got " + part + ")");
    config.eps_values.push_back(e);
  }
  if (config.eps_values.empty()) throw UsageError("--eps", "no values given");
  config.steps = count("--n", o.steps);
  config.payoff = setup.model.payoff_kind;
  for (const auto& [name, value] : setup.model.parameters) {
    if (name != "eps") config.overrides[name] = value;
  }
  mf.erase("set.eps");
  mf.erase("model");
  mf["eps"] = list_of(config.eps_values);
  mf["n"] = std::to_string(config.steps);
  const auto plan = resolve_plan(g, o.plan, mf, 100'000, 1'000'000);
  if (plan.kind == NoiseKind::RandomizedSobol && config.steps > SobolSequence::kMaxDimensions) {
    throw UsageError("--n", "n exceeds the Sobol dimension limit; use --mc");
  }
  finish_manifest(mf, g);
  return [=, &out, setup = std::move(setup)]() mutable {
    const auto result = epsilon_study(config, plan);
    out << "eps     scheme      sup|error|    stderr\n";
    for (const auto& row : result.rows) {
      char line[128];
      std::snprintf(line, sizeof line, "%-7s %-10s  %-13s %s\n", fmt(row.eps, 4).c_str(),
                    to_string(row.sup.scheme).c_str(), fmt(row.sup.sup_abs_error, 6).c_str(),
                    fmt(row.sup.std_error, 3).c_str());
      out << line;
    }
    for (const auto& r : result.ratios) {
      out << "eps=" << fmt(r.eps, 4) << "  extended/em = " << fmt(r.ratio, 4) << " +/- " << fmt(r.std_error, 2) << "\n";
    }
    if (!g.out.empty()) {
      const auto dir = output_dir(g);
      write_csv_file((dir / "epsilon.csv").string(), epsilon_rows_to_csv(result));
      write_csv_file((dir / "epsilon_ratios.csv").string(), epsilon_ratios_to_csv(result));
      setup.manifest["output.epsilon"] = (dir / "epsilon.csv").string();
      setup.manifest["output.ratios"] = (dir / "epsilon_ratios.csv").string();
      write_text_file(dir / "manifest.txt", render_manifest(setup.manifest));
    }
    return kExitOk;
  };
}

// ---------------------------------------------------------------------------

int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err, int depth);

struct ReplayOptions {
  std::string manifest;
};

Job prepare_replay(const GlobalOptions& g, const CLI::App& cmd, const ReplayOptions& o, std::ostream& out,
                   std::ostream& err, int depth) {
  if (depth > 0) throw UsageError("--manifest", "a manifest cannot replay another replay");
  if (!fs::exists(o.manifest)) throw UsageError("--manifest", "no such file '" + o.manifest + "'");
  Manifest mf;
  try {
    mf = read_manifest(o.manifest);
  } catch (const std::exception& e) {
    throw UsageError("--manifest", e.what());
  }
  if (!mf.count("command")) throw UsageError("--manifest", "missing 'command' entry");
  const auto* parent = cmd.get_parent();
  if (parent->count("--threads")) mf["threads"] = std::to_string(g.threads);
  if (parent->count("--out")) mf["out"] = g.out;
  auto args = manifest_to_args(mf);
  return [=, &out, &err] { return dispatch(args, out, err, depth + 1); };
}

int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err, int depth) {
  CLI::App app{"Weak approximation of Ito SDEs: Euler-Maruyama, truncated and extended Milstein", "extmil"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", EXTMIL_VERSION);

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for the sampling noise");
  app.add_option("--threads", g.threads, "Worker threads (default: hardware concurrency)");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--qmc", g.qmc, "Randomized Sobol sampling (default)");
  app.add_flag("--mc", g.mc, "Pseudo-random sampling");
  app.add_flag("--paper-scale", g.paper_scale, "Use the paper's path and benchmark budgets");

  PriceOptions price;
  auto* c_price = app.add_subcommand("price", "Estimate one option price");
  add_model_options(c_price, price.model);
  add_plan_options(c_price, price.plan);
  c_price->add_option("--scheme", price.scheme, "em, tmilstein or extended");
  c_price->add_option("--strike", price.strike, "Strike K (default: at the money)");
  c_price->add_option("--n", price.steps, "Time steps");

  SweepOptions sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Errors against the benchmark over schemes, n and strikes");
  add_model_options(c_sweep, sweep.model);
  add_plan_options(c_sweep, sweep.plan);
  add_bench_options(c_sweep, sweep.bench, true);
  c_sweep->add_option("--schemes", sweep.schemes, "Comma-separated schemes");
  c_sweep->add_option("--n", sweep.steps, "Comma-separated step counts");
  c_sweep->add_option("--strikes", sweep.strikes, "start:stop:step (inclusive) or a comma list");

  SweepOptions conv;
  auto* c_conv = app.add_subcommand("convergence", "Fitted weak orders and extended/EM error ratios");
  c_conv->add_option("--in", conv.input, "Existing sweep.csv or sup_errors.csv");
  add_model_options(c_conv, conv.model);
  c_conv->get_option("--model")->required(false);
  add_plan_options(c_conv, conv.plan);
  add_bench_options(c_conv, conv.bench, true);
  c_conv->add_option("--schemes", conv.schemes, "Comma-separated schemes");
  c_conv->add_option("--n", conv.steps, "Comma-separated step counts");
  c_conv->add_option("--strikes", conv.strikes, "start:stop:step (inclusive) or a comma list");

  BenchmarkOptions bench;
  auto* c_bench = app.add_subcommand("benchmark", "Compute and cache EM reference prices");
  add_model_options(c_bench, bench.model);
  add_bench_options(c_bench, bench.bench, false);
  c_bench->add_option("--strikes", bench.strikes, "start:stop:step (inclusive) or a comma list");

  CheckOptions check;
  auto* c_check = app.add_subcommand("check", "Commutativity diagnosis and leading-error tensor");
  add_model_options(c_check, check.model, false);
  c_check->add_option("--samples", check.samples, "Extra random points around x0");

  EpsilonOptions eps;
  auto* c_eps = app.add_subcommand("epsilon", "Small-diffusion study of the extended/EM error ratio");
  add_plan_options(c_eps, eps.plan);
  c_eps->add_option("--set", eps.sets, "Override a small-diffusion parameter, name=value");
  c_eps->add_option("--eps", eps.eps, "Comma-separated eps values in [0, 1)");
  c_eps->add_option("--n", eps.steps, "Time steps");
  c_eps->add_option("--payoff", eps.payoff, "asian-digital or asian-call");

  ReplayOptions replay;
  auto* c_replay = app.add_subcommand("replay", "Re-run a command from its manifest");
  c_replay->add_option("--manifest", replay.manifest, "manifest.txt written by an earlier run")->required();

  Job job;
  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (g.threads == 0) g.threads = std::max(1u, std::thread::hardware_concurrency());
    if (g.qmc && g.mc) throw UsageError("--qmc", "--qmc and --mc are mutually exclusive");
    if (c_price->parsed()) job = prepare_price(g, price, out);
    else if (c_sweep->parsed()) job = prepare_sweep(g, sweep, out);
    else if (c_conv->parsed()) {
      if (conv.input.empty() && conv.model.model.empty()) throw UsageError("--model", "required unless --in is given");
      job = prepare_convergence(g, conv, out);
    } else if (c_bench->parsed()) job = prepare_benchmark(g, bench, out);
    else if (c_check->parsed()) job = prepare_check(g, check, out);
    else if (c_eps->parsed()) job = prepare_epsilon(g, eps, out);
    else job = prepare_replay(g, *c_replay, replay, out, err, depth);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << EXTMIL_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  try {
    return job();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  return dispatch(std::move(args), out, err, 0);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot read manifest " + path);
  Manifest mf;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw RuntimeFailure("malformed manifest line '" + line + "'");
    mf[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return mf;
}

std::string render_manifest(const Manifest& manifest) {
  std::string text;
  for (const auto& [key, value] : manifest) text += key + '=' + value + '\n';
  return text;
}

std::vector<std::string> manifest_to_args(const Manifest& manifest) {
  std::vector<std::string> args{manifest.at("command")};
  for (const auto& [key, value] : manifest) {
    if (key == "command" || key == "extmil_version" || key == "timestamp" || key == "benchmark" ||
        key.starts_with("output.")) {
      continue;
    }
    if (key.starts_with("set.")) {
      args.push_back("--set");
      args.push_back(key.substr(4) + '=' + value);
    } else if (value == "true") {
      args.push_back("--" + key);
    } else if (value != "false") {
      args.push_back("--" + key);
      args.push_back(value);
    }
  }
  return args;
}

}  // namespace extmil::cli
