// pdd: generate instances, run the solvers, sweep seeds, run the property suites.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pdd/bench.hpp"
#include "pdd/io.hpp"
#include "pdd/multicast.hpp"
#include "pdd/relay.hpp"
#include "pdd/trace_io.hpp"
#include "pdd/verify.hpp"
#include "pdd/volmin.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level() {
  const char* env = std::getenv("PDD_LOG_LEVEL");
  if (!env) return LogLevel::Warn;
  const std::string s = env;
  if (s == "error" || s == "quiet") return LogLevel::Error;
  if (s == "info") return LogLevel::Info;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

void log(LogLevel lvl, const std::string& msg) {
  static const LogLevel current = log_level();
  if (lvl > current) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "[" << names[static_cast<int>(lvl)] << "] " << msg << '\n';
}

// Exit codes: 0 converged / pass, 1 not converged / check failed, 2 bad input,
// 3 numerical failure, 4 I/O or other error.
int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
  return code;
}

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string app;
  std::string instance;
  std::string dims;
  std::string out;
  std::string config_file;
  std::string truth;
  std::uint64_t seed = 1;
  std::string seeds;
  int jobs = 1;
  int rank = 0;
  double pbs_db = 10.0;
  std::string snr_db;
  double gamma = 0.8;
  double volmin_eps = 1e-2;
  std::string format = "csv";
  int restarts = 3;
  bool prescale = false;

  std::optional<double> rho0, c, tau, eps0, eps_outer;
  std::optional<int> max_outer, max_inner;
  std::optional<std::string> mode, order;
};

std::vector<int> parse_dims(const std::string& s, std::size_t count, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw pdd::InvalidInput("--dims: '" + tok + "' is not a positive integer");
    }
  }
  if (out.size() != count) throw pdd::InvalidInput("--dims: expected " + what);
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string tok;
  auto num = [](const std::string& t) {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return static_cast<std::uint64_t>(v);
  };
  while (std::getline(ss, tok, ',')) {
    try {
      const auto dash = tok.find('-');
      if (dash == std::string::npos) {
        out.push_back(num(tok));
      } else {
        const auto lo = num(tok.substr(0, dash));
        const auto hi = num(tok.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument(tok);
        for (auto v = lo; v <= hi; ++v) out.push_back(v);
      }
    } catch (const std::exception&) {
      throw pdd::InvalidInput("--seeds: cannot parse '" + tok + "' (use e.g. 1-10 or 1,4,7)");
    }
  }
  if (out.empty()) throw pdd::InvalidInput("--seeds: at least one seed is required");
  return out;
}

double parse_snr(const std::string& s, double fallback) {
  if (s.empty()) return fallback;
  if (s == "inf" || s == "Inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw pdd::InvalidInput("--snr-db: '" + s + "' is not a number or 'inf'");
  }
}

json read_json_file(const std::string& path) {
  try {
    return pdd::io::read_json(path);
  } catch (const json::exception& e) {
    throw pdd::InvalidInput(path + ": " + e.what());
  }
}

// Application defaults, then the config file, then flags.
pdd::PddConfig resolve_config(pdd::PddConfig cfg, const Options& o, std::uint64_t seed) {
  if (!o.config_file.empty()) {
    const json j = read_json_file(o.config_file);
    auto num = [&](const char* key, double& dst) {
      if (j.contains(key)) dst = j.at(key).get<double>();
    };
    auto integer = [&](const char* key, int& dst) {
      if (j.contains(key)) dst = j.at(key).get<int>();
    };
    num("rho0", cfg.rho0);
    num("c", cfg.c);
    num("tau", cfg.tau);
    num("eta0", cfg.eta0);
    num("eps0", cfg.eps0);
    num("eps_shrink", cfg.eps_shrink);
    num("eps_outer", cfg.eps_outer);
    integer("max_outer", cfg.max_outer);
    integer("max_inner", cfg.max_inner);
    if (j.contains("mode")) cfg.mode = pdd::parse_mode(j.at("mode").get<std::string>());
    if (j.contains("block_order")) cfg.block_order = pdd::parse_block_order(j.at("block_order").get<std::string>());
    if (j.contains("inner_stop")) cfg.inner_stop = pdd::parse_inner_stop(j.at("inner_stop").get<std::string>());
  }
  if (o.rho0) cfg.rho0 = *o.rho0;
  if (o.c) cfg.c = *o.c;
  if (o.tau) cfg.tau = *o.tau;
  if (o.eps0) cfg.eps0 = *o.eps0;
  if (o.eps_outer) cfg.eps_outer = *o.eps_outer;
  if (o.max_outer) cfg.max_outer = *o.max_outer;
  if (o.max_inner) cfg.max_inner = *o.max_inner;
  if (o.mode) cfg.mode = pdd::parse_mode(*o.mode);
  if (o.order) cfg.block_order = pdd::parse_block_order(*o.order);
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

json config_to_json(const pdd::PddConfig& c) {
  return {{"mode", pdd::to_string(c.mode)},
          {"rho0", c.rho0},
          {"c", c.c},
          {"tau", c.tau},
          {"eta0", c.eta0},
          {"eps0", c.eps0},
          {"eps_shrink", c.effective_eps_shrink()},
          {"eps_outer", c.eps_outer},
          {"max_outer", c.max_outer},
          {"max_inner", c.max_inner},
          {"inner_stop", pdd::to_string(c.inner_stop)},
          {"block_order", pdd::to_string(c.block_order)},
          {"seed", c.seed}};
}

void require_one_source(const Options& o) {
  const bool file = !o.instance.empty();
  const bool gen = !o.dims.empty();
  if (file == gen) throw pdd::InvalidInput("give exactly one of --instance (file) or --dims (generator parameters)");
}

// ---------------------------------------------------------------- instances

pdd::multicast::MulticastInstance multicast_instance(const Options& o, std::uint64_t seed) {
  if (!o.instance.empty()) return pdd::io::multicast_from_json(read_json_file(o.instance));
  const auto d = parse_dims(o.dims, 3, "N_t,n_g,m_g for multicast");
  return pdd::multicast::random_instance(d[0], d[1], d[2], o.pbs_db, seed);
}

pdd::relay::RelayInstance relay_instance(const Options& o, std::uint64_t seed) {
  if (!o.instance.empty()) return pdd::io::relay_from_json(read_json_file(o.instance));
  const auto d = parse_dims(o.dims, 3, "N_s,N_r,K for relay");
  return pdd::relay::random_instance(d[0], d[1], d[2], parse_snr(o.snr_db, 10.0), seed);
}

std::pair<pdd::volmin::VolMinInstance, std::optional<pdd::volmin::GroundTruth>> volmin_instance(const Options& o,
                                                                                              std::uint64_t seed) {
  if (!o.instance.empty()) {
    if (o.rank < 1) throw pdd::InvalidInput("volmin: --rank K is required with --instance");
    pdd::RealMatrix a;
    try {
      a = pdd::io::read_matrix(o.instance);
    } catch (const pdd::InvalidInput&) {
      throw;
    } catch (const std::exception& e) {
      throw IoError(o.instance + ": " + e.what());
    }
    std::optional<pdd::volmin::GroundTruth> truth;
    if (!o.truth.empty()) truth = pdd::io::ground_truth_from_json(read_json_file(o.truth));
    return {pdd::volmin::make_instance(std::move(a), o.rank, o.volmin_eps), truth};
  }
  const auto d = parse_dims(o.dims, 3, "N,K,L for volmin");
  auto [inst, gt] = pdd::volmin::gen_data(d[0], d[1], d[2], o.gamma, parse_snr(o.snr_db, INFINITY), seed,
                                          o.volmin_eps);
  return {std::move(inst), gt};
}

// ------------------------------------------------------------------ gen

int cmd_gen(const Options& o) {
  if (o.dims.empty()) throw pdd::InvalidInput("gen: --dims is required");
  if (o.out.empty()) throw pdd::InvalidInput("gen: --out is required");
  const fs::path out = o.out;
  if (o.app == "multicast") {
    pdd::io::write_json(out, pdd::io::to_json(multicast_instance(o, o.seed)));
  } else if (o.app == "relay") {
    pdd::io::write_json(out, pdd::io::to_json(relay_instance(o, o.seed)));
  } else {
    auto [inst, truth] = volmin_instance(o, o.seed);
    if (o.format == "bin") {
      pdd::io::write_matrix_binary(out, inst.a);
    } else {
      pdd::io::write_matrix_csv(out, inst.a);
    }
    fs::path side = out;
    side += ".truth.json";
    pdd::io::write_json(side, pdd::io::to_json(*truth));
    log(LogLevel::Info, "wrote ground truth to " + side.string());
  }
  log(LogLevel::Info, "wrote " + out.string());
  return 0;
}

// ---------------------------------------------------------------- solve

// Appends trace rows as iterations complete; every row is flushed.
class TraceWriter {
 public:
  explicit TraceWriter(const fs::path& path) : os_(path) {
    if (!os_) throw IoError("cannot open " + path.string() + " for writing");
    os_ << pdd::trace_csv_header() << std::endl;
  }
  void operator()(const pdd::IterationRecord& rec) {
    os_ << pdd::trace_csv_row(rec) << std::endl;
    log(LogLevel::Debug, "k=" + std::to_string(rec.k) + " h_inf=" + std::to_string(rec.h_inf) +
                             " rho=" + std::to_string(rec.rho) + " branch=" + pdd::to_string(rec.branch));
  }

 private:
  std::ofstream os_;
};

int cmd_solve(const Options& o) {
  require_one_source(o);
  if (o.out.empty()) throw pdd::InvalidInput("solve: --out directory is required");
  const fs::path dir = o.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  TraceWriter trace(dir / "trace.csv");
  auto cb = [&](const pdd::IterationRecord& r) { trace(r); };

  json result;
  bool converged = false;
  if (o.app == "multicast") {
    const auto inst = multicast_instance(o, o.seed);
    const auto cfg = resolve_config(pdd::multicast::default_config(inst), o, o.seed);
    const auto r = pdd::multicast::solve(inst, cfg, cb);
    result = pdd::io::to_json(r);
    result["config"] = config_to_json(cfg);
    converged = r.converged;
  } else if (o.app == "relay") {
    const auto inst = relay_instance(o, o.seed);
    const auto cfg = resolve_config(pdd::relay::default_config(inst), o, o.seed);
    const auto r = pdd::relay::solve(inst, cfg, cb);
    result = pdd::io::to_json(r);
    result["config"] = config_to_json(cfg);
    converged = r.converged;
  } else {
    const auto [inst, truth] = volmin_instance(o, o.seed);
    const auto cfg = resolve_config(pdd::volmin::default_config(inst), o, o.seed);
    pdd::volmin::SolveOptions so;
    so.restarts = o.restarts;
    so.prescale = o.prescale;
    // the trace file holds the selected restart only, so it is written afterwards
    const auto r = pdd::volmin::solve(inst, cfg, so);
    for (const auto& rec : r.trace.records) trace(rec);
    result = pdd::io::to_json(r, truth ? &*truth : nullptr);
    result["config"] = config_to_json(cfg);
    converged = r.converged;
  }
  result["app"] = o.app;
  pdd::io::write_json(dir / "result.json", result);
  log(LogLevel::Info, std::string("solve finished, converged=") + (converged ? "true" : "false"));
  return converged ? 0 : 1;
}

// ---------------------------------------------------------------- bench

pdd::bench::BenchRow bench_one(const Options& o, std::uint64_t seed) {
  pdd::bench::BenchRow row;
  row.seed = seed;
  if (o.app == "multicast") {
    const auto inst = multicast_instance(o, seed);
    const auto r = pdd::multicast::solve(inst, resolve_config(pdd::multicast::default_config(inst), o, seed));
    row.objective = r.min_rate_bits;
    row.feasibility_gap = r.feasibility_gap;
    row.iterations = r.iterations;
    row.converged = r.converged;
    row.metric = r.kkt_residual;
  } else if (o.app == "relay") {
    const auto inst = relay_instance(o, seed);
    const auto r = pdd::relay::solve(inst, resolve_config(pdd::relay::default_config(inst), o, seed));
    row.objective = r.sum_rate_nats;
    row.feasibility_gap = r.feasibility_gap;
    row.iterations = r.iterations;
    row.converged = r.converged;
    row.metric = r.sum_rate_nats;
  } else {
    const auto [inst, truth] = volmin_instance(o, seed);
    pdd::volmin::SolveOptions so;
    so.restarts = o.restarts;
    so.prescale = o.prescale;
    const auto r = pdd::volmin::solve(inst, resolve_config(pdd::volmin::default_config(inst), o, seed), so);
    row.objective = r.f_eps;
    row.feasibility_gap = r.feasibility_gap;
    row.iterations = r.iterations;
    row.converged = r.converged;
    row.metric = truth ? pdd::volmin::mse_metric(r.x, truth->x) : r.relative_error;
  }
  row.ok = true;
  return row;
}

int cmd_bench(const Options& o) {
  require_one_source(o);
  if (o.out.empty()) throw pdd::InvalidInput("bench: --out summary CSV path is required");
  if (o.jobs < 1) throw pdd::InvalidInput("bench: --jobs must be positive");
  const auto seeds = parse_seeds(o.seeds.empty() ? std::to_string(o.seed) : o.seeds);
  std::string metric = "kkt_residual";
  if (o.app == "relay") metric = "sum_rate_nats";
  if (o.app == "volmin") metric = (!o.instance.empty() && o.truth.empty()) ? "relative_error" : "mse_db";
  // surface bad flags once instead of as one failure per seed
  resolve_config(pdd::PddConfig{}, o, 1);
  const auto summary = pdd::bench::run(
      seeds, [&](std::uint64_t s) { return bench_one(o, s); }, o.jobs, metric);
  pdd::bench::write_csv(o.out, summary);
  for (const auto& r : summary.rows)
    if (!r.ok) log(LogLevel::Warn, "seed " + std::to_string(r.seed) + " failed: " + r.error);
  log(LogLevel::Info, std::to_string(summary.rows.size()) + " seeds, " + std::to_string(summary.failures) +
                          " failures, median " + metric + " " + std::to_string(summary.metric.median));
  return summary.failures == 0 ? 0 : 1;
}

// --------------------------------------------------------------- verify

int cmd_verify(const std::string& suite) {
  const auto reports = pdd::verify::run(suite);
  int failures = 0;
  double total = 0.0;
  for (const auto& rep : reports) {
    std::printf("== %s (%.2f s)\n", rep.suite.c_str(), rep.seconds);
    for (const auto& c : rep.checks) {
      std::printf("%s %-45s %s\n", c.passed ? "PASS" : "FAIL", c.id.c_str(), c.detail.c_str());
    }
    failures += rep.failures();
    total += rep.seconds;
  }
  std::printf("%d failure(s) in %.2f s\n", failures, total);
  std::fflush(stdout);
  if (failures > 0) {
    for (const auto& rep : reports)
      for (const auto& c : rep.checks)
        if (!c.passed) std::fprintf(stderr, "failed: %s\n", c.id.c_str());
  }
  return failures == 0 ? 0 : 1;
}

void add_app_options(CLI::App* cmd, Options& o, bool with_solver) {
  cmd->add_option("--app", o.app, "Application")
      ->required()
      ->check(CLI::IsMember({"multicast", "relay", "volmin"}));
  cmd->add_option("--dims", o.dims, "Generator sizes: multicast N_t,n_g,m_g; relay N_s,N_r,K; volmin N,K,L");
  cmd->add_option("--pbs-db", o.pbs_db, "Multicast transmit power in dB")->capture_default_str();
  cmd->add_option("--snr-db", o.snr_db, "Relay SNR in dB (default 10); volmin data SNR in dB or 'inf' (default)");
  cmd->add_option("--gamma", o.gamma, "VolMin purity bound on the abundances")->capture_default_str();
  cmd->add_option("--eps", o.volmin_eps, "VolMin log-det smoothing")->capture_default_str();
  if (!with_solver) return;
  cmd->add_option("--instance", o.instance, "Instance file (JSON, or volmin CSV/binary)");
  cmd->add_option("--truth", o.truth, "VolMin ground-truth JSON for the MSE metric");
  cmd->add_option("--rank", o.rank, "VolMin K for a file instance");
  cmd->add_option("--config", o.config_file, "JSON file of solver settings (flags take precedence)");
  cmd->add_option("--rho0", o.rho0, "Initial inverse penalty");
  cmd->add_option("--c", o.c, "Penalty shrink factor in (0,1)");
  cmd->add_option("--tau", o.tau, "Feasibility threshold shrink in (0,1)");
  cmd->add_option("--eps0", o.eps0, "Initial inner tolerance");
  cmd->add_option("--eps-outer", o.eps_outer, "Outer feasibility tolerance");
  cmd->add_option("--max-outer", o.max_outer, "Outer iteration cap");
  cmd->add_option("--max-inner", o.max_inner, "Inner sweep cap");
  cmd->add_option("--mode", o.mode, "pdd or ipdd")->check(CLI::IsMember({"pdd", "ipdd"}));
  cmd->add_option("--order", o.order, "Inner block order: randomized or cyclic")
      ->check(CLI::IsMember({"randomized", "cyclic"}));
  cmd->add_option("--restarts", o.restarts, "VolMin restarts")->capture_default_str();
  cmd->add_flag("--prescale", o.prescale, "VolMin: scale up data whose K-th singular value is small against the smoothing");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalty dual decomposition solvers for multicast beamforming, relay precoding and VolMin"};
  app.require_subcommand(1);
  Options o;
  std::string suite;

  auto* gen = app.add_subcommand("gen", "Generate a seeded instance file");
  add_app_options(gen, o, false);
  gen->add_option("--seed", o.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", o.out, "Output file")->required();
  gen->add_option("--format", o.format, "VolMin data format")->check(CLI::IsMember({"csv", "bin"}));

  auto* solve = app.add_subcommand("solve", "Solve one instance; writes result.json and trace.csv");
  add_app_options(solve, o, true);
  solve->add_option("--seed", o.seed, "Generator and solver seed")->capture_default_str();
  solve->add_option("--out", o.out, "Output directory")->required();

  auto* bench = app.add_subcommand("bench", "Solve one instance per seed and summarize");
  add_app_options(bench, o, true);
  bench->add_option("--seeds", o.seeds, "Seed list, e.g. 1-20 or 1,5,9");
  bench->add_option("--seed", o.seed, "Single seed (when --seeds is absent)");
  bench->add_option("--jobs", o.jobs, "Concurrent seeds")->capture_default_str();
  bench->add_option("--out", o.out, "Summary CSV")->required();

  auto* verify = app.add_subcommand("verify", "Run property suites");
  verify->add_option("suite", suite, "numerics, pdd-core, multicast, relay, volmin or all")
      ->required()
      ->check(CLI::IsMember({"numerics", "pdd-core", "multicast", "relay", "volmin", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*solve) return cmd_solve(o);
    if (*bench) return cmd_bench(o);
    return cmd_verify(suite);
  } catch (const pdd::InvalidInput& e) {
    return report_error("invalid_input", e.what(), 2);
  } catch (const pdd::NumericalFailure& e) {
    return report_error("numerical_failure", e.what(), 3);
  } catch (const pdd::UnsupportedOperation& e) {
    return report_error("unsupported", e.what(), 2);
  } catch (const IoError& e) {
    return report_error("io", e.what(), 4);
  } catch (const json::exception& e) {
    return report_error("invalid_input", e.what(), 2);
  } catch (const std::exception& e) {
    return report_error("error", e.what(), 4);
  }
}
