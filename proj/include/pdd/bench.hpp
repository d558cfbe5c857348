#pragma once

// Seed sweeps and their summary table.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace pdd::bench {

struct BenchRow {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // set when the run threw
  double objective = 0.0;
  double feasibility_gap = 0.0;
  int iterations = 0;
  double time_ms = 0.0;
  bool converged = false;
  double metric = 0.0;  // application metric: kkt residual, sum rate, or MSE in dB
};

struct Stats {
  double mean = 0.0, median = 0.0, p10 = 0.0, p90 = 0.0, min = 0.0, max = 0.0;
  int count = 0;
};

struct BenchSummary {
  std::string metric_name;
  std::vector<BenchRow> rows;  // in seed-list order
  Stats objective, feasibility_gap, iterations, time_ms, metric;
  int failures = 0;
};

/// Linear-interpolated percentile, q in [0, 1]. Empty input gives NaN.
double percentile(std::vector<double> values, double q);
Stats summarize(const std::vector<double>& values);

using SeedRunner = std::function<BenchRow(std::uint64_t seed)>;

/// Runs every seed, jobs at a time. Exceptions become failed rows.
BenchSummary run(const std::vector<std::uint64_t>& seeds, const SeedRunner& runner, int jobs,
                 std::string metric_name);

/// Per-seed rows, a blank line, then one row per aggregate.
void write_csv(const std::filesystem::path& path, const BenchSummary& s);

}  // namespace pdd::bench
