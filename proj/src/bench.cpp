#include "pdd/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

namespace pdd::bench {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Stats summarize(const std::vector<double>& values) {
  Stats s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) {
    s.mean = s.median = s.p10 = s.p90 = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.median = percentile(values, 0.5);
  s.p10 = percentile(values, 0.1);
  s.p90 = percentile(values, 0.9);
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

BenchSummary run(const std::vector<std::uint64_t>& seeds, const SeedRunner& runner, int jobs,
                 std::string metric_name) {
  BenchSummary out;
  out.metric_name = std::move(metric_name);
  out.rows.resize(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      BenchRow row;
      try {
        row = runner(seeds[i]);
        row.ok = true;
      } catch (const std::exception& e) {
        row = BenchRow{};
        row.error = e.what();
      }
      row.seed = seeds[i];
      if (row.time_ms == 0.0)
        row.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      out.rows[i] = std::move(row);
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(seeds.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<double> obj, gap, it, tm, met;
  for (const auto& r : out.rows) {
    if (!r.ok) {
      ++out.failures;
      continue;
    }
    obj.push_back(r.objective);
    gap.push_back(r.feasibility_gap);
    it.push_back(r.iterations);
    tm.push_back(r.time_ms);
    met.push_back(r.metric);
  }
  out.objective = summarize(obj);
  out.feasibility_gap = summarize(gap);
  out.iterations = summarize(it);
  out.time_ms = summarize(tm);
  out.metric = summarize(met);
  return out;
}

void write_csv(const std::filesystem::path& path, const BenchSummary& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "seed,ok,objective,feasibility_gap,iterations,time_ms,converged," << s.metric_name << ",error\n";
  for (const auto& r : s.rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << r.seed << ',' << (r.ok ? 1 : 0) << ',' << num(r.objective) << ',' << num(r.feasibility_gap) << ','
        << r.iterations << ',' << num(r.time_ms) << ',' << (r.converged ? 1 : 0) << ',' << num(r.metric) << ','
        << err << '\n';
  }
  out << '\n' << "stat,objective,feasibility_gap,iterations,time_ms," << s.metric_name << '\n';
  auto line = [&](const char* name, auto get) {
    out << name << ',' << num(get(s.objective)) << ',' << num(get(s.feasibility_gap)) << ','
        << num(get(s.iterations)) << ',' << num(get(s.time_ms)) << ',' << num(get(s.metric)) << '\n';
  };
  line("mean", [](const Stats& x) { return x.mean; });
  line("median", [](const Stats& x) { return x.median; });
  line("p10", [](const Stats& x) { return x.p10; });
  line("p90", [](const Stats& x) { return x.p90; });
  line("min", [](const Stats& x) { return x.min; });
  line("max", [](const Stats& x) { return x.max; });
  out << "failures," << s.failures << '\n';
}

}  // namespace pdd::bench
