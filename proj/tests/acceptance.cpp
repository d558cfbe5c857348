// Acceptance suite: one PASS/FAIL line per criterion, exit 1 on any failure.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "pdd/multicast.hpp"
#include "pdd/relay.hpp"
#include "pdd/verify.hpp"
#include "pdd/volmin.hpp"

using namespace pdd;
namespace mc = pdd::multicast;
namespace rl = pdd::relay;
namespace vm = pdd::volmin;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void c1_multicast_single_group() {
  double worst_gap = 0.0, worst_kkt = 0.0, worst_time = 0.0;
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = mc::random_instance(4, 1, 1, 10.0, seed);
    PddConfig cfg = mc::default_config(inst);
    cfg.seed = seed;
    const auto t0 = Clock::now();
    const auto r = mc::solve(inst, cfg);
    const double t = seconds_since(t0);
    Eigen::GeneralizedSelfAdjointEigenSolver<ComplexMatrix> ges(inst.a[0], inst.b[0]);
    const double opt = std::log2(1.0 + ges.eigenvalues().maxCoeff());
    const double gap = (opt - r.min_rate_bits) / opt;
    worst_gap = std::max(worst_gap, gap);
    worst_kkt = std::max(worst_kkt, r.kkt_residual);
    worst_time = std::max(worst_time, t);
    pass = pass && gap <= 0.01 && r.kkt_residual <= 1e-3 && t <= 2.0;
  }
  report("C1", pass,
         fmt("multicast (4,1,1) x20: worst rate shortfall %.2e (<= 1e-2), worst kkt %.2e (<= 1e-3), "
             "worst time %.3f s (<= 2)",
             worst_gap, worst_kkt, worst_time));
}

void c2_multicast_feasibility() {
  int hit = 0;
  double worst_kkt = 0.0, worst_time = 0.0, worst_gap = 0.0;
  bool kkt_ok = true, time_ok = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = mc::random_instance(8, 4, 2, 10.0, seed);
    PddConfig cfg = mc::default_config(inst);
    cfg.seed = seed;
    cfg.max_outer = 50;
    const auto t0 = Clock::now();
    const auto r = mc::solve(inst, cfg);
    const double t = seconds_since(t0);
    worst_time = std::max(worst_time, t);
    worst_gap = std::max(worst_gap, r.feasibility_gap);
    time_ok = time_ok && t <= 10.0;
    if (r.feasibility_gap <= 1e-4) {
      ++hit;
      worst_kkt = std::max(worst_kkt, r.kkt_residual);
      kkt_ok = kkt_ok && r.kkt_residual <= 1e-2;
    }
  }
  report("C2", hit >= 18 && kkt_ok && time_ok,
         fmt("multicast (8,4,2) x20: %d/20 with gap <= 1e-4 (need 18), worst gap %.2e, worst kkt on those %.2e "
             "(<= 1e-2), worst time %.3f s (<= 10)",
             hit, worst_gap, worst_kkt, worst_time));
}

// Best sum rate over random feasible (V, F) pairs.
double random_feasible_rate(const rl::RelayInstance& inst, std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  auto cg = [&](int r, int c) {
    ComplexMatrix m(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) m(i, j) = Complex(nd(rng), nd(rng));
    return m;
  };
  double best = 0.0;
  for (int s = 0; s < count; ++s) {
    ComplexMatrix v = cg(inst.n_s, inst.k);
    v *= std::sqrt(inst.p_s * ud(rng)) / v.norm();
    ComplexMatrix f = cg(inst.n_r, inst.n_r);
    f *= 1e3;  // push outside the relay budget so repair lands on its boundary
    rl::repair(v, f, inst);
    best = std::max(best, rl::sum_rate(v, f, inst));
  }
  return best;
}

void c3_relay() {
  int hit = 0, violations = 0;
  bool beats = true, time_ok = true;
  double worst_gap = 0.0, worst_margin = std::numeric_limits<double>::infinity(), worst_time = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = rl::random_instance(4, 4, 4, 10.0, seed);
    PddConfig cfg = rl::default_config(inst);
    cfg.seed = seed;
    cfg.max_outer = 30;
    const auto t0 = Clock::now();
    const auto r = rl::solve(inst, cfg);
    const double t = seconds_since(t0);
    worst_time = std::max(worst_time, t);
    time_ok = time_ok && t <= 20.0;
    worst_gap = std::max(worst_gap, r.feasibility_gap);
    if (r.feasibility_gap <= 1e-3) ++hit;
    violations += r.trace.monotonicity_violations;
    const double zero = rl::sum_rate(ComplexMatrix::Zero(inst.n_s, inst.k), ComplexMatrix::Zero(inst.n_r, inst.n_r), inst);
    const double rnd = random_feasible_rate(inst, 1000 + seed, 50);
    const double baseline = std::max(zero, rnd);
    worst_margin = std::min(worst_margin, r.sum_rate_nats - baseline);
    beats = beats && r.sum_rate_nats > baseline;
  }
  report("C3", hit >= 18 && violations == 0 && beats && time_ok,
         fmt("relay (4,4,4) x20: %d/20 with gap <= 1e-3 (need 18), worst gap %.2e, inner AL increases %d (need 0), "
             "smallest rate margin over zero/random-feasible baselines %.3f nats (> 0), worst time %.3f s (<= 20)",
             hit, worst_gap, violations, worst_margin, worst_time));
}

// Magnitude-grid optimum of the single-antenna relay channel.
double scalar_grid_optimum(const rl::RelayInstance& inst, double step) {
  const double h2 = std::norm(inst.h(0, 0));
  const double g2 = std::norm(inst.g(0, 0));
  const double sr2 = inst.sigma_r2;
  const double s2 = inst.sigma2(0);
  double best = 0.0;
  for (double v = 0.0; v * v <= inst.p_s; v += step) {
    const double fmax2 = inst.p_r / (h2 * v * v + sr2);
    for (double f = 0.0; f * f <= fmax2; f += step) {
      const double gf = g2 * f * f;
      best = std::max(best, inst.alpha(0) * std::log1p(gf * h2 * v * v / (gf * sr2 + s2)));
    }
  }
  return best;
}

void c4_relay_scalar() {
  double worst_short = -std::numeric_limits<double>::infinity(), worst_time = 0.0;
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto inst = rl::random_instance(1, 1, 1, 10.0, seed);
    PddConfig cfg = rl::default_config(inst);
    cfg.seed = seed;
    const auto t0 = Clock::now();
    const auto r = rl::solve(inst, cfg);
    const double t = seconds_since(t0);
    const double opt = scalar_grid_optimum(inst, 1e-3);
    const double shortfall = (opt - r.sum_rate_nats) / opt;
    worst_short = std::max(worst_short, shortfall);
    worst_time = std::max(worst_time, t);
    pass = pass && shortfall <= 0.02 && t <= 5.0;
  }
  report("C4",
         pass, fmt("relay (1,1,1) P = 10 x10: worst shortfall vs 1e-3 magnitude grid %.2e (<= 2e-2), worst time %.3f s "
                   "(<= 5)",
                   worst_short, worst_time));
}

void c5_volmin_noiseless() {
  std::vector<double> mse;
  double worst_rel = 0.0, worst_time = 0.0;
  int max_iters = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto [inst, truth] = vm::gen_data(10, 3, 200, 0.8, std::numeric_limits<double>::infinity(), seed);
    PddConfig cfg = vm::default_config(inst);
    cfg.seed = seed;
    cfg.max_outer = 30;
    vm::SolveOptions opts;
    opts.restarts = 3;
    const auto t0 = Clock::now();
    const auto r = vm::solve(inst, cfg, opts);
    worst_time = std::max(worst_time, seconds_since(t0));
    mse.push_back(vm::mse_metric(r.x, truth.x));
    worst_rel = std::max(worst_rel, r.relative_error);
    max_iters = std::max(max_iters, r.iterations);
  }
  const double med = median(mse);
  report("C5", med <= -30.0 && worst_rel <= 1e-2 && worst_time <= 30.0 && max_iters <= 30,
         fmt("volmin (10,3,200) noiseless x10, 3 restarts: median MSE %.2f dB (<= -30), worst relative error %.2e "
             "(<= 1e-2), max outer iterations %d (<= 30), worst time %.3f s (<= 30)",
             med, worst_rel, max_iters, worst_time));
}

void c6_volmin_noisy() {
  std::vector<double> mse;
  double worst_time = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto [inst, truth] = vm::gen_data(50, 3, 1000, 0.8, 40.0, seed);
    PddConfig cfg = vm::default_config(inst);
    cfg.seed = seed;
    const auto t0 = Clock::now();
    const auto r = vm::solve(inst, cfg);
    worst_time = std::max(worst_time, seconds_since(t0));
    mse.push_back(vm::mse_metric(r.x, truth.x));
  }
  const double med = median(mse);
  report("C6", med <= -20.0,
         fmt("volmin (50,3,1000) SNR 40 dB x10: median MSE %.2f dB (<= -20), worst time %.3f s", med, worst_time));
}

void c7_verify_all() {
  const auto t0 = Clock::now();
  int fails = 0, checks = 0;
  std::string first;
  for (const auto& s : verify::run("all")) {
    checks += static_cast<int>(s.checks.size());
    for (const auto& c : s.checks)
      if (!c.passed) {
        ++fails;
        if (first.empty()) first = c.id;
      }
  }
  const double t = seconds_since(t0);
  report("C7", fails == 0 && t <= 300.0,
         fmt("verify all: %d/%d checks failed%s%s, runtime %.2f s (<= 300)", fails, checks,
             first.empty() ? "" : ", first ", first.c_str(), t));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{c1_multicast_single_group, c2_multicast_feasibility, c3_relay,
                                                    c4_relay_scalar,           c5_volmin_noiseless,      c6_volmin_noisy,
                                                    c7_verify_all};
  for (const auto& c : criteria) {
    try {
      c();
    } catch (const std::exception& e) {
      report("C?", false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
