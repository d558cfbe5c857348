#include "pdd/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "pdd/core.hpp"
#include "pdd/multicast.hpp"
#include "pdd/numerics.hpp"
#include "pdd/relay.hpp"
#include "pdd/volmin.hpp"

namespace pdd::verify {

int SuiteReport::failures() const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.passed; }));
}

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

using Check = std::pair<std::string, std::function<Outcome()>>;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Largest observed value of a nonnegative error measure. NaN sticks.
struct Worst {
  double value = 0.0;
  long samples = 0;

  void add(double v) {
    ++samples;
    if (std::isnan(v) || v > value) value = v;
  }
  Outcome within(double tol, const std::string& what) const {
    return {value <= tol, "max " + what + " " + fmt(value) + " (tol " + fmt(tol) + ", " + std::to_string(samples) +
                              " samples)"};
  }
};

// Counts boolean property violations and keeps the first message.
struct Tally {
  long samples = 0;
  long failures = 0;
  std::string first;

  void expect(bool ok, const std::string& msg) {
    ++samples;
    if (!ok && failures++ == 0) first = msg;
  }
  Outcome outcome(const std::string& what) const {
    if (failures == 0) return {true, what + " held on " + std::to_string(samples) + " samples"};
    return {false, std::to_string(failures) + "/" + std::to_string(samples) + " violations; first: " + first};
  }
};

Outcome combine(std::initializer_list<Outcome> parts) {
  Outcome out{true, ""};
  for (const Outcome& p : parts) {
    out.ok = out.ok && p.ok;
    if (!out.detail.empty()) out.detail += "; ";
    out.detail += p.detail;
  }
  return out;
}

RealMatrix gauss(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  RealMatrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

ComplexMatrix cgauss(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale * std::sqrt(0.5));
  ComplexMatrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = Complex(nd(rng), nd(rng));
  return m;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

RealVector fd_gradient(const std::function<double(const RealVector&)>& f, const RealVector& x, double step = 1e-5) {
  RealVector g(x.size());
  RealVector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + step;
    const double fp = f(xp);
    xp(i) = x(i) - step;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * step);
  }
  return g;
}

double rel_err(const RealVector& approx, const RealVector& exact) {
  return (approx - exact).norm() / std::max(exact.norm(), 1e-12);
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Forwards to a problem and records every block call and the iterate after it.
template <class It>
class Recorder final : public BlockProblem<It> {
 public:
  struct Call {
    std::size_t block;
    RealVector lambda;
    double rho;
  };

  explicit Recorder(const BlockProblem<It>& p) : p_(p) {}

  std::size_t num_blocks() const override { return p_.num_blocks(); }
  std::size_t constraint_dim() const override { return p_.constraint_dim(); }
  RealVector constraint(const It& z) const override { return p_.constraint(z); }
  double objective(const It& z) const override { return p_.objective(z); }
  double report_objective(const It& z) const override { return p_.report_objective(z); }
  void begin_sweep(It& z) const override { p_.begin_sweep(z); }
  void update_block(std::size_t block, It& z, const RealVector& lambda, double rho) const override {
    p_.update_block(block, z, lambda, rho);
    calls.push_back({block, lambda, rho});
    last = z;
  }
  double augmented_lagrangian(const It& z, const RealVector& lambda, double rho) const override {
    return p_.augmented_lagrangian(z, lambda, rho);
  }

  mutable std::vector<Call> calls;
  mutable It last;

 private:
  const BlockProblem<It>& p_;
};

// Replays the dual/penalty schedule of a pdd_run from the calls it made.
template <class It>
Outcome schedule_identities(const BlockProblem<It>& problem, It z0, const RealVector& lambda0, const PddConfig& cfg) {
  Recorder<It> rec(problem);
  std::vector<std::size_t> marks;
  std::vector<RealVector> h_end;
  auto res = pdd_run(rec, std::move(z0), lambda0, cfg, [&](const IterationRecord&) {
    marks.push_back(rec.calls.size());
    h_end.push_back(problem.constraint(rec.last));
  });
  const auto& r = res.trace.records;
  Tally t;
  int dual = 0;
  int penalty = 0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const auto& first = rec.calls[k == 0 ? 0 : marks[k - 1]];
    t.expect(first.rho == r[k].rho, "outer " + std::to_string(k + 1) + ": recorded rho differs from the trace");
    const RealVector& lam_next = k + 1 < r.size() ? rec.calls[marks[k]].lambda : res.lambda;
    const double rho_next = k + 1 < r.size() ? rec.calls[marks[k]].rho : res.rho;
    const RealVector stepped = first.lambda + h_end[k] / first.rho;
    const double shrunk = std::max(cfg.c * first.rho, cfg.rho_min());
    const std::string at = "outer " + std::to_string(k + 1);
    if (cfg.mode == Mode::Ipdd) {
      t.expect((lam_next.array() == stepped.array()).all(), at + ": IPDD multiplier differs from lambda + h/rho");
      t.expect(rho_next == shrunk, at + ": IPDD rho not shrunk");
    } else if (r[k].branch == Branch::DualUpdate) {
      ++dual;
      t.expect(numerics::inf_norm(h_end[k]) <= r[k].eta, at + ": dual branch taken with h above eta");
      t.expect((lam_next.array() == stepped.array()).all(), at + ": dual update differs from lambda + h/rho");
      t.expect(rho_next == first.rho, at + ": rho changed on the dual branch");
    } else {
      ++penalty;
      t.expect(numerics::inf_norm(h_end[k]) > r[k].eta, at + ": penalty branch taken with h within eta");
      t.expect((lam_next.array() == first.lambda.array()).all(), at + ": lambda changed on the penalty branch");
      t.expect(rho_next == shrunk, at + ": rho not shrunk on the penalty branch");
    }
    t.expect(rho_next <= first.rho, at + ": rho increased");
    if (k > 0) t.expect(r[k].eta <= cfg.tau * r[k - 1].eta, at + ": eta above tau * previous eta");
  }
  Outcome out = t.outcome("schedule identities");
  out.detail += " (" + std::to_string(r.size()) + " outer, " + std::to_string(dual) + " dual, " +
                std::to_string(penalty) + " penalty)";
  return out;
}

// Counts AL increases across rBSUM sweeps.
template <class It>
void inner_monotone(Worst& rise, const BlockProblem<It>& problem, It z, const RealVector& lambda, double rho,
                    int sweeps, BlockOrder order, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double prev = problem.augmented_lagrangian(z, lambda, rho);
  for (int s = 0; s < sweeps; ++s) {
    rbsum_run(problem, z, lambda, rho, InnerStop::IterationCap, 0.0, 1, order, rng);
    const double cur = problem.augmented_lagrangian(z, lambda, rho);
    rise.add(std::max(0.0, cur - prev) / (1.0 + std::abs(prev)));
    prev = cur;
  }
}

constexpr const char* kRise = "relative AL increase per sweep";

// ---------------------------------------------------------------- numerics

Outcome check_embedding() {
  std::mt19937_64 rng(101);
  Worst quad;
  Worst norm;
  for (int n : {1, 2, 4, 8}) {
    for (int rep = 0; rep < 250; ++rep) {
      const ComplexMatrix g = cgauss(n, n, rng);
      const ComplexMatrix m = g * g.adjoint();
      const ComplexVector w = cgauss(n, 1, rng);
      const RealVector we = numerics::real_embed_vec(w);
      const double exact = w.dot(m * w).real();
      quad.add(std::abs(we.dot(numerics::real_embed_psd(m) * we) - exact) / std::max(1.0, std::abs(exact)));
      norm.add(std::abs(we.norm() - w.norm()));
      const ComplexVector back = numerics::complex_from_embed(we);
      norm.add((back - w).norm());
    }
  }
  return combine({quad.within(1e-10, "quadratic-form mismatch"), norm.within(1e-10, "norm mismatch")});
}

Outcome check_eigen() {
  std::mt19937_64 rng(102);
  Worst res;
  Worst rayleigh;
  for (int n : {2, 6, 16, 32}) {
    for (int rep = 0; rep < 1000; ++rep) {
      const RealMatrix g = gauss(n, n, rng);
      const RealMatrix c = 0.5 * (g + g.transpose());
      const numerics::EigPair e = numerics::min_eigvec_sym(c);
      res.add((c * e.vector - e.value * e.vector).norm() / c.norm());
      res.add(std::abs(e.vector.norm() - 1.0));
      // the smallest eigenvalue lower-bounds every Rayleigh quotient
      for (int s = 0; s < 3; ++s) {
        const RealVector x = gauss(n, 1, rng);
        rayleigh.add(std::max(0.0, e.value - x.dot(c * x) / x.squaredNorm()) / c.norm());
      }
    }
  }
  return combine({res.within(1e-9, "eigen residual"), rayleigh.within(1e-12, "Rayleigh undercut")});
}

Outcome check_svd() {
  std::mt19937_64 rng(103);
  Worst res;
  Worst orth;
  Tally order;
  const std::pair<int, int> shapes[] = {{10, 3}, {50, 3}, {3, 10}, {8, 8}};
  for (auto [r, c] : shapes) {
    for (int rep = 0; rep < 1000; ++rep) {
      const RealMatrix m = gauss(r, c, rng);
      const numerics::ThinSvd s = numerics::thin_svd(m);
      res.add((s.u * s.sigma.asDiagonal() * s.v.transpose() - m).norm() / m.norm());
      const auto k = s.sigma.size();
      orth.add((s.u.transpose() * s.u - RealMatrix::Identity(k, k)).norm());
      orth.add((s.v.transpose() * s.v - RealMatrix::Identity(k, k)).norm());
      bool sorted = s.sigma(k - 1) >= 0.0;
      for (Eigen::Index i = 1; i < k; ++i) sorted = sorted && s.sigma(i) <= s.sigma(i - 1);
      order.expect(sorted, "singular values not descending and nonnegative");
    }
  }
  return combine({res.within(1e-9, "reconstruction error"), orth.within(1e-10, "orthonormality error"),
                  order.outcome("ordering")});
}

Outcome check_sylvester() {
  std::mt19937_64 rng(104);
  Worst res;
  Worst oracle;
  for (int n : {1, 2, 4, 8}) {
    for (int rep = 0; rep < 1000; ++rep) {
      const ComplexMatrix ga = cgauss(n, n, rng);
      const ComplexMatrix gb = cgauss(n, n, rng);
      const ComplexMatrix a = ga * ga.adjoint() + 0.1 * ComplexMatrix::Identity(n, n);
      const ComplexMatrix b = gb * gb.adjoint();
      const ComplexMatrix c = cgauss(n, n, rng);
      const ComplexMatrix f = numerics::solve_sylvester(a, b, c);
      res.add((a * f + f * b - c).norm() / c.norm());
      // diagonalize both Hermitian coefficients and divide entrywise
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> ea(a);
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> eb(b);
      ComplexMatrix t = ea.eigenvectors().adjoint() * c * eb.eigenvectors();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) t(i, j) /= ea.eigenvalues()(i) + eb.eigenvalues()(j);
      const ComplexMatrix ref = ea.eigenvectors() * t * eb.eigenvectors().adjoint();
      oracle.add((f - ref).norm() / ref.norm());
    }
  }
  for (int rep = 0; rep < 200; ++rep) {
    const RealMatrix a = gauss(3, 3, rng) + 5.0 * RealMatrix::Identity(3, 3);
    const RealMatrix b = gauss(3, 3, rng);
    const RealMatrix c = gauss(3, 3, rng);
    const RealMatrix f = numerics::solve_sylvester(a, b, c);
    res.add((a * f + f * b - c).norm() / c.norm());
  }
  return combine({res.within(1e-8, "Sylvester residual"), oracle.within(1e-8, "deviation from eigenbasis solve")});
}

Outcome check_projection_idempotence() {
  std::mt19937_64 rng(105);
  Worst diff;
  for (int rep = 0; rep < 1000; ++rep) {
    const RealMatrix m = gauss(4, 3, rng, 3.0);
    const double r = uniform(rng, 0.0, 6.0);
    const RealMatrix p = numerics::project_ball(m, r);
    diff.add((numerics::project_ball(p, r) - p).cwiseAbs().maxCoeff());
    const ComplexMatrix cm = cgauss(3, 3, rng, 3.0);
    const ComplexMatrix cp = numerics::project_ball(cm, r);
    diff.add((numerics::project_ball(cp, r) - cp).cwiseAbs().maxCoeff());
  }
  for (int n : {1, 2, 5, 50}) {
    for (int rep = 0; rep < 250; ++rep) {
      const RealVector v = gauss(n, 1, rng, 3.0);
      const RealVector p = numerics::project_simplex(v);
      diff.add((numerics::project_simplex(p) - p).cwiseAbs().maxCoeff());
    }
  }
  const RealMatrix cols = numerics::project_simplex_columns(gauss(4, 30, rng, 2.0));
  diff.add((numerics::project_simplex_columns(cols) - cols).cwiseAbs().maxCoeff());
  return diff.within(1e-12, "|P(P(x)) - P(x)|");
}

Outcome check_simplex_kkt() {
  std::mt19937_64 rng(106);
  Worst kkt;
  Worst oracle;
  for (int n : {1, 2, 5, 50}) {
    for (int rep = 0; rep < 250; ++rep) {
      const RealVector v = gauss(n, 1, rng, 3.0);
      const RealVector s = numerics::project_simplex(v);
      kkt.add(std::abs(s.sum() - 1.0));
      kkt.add(std::max(0.0, -s.minCoeff()));
      // theta from the support; off-support entries must sit below it
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (int i = 0; i < n; ++i) {
        if (s(i) > 0.0) {
          lo = std::min(lo, v(i) - s(i));
          hi = std::max(hi, v(i) - s(i));
        }
      }
      kkt.add(hi - lo);
      for (int i = 0; i < n; ++i)
        if (s(i) == 0.0) kkt.add(std::max(0.0, v(i) - hi));
      // bisection on sum_i max(v_i - theta, 0) = 1
      double a = v.minCoeff() - 1.0;
      double b = v.maxCoeff();
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        ((v.array() - mid).max(0.0).sum() > 1.0 ? a : b) = mid;
      }
      const RealVector ref = (v.array() - 0.5 * (a + b)).max(0.0).matrix();
      oracle.add((s - ref).cwiseAbs().maxCoeff());
    }
  }
  return combine({kkt.within(1e-12, "KKT violation"), oracle.within(1e-12, "deviation from bisection")});
}

Outcome check_ball_kkt() {
  std::mt19937_64 rng(107);
  Worst vi;
  for (int rep = 0; rep < 500; ++rep) {
    const RealVector x = gauss(6, 1, rng, 3.0);
    const double r = uniform(rng, 0.1, 8.0);
    const RealVector p = numerics::project_ball(x, r);
    vi.add(std::max(0.0, p.norm() - r));
    for (int s = 0; s < 10; ++s) {
      RealVector y = gauss(6, 1, rng);
      y *= uniform(rng, 0.0, r) / y.norm();
      vi.add(std::max(0.0, (x - p).dot(y - p)) / (1.0 + x.norm() * r));
    }
  }
  return vi.within(1e-12, "variational-inequality violation");
}

Outcome check_cubic() {
  std::mt19937_64 rng(108);
  Worst res;
  Worst oracle;
  for (int rep = 0; rep < 2000; ++rep) {
    const double a = std::pow(10.0, uniform(rng, -6.0, 6.0));
    const double b = std::pow(10.0, uniform(rng, -6.0, 6.0));
    const double d = rep % 10 == 0 ? 0.0 : std::pow(10.0, uniform(rng, -6.0, 6.0));
    const double s = numerics::solve_monotone_cubic(a, b, d);
    if (d == 0.0) {
      res.add(s);
      continue;
    }
    res.add(std::abs(a * s * s * s + b * s - d) / d);
    double lo = 0.0;
    double hi = std::max(d / b, std::cbrt(d / a));
    for (int it = 0; it < 300; ++it) {
      const double mid = 0.5 * (lo + hi);
      (a * mid * mid * mid + b * mid > d ? hi : lo) = mid;
    }
    oracle.add(std::abs(s - 0.5 * (lo + hi)) / (0.5 * (lo + hi)));
  }
  return combine({res.within(1e-10, "relative cubic residual"), oracle.within(1e-10, "deviation from bisection")});
}

std::vector<Check> numerics_checks() {
  return {{"embedding_isometry", check_embedding},   {"eigen_residual", check_eigen},
          {"svd_residual", check_svd},               {"sylvester_residual", check_sylvester},
          {"projection_idempotent", check_projection_idempotence},
          {"simplex_kkt", check_simplex_kkt},        {"ball_kkt", check_ball_kkt},
          {"cubic_root", check_cubic}};
}

// --------------------------------------------------------------- pdd-core

// minimize ||z||^2 s.t. z_0 - 1 = 0, solved exactly in one block. With a
// positive radius the variable is also restricted to a ball (for the
// set-constrained residual path).
class NormToy final : public BlockProblem<RealVector> {
 public:
  explicit NormToy(double radius = 0.0) : radius_(radius) {}

  std::size_t num_blocks() const override { return 1; }
  std::size_t constraint_dim() const override { return 1; }
  RealVector constraint(const RealVector& z) const override { return RealVector::Constant(1, z(0) - 1.0); }
  double objective(const RealVector& z) const override { return z.squaredNorm(); }
  void update_block(std::size_t, RealVector& z, const RealVector& lambda, double rho) const override {
    z.setZero();
    z(0) = (1.0 / rho - lambda(0)) / (2.0 + 1.0 / rho);
  }
  bool has_gradient() const override { return true; }
  RealVector flatten(const RealVector& z) const override { return z; }
  RealVector al_gradient(const RealVector& z, const RealVector& lambda, double rho) const override {
    RealVector g = 2.0 * z;
    g(0) += lambda(0) + (z(0) - 1.0) / rho;
    return g;
  }
  std::size_t constrained_dim() const override { return radius_ > 0.0 ? 4 : 0; }
  RealVector project_constrained(const RealVector& x) const override { return numerics::project_ball(x, radius_); }

 private:
  double radius_;
};

// 0.5 z^T Q z - b^T z over three blocks of three coordinates, exact block solves.
class BlockQuadratic final : public BlockProblem<RealVector> {
 public:
  explicit BlockQuadratic(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const RealMatrix g = gauss(9, 9, rng);
    q_ = g * g.transpose() + 9.0 * RealMatrix::Identity(9, 9);
    b_ = gauss(9, 1, rng);
  }

  std::size_t num_blocks() const override { return 3; }
  std::size_t constraint_dim() const override { return 0; }
  RealVector constraint(const RealVector&) const override { return RealVector(0); }
  double objective(const RealVector& z) const override { return 0.5 * z.dot(q_ * z) - b_.dot(z); }
  void update_block(std::size_t i, RealVector& z, const RealVector&, double) const override {
    const auto s = static_cast<Eigen::Index>(3 * i);
    const RealVector rhs = b_.segment(s, 3) - q_.middleRows(s, 3) * z + q_.block(s, s, 3, 3) * z.segment(s, 3);
    z.segment(s, 3) = q_.block(s, s, 3, 3).llt().solve(rhs);
  }
  RealVector minimizer() const { return q_.llt().solve(b_); }

 private:
  RealMatrix q_;
  RealVector b_;
};

class NanProblem final : public BlockProblem<RealVector> {
 public:
  std::size_t num_blocks() const override { return 1; }
  std::size_t constraint_dim() const override { return 1; }
  RealVector constraint(const RealVector& z) const override { return z.head(1); }
  double objective(const RealVector&) const override { return std::numeric_limits<double>::quiet_NaN(); }
  void update_block(std::size_t, RealVector&, const RealVector&, double) const override {}
};

PddConfig toy_config(Mode mode) {
  PddConfig cfg;
  cfg.mode = mode;
  cfg.rho0 = 1.0;
  cfg.c = 0.5;
  cfg.eps0 = 1e-12;
  cfg.eps_outer = 1e-7;
  cfg.max_outer = 50;
  cfg.block_order = BlockOrder::Cyclic;
  return cfg;
}

Outcome toy_converges(Mode mode) {
  const NormToy toy;
  const auto res = pdd_run(toy, RealVector(RealVector::Zero(4)), RealVector(RealVector::Zero(1)), toy_config(mode));
  RealVector target = RealVector::Zero(4);
  target(0) = 1.0;
  const double zerr = (res.z - target).norm();
  const double lerr = std::abs(res.lambda(0) + 2.0);
  const double h = res.trace.records.empty() ? 1.0 : res.trace.records.back().h_inf;
  const bool ok = res.converged && h < 1e-6 && zerr <= 1e-6 && lerr <= 1e-5;
  return {ok, "converged=" + std::string(res.converged ? "yes" : "no") + " in " +
                  std::to_string(res.trace.records.size()) + " outer, |h|=" + fmt(h) + ", |z-z*|=" + fmt(zerr) +
                  ", |lambda+2|=" + fmt(lerr)};
}

Outcome check_schedule_toy(Mode mode) {
  const NormToy toy;
  PddConfig cfg = toy_config(mode);
  cfg.eta0 = 0.05;  // forces early penalty steps in PDD mode
  cfg.max_outer = 30;
  cfg.eps_outer = 1e-300;  // run every outer iteration
  return schedule_identities<RealVector>(toy, RealVector::Zero(4), RealVector::Constant(1, 3.0), cfg);
}

Outcome check_dual_branch_h() {
  const NormToy toy;
  PddConfig cfg = toy_config(Mode::Pdd);
  cfg.eta0 = 0.05;
  cfg.eps_outer = 1e-300;  // run every outer iteration
  const auto res = pdd_run(toy, RealVector(RealVector::Zero(4)), RealVector::Constant(1, 3.0), cfg);
  Tally t;
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& r : res.trace.records) {
    if (r.branch != Branch::DualUpdate) continue;
    t.expect(r.h_inf <= prev, "h_inf rose to " + fmt(r.h_inf) + " at outer " + std::to_string(r.k));
    prev = r.h_inf;
  }
  return t.outcome("dual-branch h_inf non-increase");
}

Outcome check_single_block_constant() {
  const NormToy toy;
  RealVector z = RealVector::Constant(4, 0.7);
  const RealVector lambda = RealVector::Constant(1, 0.3);
  std::mt19937_64 rng(1);
  Worst drift;
  rbsum_run(toy, z, lambda, 0.8, InnerStop::IterationCap, 0.0, 1, BlockOrder::Randomized, rng);
  const double first = toy.augmented_lagrangian(z, lambda, 0.8);
  for (int s = 0; s < 5; ++s) {
    rbsum_run(toy, z, lambda, 0.8, InnerStop::IterationCap, 0.0, 1, BlockOrder::Randomized, rng);
    drift.add(std::abs(toy.augmented_lagrangian(z, lambda, 0.8) - first));
  }
  return drift.within(0.0, "AL change after the first sweep");
}

Outcome check_rbsum_order() {
  Tally t;
  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::size_t lead = 0; lead < n; ++lead) {
      std::vector<std::size_t> expect{lead};
      for (std::size_t i = 0; i < n; ++i)
        if (i != lead) expect.push_back(i);
      t.expect(rbsum_order(n, lead) == expect, "wrong order for n=" + std::to_string(n));
    }
  }
  return t.outcome("visit order (i, 0, ..., n-1 without i)");
}

Outcome check_rbsum_reproducible() {
  const BlockQuadratic q(7);
  auto run = [&](std::uint64_t seed) {
    Recorder<RealVector> rec(q);
    RealVector z = RealVector::Zero(9);
    std::mt19937_64 rng(seed);
    rbsum_run(rec, z, RealVector(0), 1.0, InnerStop::IterationCap, 0.0, 20, BlockOrder::Randomized, rng);
    std::vector<std::size_t> order;
    for (const auto& c : rec.calls) order.push_back(c.block);
    return std::make_pair(order, z);
  };
  const auto a = run(42);
  const auto b = run(42);
  const auto c = run(43);
  const bool same = a.first == b.first && (a.second.array() == b.second.array()).all();
  const bool differs = a.first != c.first;
  return {same && differs, std::string("same seed identical: ") + (same ? "yes" : "no") +
                               ", other seed changes the order: " + (differs ? "yes" : "no")};
}

Outcome check_rbsum_quadratic() {
  Worst err;
  for (std::uint64_t seed : {1, 2, 3}) {
    const BlockQuadratic q(seed);
    for (BlockOrder order : {BlockOrder::Randomized, BlockOrder::Cyclic}) {
      RealVector z = RealVector::Zero(9);
      std::mt19937_64 rng(seed);
      rbsum_run(q, z, RealVector(0), 1.0, InnerStop::ObjectiveProgress, 1e-18, 2000, order, rng);
      err.add((z - q.minimizer()).norm());
    }
  }
  return err.within(1e-6, "distance to the normal-equations solution");
}

Outcome check_rbsum_monotone() {
  Worst rise;
  for (std::uint64_t seed : {4, 5}) {
    const BlockQuadratic q(seed);
    std::mt19937_64 rng(seed);
    inner_monotone<RealVector>(rise, q, gauss(9, 1, rng, 5.0), RealVector(0), 1.0, 40, BlockOrder::Randomized, seed);
  }
  return rise.within(1e-9, kRise);
}

Outcome check_stationarity() {
  const RealVector lambda = RealVector::Constant(1, -0.4);
  const double rho = 0.3;
  Worst e;
  RealVector z = RealVector::Zero(4);
  const NormToy free_toy;
  free_toy.update_block(0, z, lambda, rho);
  e.add(stationarity_residuals(free_toy, z, lambda, rho).inf_norm());
  const NormToy ball_toy(10.0);
  e.add(stationarity_residuals(ball_toy, z, lambda, rho).inf_norm());
  // away from the minimizer the unconstrained residual is -grad
  std::mt19937_64 rng(9);
  const RealVector y = gauss(4, 1, rng);
  const Residuals r = stationarity_residuals(free_toy, y, lambda, rho);
  e.add((r.delta - free_toy.al_gradient(y, lambda, rho)).cwiseAbs().maxCoeff());
  return e.within(1e-8, "residual at the exact minimizer");
}

Outcome check_toy_gradient() {
  const NormToy toy;
  std::mt19937_64 rng(10);
  Worst err;
  for (int rep = 0; rep < 20; ++rep) {
    const RealVector z = gauss(4, 1, rng);
    const RealVector lambda = gauss(1, 1, rng);
    const double rho = uniform(rng, 0.1, 2.0);
    const auto f = [&](const RealVector& x) { return toy.augmented_lagrangian(x, lambda, rho); };
    err.add(rel_err(fd_gradient(f, z), toy.al_gradient(z, lambda, rho)));
  }
  return err.within(1e-4, "relative gradient error");
}

Outcome check_errors() {
  Tally t;
  const BlockQuadratic q(1);
  try {
    stationarity_residuals(q, RealVector(RealVector::Zero(9)), RealVector(0), 1.0);
    t.expect(false, "no UnsupportedOperation without gradient support");
  } catch (const UnsupportedOperation&) {
    t.expect(true, "");
  }
  const NanProblem nan;
  try {
    pdd_run(nan, RealVector(RealVector::Ones(1)), RealVector(RealVector::Zero(1)), PddConfig{});
    t.expect(false, "no NumericalFailure on a NaN augmented Lagrangian");
  } catch (const NumericalFailure&) {
    t.expect(true, "");
  }
  return t.outcome("error reporting");
}

std::vector<Check> core_checks() {
  return {{"ipdd_toy", [] { return toy_converges(Mode::Ipdd); }},
          {"pdd_toy", [] { return toy_converges(Mode::Pdd); }},
          {"schedule_pdd", [] { return check_schedule_toy(Mode::Pdd); }},
          {"schedule_ipdd", [] { return check_schedule_toy(Mode::Ipdd); }},
          {"dual_branch_h_nonincreasing", check_dual_branch_h},
          {"single_block_constant", check_single_block_constant},
          {"rbsum_order", check_rbsum_order},
          {"rbsum_reproducible", check_rbsum_reproducible},
          {"rbsum_quadratic_oracle", check_rbsum_quadratic},
          {"rbsum_monotone", check_rbsum_monotone},
          {"stationarity_residuals", check_stationarity},
          {"gradient_fd", check_toy_gradient},
          {"error_reporting", check_errors}};
}

// --------------------------------------------------------------- multicast

Outcome mc_surrogate() {
  std::mt19937_64 rng(201);
  Worst dominance;
  Worst tight;
  const int shapes[][3] = {{8, 4, 2}, {4, 1, 1}, {4, 2, 3}};
  for (const auto& sh : shapes) {
    for (int rep = 0; rep < 10; ++rep) {
      const auto inst = multicast::random_instance(sh[0], sh[1], sh[2], 10.0, rng());
      const int n = inst.dim();
      ComplexVector wt = cgauss(n, 1, rng);
      wt.normalize();
      RealVector t(inst.num_users);
      for (int k = 0; k < inst.num_users; ++k)
        t(k) = multicast::a_norm(wt, inst, k) / multicast::b_norm(wt, inst, k) * uniform(rng, 0.5, 1.5);
      const RealVector lambda = gauss(inst.num_users, 1, rng, 2.0);
      const double rho = uniform(rng, 0.1, 4.0);
      const auto sur = multicast::build_surrogate_C(wt, t, lambda, rho, inst);
      auto u = [&](const ComplexVector& w) {
        const RealVector we = numerics::real_embed_vec(w);
        return we.dot(sur.c * we) + sur.constant;
      };
      const double th0 = multicast::theta(wt, t, lambda, rho, inst);
      tight.add(std::abs(u(wt) - th0) / std::max(1.0, th0));
      for (int s = 0; s < 120; ++s) {
        ComplexVector w = s < 100 ? ComplexVector(cgauss(n, 1, rng)) : ComplexVector(wt + cgauss(n, 1, rng, 1e-3));
        w.normalize();
        const double th = multicast::theta(w, t, lambda, rho, inst);
        dominance.add(std::max(0.0, th - u(w)) / std::max(1.0, th));
      }
    }
  }
  return combine({dominance.within(1e-8, "surrogate undercut"), tight.within(1e-8, "gap at the expansion point")});
}

Outcome mc_gradient() {
  std::mt19937_64 rng(202);
  Worst err;
  for (int rep = 0; rep < 10; ++rep) {
    const auto inst = multicast::random_instance(4, 2, 2, 10.0, rng());
    const int n = inst.dim();
    multicast::MulticastIterate z{ComplexVector(cgauss(n, 1, rng)), RealVector(RealVector::Zero(inst.num_users))};
    for (int k = 0; k < inst.num_users; ++k) z.t(k) = uniform(rng, 0.2, 3.0);
    const RealVector lambda = gauss(inst.num_users, 1, rng);
    const double rho = uniform(rng, 0.2, 2.0);
    RealVector flat(2 * n + inst.num_users);
    flat << numerics::real_embed_vec(z.w), z.t;
    const auto f = [&](const RealVector& x) {
      const ComplexVector w = numerics::complex_from_embed(x.head(2 * n));
      const RealVector h = multicast::constraint_h(w, x.tail(inst.num_users), inst).head(inst.num_users);
      return lambda.dot(h) + h.squaredNorm() / (2.0 * rho);
    };
    err.add(rel_err(fd_gradient(f, flat), multicast::penalty_gradient(z, lambda, rho, inst)));
  }
  return err.within(1e-4, "relative gradient error");
}

Outcome mc_t_subproblem() {
  std::mt19937_64 rng(203);
  Tally exact;
  Worst undercut;
  for (int rep = 0; rep < 300; ++rep) {
    const int n = 1 + static_cast<int>(rng() % 8);
    RealVector a(n);
    for (int k = 0; k < n; ++k) a(k) = std::pow(10.0, uniform(rng, -2.0, 2.0));
    const RealVector b = gauss(n, 1, rng, 2.0);
    const auto sol = multicast::solve_t_subproblem(a, b);
    exact.expect((sol.t.array() == b.cwiseMax(sol.s).array()).all(), "t differs from max(b, s)");
    auto phi = [&](const RealVector& t) { return t.minCoeff() - (a.array() * (t - b).array().square()).sum(); };
    const double best = phi(sol.t);
    for (int s = 0; s < 300; ++s) {
      const RealVector cand = (sol.t + gauss(n, 1, rng, s < 150 ? 1e-3 : 1.0)).cwiseMax(0.0);
      undercut.add(std::max(0.0, phi(cand) - best) / std::max(1.0, std::abs(best)));
    }
  }
  return combine({exact.outcome("t_k = max(b_k, s)"), undercut.within(1e-12, "improvement by a random t")});
}

Outcome mc_inner_monotone() {
  std::mt19937_64 rng(204);
  Worst rise;
  for (int rep = 0; rep < 4; ++rep) {
    const auto inst = multicast::random_instance(8, 4, 2, 10.0, rng());
    const multicast::MulticastProblem p(inst);
    const RealVector lambda = gauss(inst.num_users, 1, rng);
    inner_monotone(rise, p, multicast::initial_iterate(inst, rng()), lambda, uniform(rng, 0.5, 4.0), 30,
                   rep % 2 ? BlockOrder::Randomized : BlockOrder::Cyclic, rng());
  }
  return rise.within(1e-9, kRise);
}

Outcome mc_scale_equivariance() {
  std::mt19937_64 rng(205);
  Worst diff;
  for (int rep = 0; rep < 20; ++rep) {
    const auto base = multicast::random_instance(4, 2, 2, 10.0, rng());
    const double beta = uniform(rng, 0.1, 10.0);
    const double alpha = uniform(rng, 0.1, 10.0);
    // noise and power scaled together: A_k, B_k unchanged
    const auto same = multicast::build_instance(base.n_t, base.groups, base.channels, beta * base.sigma2,
                                                beta * base.p_bs);
    // channels by alpha, noise by alpha^2: SINR unchanged
    std::vector<ComplexVector> ch;
    for (const auto& h : base.channels) ch.push_back(alpha * h);
    const auto scaled =
        multicast::build_instance(base.n_t, base.groups, ch, alpha * alpha * base.sigma2, base.p_bs);
    ComplexVector w = cgauss(base.dim(), 1, rng);
    w.normalize();
    for (int k = 0; k < base.num_users; ++k) {
      diff.add((same.a[k] - base.a[k]).norm() / base.a[k].norm());
      diff.add((same.b[k] - base.b[k]).norm() / base.b[k].norm());
    }
    const RealVector s0 = multicast::sinr(std::sqrt(base.p_bs) * w, base);
    diff.add((multicast::sinr(std::sqrt(same.p_bs) * w, same) - s0).norm() / s0.norm());
    diff.add((multicast::sinr(std::sqrt(scaled.p_bs) * w, scaled) - s0).norm() / s0.norm());
  }
  return diff.within(1e-12, "relative change");
}

Outcome mc_kkt_oracle() {
  std::mt19937_64 rng(206);
  Worst kkt;
  Worst rate;
  for (int rep = 0; rep < 10; ++rep) {
    const auto inst = multicast::random_instance(4, 1, 1, 10.0, rng());
    Eigen::GeneralizedSelfAdjointEigenSolver<ComplexMatrix> ges(inst.a[0], inst.b[0]);
    ComplexVector w = ges.eigenvectors().col(inst.dim() - 1);
    w.normalize();
    kkt.add(multicast::kkt_residual(w, inst));
    const double opt = std::log2(1.0 + ges.eigenvalues()(inst.dim() - 1));
    rate.add(rel_gap(multicast::min_rate(std::sqrt(inst.p_bs) * w, inst), opt));
  }
  return combine({kkt.within(1e-8, "KKT residual at the generalized eigenvector"),
                  rate.within(1e-10, "rate mismatch at the generalized eigenvector")});
}

Outcome mc_schedule() {
  const auto inst = multicast::random_instance(8, 4, 2, 10.0, 3);
  const multicast::MulticastProblem p(inst);
  PddConfig cfg = multicast::default_config(inst);
  cfg.max_outer = 15;
  return schedule_identities(p, multicast::initial_iterate(inst, 3), RealVector::Zero(inst.num_users), cfg);
}

Outcome mc_reproducible() {
  const auto inst = multicast::random_instance(4, 2, 2, 10.0, 11);
  PddConfig cfg = multicast::default_config(inst);
  cfg.max_outer = 10;
  cfg.block_order = BlockOrder::Randomized;
  const auto a = multicast::solve(inst, cfg);
  const auto b = multicast::solve(inst, cfg);
  const bool same = (a.w_unit.array() == b.w_unit.array()).all() && (a.t.array() == b.t.array()).all();
  return {same, same ? "identical iterates for a fixed seed" : "iterates differ for a fixed seed"};
}

// Reported, not asserted: share of dual-branch steps that do not raise h_inf.
Outcome mc_feasibility_trend() {
  int steps = 0;
  int kept = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto inst = multicast::random_instance(8, 4, 2, 10.0, seed);
    const auto res = multicast::solve(inst, multicast::default_config(inst));
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& r : res.trace.records) {
      if (r.branch != Branch::DualUpdate) continue;
      ++steps;
      if (r.h_inf <= prev) ++kept;
      prev = r.h_inf;
    }
  }
  const double share = steps ? static_cast<double>(kept) / steps : 1.0;
  return {true, "informational: " + std::to_string(kept) + "/" + std::to_string(steps) +
                    " dual-branch steps without an h_inf increase (" + fmt(100.0 * share) + "%, soft target 95%)"};
}

std::vector<Check> multicast_checks() {
  return {{"surrogate_dominance", mc_surrogate},     {"penalty_gradient_fd", mc_gradient},
          {"t_subproblem", mc_t_subproblem},         {"inner_monotone", mc_inner_monotone},
          {"scale_equivariance", mc_scale_equivariance}, {"kkt_oracle", mc_kkt_oracle},
          {"schedule_identities", mc_schedule},      {"seeded_reproducible", mc_reproducible},
          {"feasibility_trend", mc_feasibility_trend}};
}

// ------------------------------------------------------------------ relay

relay::RelayIterate random_relay_iterate(const relay::RelayInstance& inst, std::mt19937_64& rng) {
  relay::RelayIterate z = relay::initial_iterate(inst, rng());
  for (ComplexMatrix* m : {&z.v, &z.f, &z.x, &z.vb, &z.fb, &z.xb}) *m += cgauss(m->rows(), m->cols(), rng, 0.5);
  std::tie(z.u, z.w) = relay::wmmse_weights(z.x, z.f, inst);
  return z;
}

RealVector random_relay_duals(const relay::RelayInstance& inst, std::mt19937_64& rng) {
  return gauss(static_cast<Eigen::Index>(relay::constraint_dim(inst)), 1, rng, 0.5);
}

bool bars_feasible(const ComplexMatrix& vb, const ComplexMatrix& xb, const ComplexMatrix& fb,
                   const relay::RelayInstance& inst) {
  return vb.squaredNorm() <= inst.p_s * (1.0 + 1e-12) &&
         xb.squaredNorm() + inst.sigma_r2 * fb.squaredNorm() <= inst.p_r * (1.0 + 1e-12);
}

// Random point of the barred feasible set, scaled directly into both budgets.
relay::RelayIterate random_feasible_bars(relay::RelayIterate z, const relay::RelayInstance& inst,
                                         std::mt19937_64& rng) {
  z.vb = cgauss(z.vb.rows(), z.vb.cols(), rng);
  z.vb *= std::sqrt(inst.p_s) * uniform(rng, 0.0, 1.0) / z.vb.norm();
  z.xb = cgauss(z.xb.rows(), z.xb.cols(), rng);
  z.fb = cgauss(z.fb.rows(), z.fb.cols(), rng);
  const double e = std::sqrt(z.xb.squaredNorm() + inst.sigma_r2 * z.fb.squaredNorm());
  const double s = std::sqrt(inst.p_r) * uniform(rng, 0.0, 1.0) / e;
  z.xb *= s;
  z.fb *= s;
  return z;
}

const int kRelayShapes[][3] = {{4, 4, 4}, {1, 1, 1}, {2, 3, 2}};

Outcome rl_weights() {
  std::mt19937_64 rng(301);
  Tally ge1;
  Worst ident;
  for (const auto& sh : kRelayShapes) {
    for (int rep = 0; rep < 30; ++rep) {
      const auto inst = relay::random_instance(sh[0], sh[1], sh[2], 10.0, rng());
      const auto z = random_relay_iterate(inst, rng);
      const RealVector g = relay::sinr_x(z.x, z.f, inst);
      for (int k = 0; k < inst.k; ++k) {
        ge1.expect(z.w(k) >= 1.0, "weight below 1");
        ident.add(rel_gap(z.w(k), 1.0 + g(k)));
        // the optimal receive scalar attains e_k = 1 / (1 + SINR_k)
        ident.add(std::abs(relay::mse(z.u(k), z.x, z.f, inst, k) - 1.0 / (1.0 + g(k))));
      }
    }
  }
  return combine({ge1.outcome("w_k >= 1"), ident.within(1e-10, "deviation from w = 1 + SINR, e = 1/(1+SINR)")});
}

Outcome rl_lower_bound() {
  std::mt19937_64 rng(302);
  Worst undercut;
  Worst tight;
  for (const auto& sh : kRelayShapes) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto inst = relay::random_instance(sh[0], sh[1], sh[2], 10.0, rng());
      const ComplexMatrix xt = cgauss(inst.n_r, inst.k, rng);
      const ComplexMatrix ft = cgauss(inst.n_r, inst.n_r, rng);
      const auto [ut, wt] = relay::wmmse_weights(xt, ft, inst);
      auto bound = [&](const ComplexMatrix& x, const ComplexMatrix& f, int k) {
        return std::log(wt(k)) - wt(k) * relay::mse(ut(k), x, f, inst, k) + 1.0;
      };
      const RealVector g0 = relay::sinr_x(xt, ft, inst);
      for (int k = 0; k < inst.k; ++k) tight.add(std::abs(std::log1p(g0(k)) - bound(xt, ft, k)));
      for (int s = 0; s < 100; ++s) {
        const double scale = s % 2 ? 1.0 : 0.1;
        const ComplexMatrix x = s % 2 ? ComplexMatrix(cgauss(inst.n_r, inst.k, rng))
                                      : ComplexMatrix(xt + cgauss(inst.n_r, inst.k, rng, scale));
        const ComplexMatrix f = s % 2 ? ComplexMatrix(cgauss(inst.n_r, inst.n_r, rng))
                                      : ComplexMatrix(ft + cgauss(inst.n_r, inst.n_r, rng, scale));
        const RealVector g = relay::sinr_x(x, f, inst);
        for (int k = 0; k < inst.k; ++k) undercut.add(std::max(0.0, bound(x, f, k) - std::log1p(g(k))));
      }
    }
  }
  return combine({undercut.within(1e-8, "bound above the rate"), tight.within(1e-8, "gap at the expansion point")});
}

Outcome rl_gradient() {
  std::mt19937_64 rng(303);
  Worst err;
  for (const auto& sh : kRelayShapes) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto inst = relay::random_instance(sh[0], sh[1], sh[2], 10.0, rng());
      const auto z = random_relay_iterate(inst, rng);
      const RealVector lambda = random_relay_duals(inst, rng);
      const double rho = uniform(rng, 0.2, 2.0);
      const auto f = [&](const RealVector& x) {
        return relay::augmented_lagrangian(relay::unflatten(x, z), lambda, rho, inst);
      };
      err.add(rel_err(fd_gradient(f, relay::flatten(z)), relay::al_gradient(z, lambda, rho, inst)));
    }
  }
  return err.within(1e-4, "relative gradient error");
}

// Finite-difference gradient of the block surrogate over flat[start, start + len).
RealVector surrogate_block_gradient(const relay::RelayIterate& z, const relay::RelayDuals& d, double rho,
                                    const relay::RelayInstance& inst, Eigen::Index start, Eigen::Index len) {
  const RealVector flat = relay::flatten(z);
  const auto f = [&](const RealVector& part) {
    RealVector x = flat;
    x.segment(start, len) = part;
    return relay::surrogate_objective(relay::unflatten(x, z), d, rho, inst);
  };
  return fd_gradient(f, flat.segment(start, len));
}

Outcome rl_block_optimality() {
  std::mt19937_64 rng(304);
  Worst stat;
  Worst vi;
  Tally feas;
  for (const auto& sh : kRelayShapes) {
    for (int rep = 0; rep < 4; ++rep) {
      const auto inst = relay::random_instance(sh[0], sh[1], sh[2], 10.0, rng());
      relay::RelayIterate z = random_relay_iterate(inst, rng);
      const RealVector lambda = random_relay_duals(inst, rng);
      const auto d = relay::unpack_duals(lambda, inst);
      const double rho = uniform(rng, 0.2, 2.0);
      const Eigen::Index nv = 2 * z.v.size();
      const Eigen::Index nf = 2 * z.f.size();
      const Eigen::Index nx = 2 * z.x.size();
      const Eigen::Index nb = nv + nf + nx;
      // unconstrained blocks: [.. | V, F, X]
      auto check_block = [&](Eigen::Index start, Eigen::Index len, const std::function<void()>& update) {
        const double before = surrogate_block_gradient(z, d, rho, inst, start, len).norm();
        update();
        const double after = surrogate_block_gradient(z, d, rho, inst, start, len).norm();
        stat.add(after / std::max(1.0, before));
      };
      check_block(nb, nv, [&] { z.v = relay::update_V(z, d, rho, inst); });
      check_block(nb + nv, nf, [&] { z.f = relay::update_F(z, d, rho, inst); });
      check_block(nb + nv + nf, nx, [&] { z.x = relay::update_X(z, d, rho, inst); });
      // barred block: projection optimality <grad, y - p> >= 0 over the feasible set
      const auto bars = relay::update_bars(z, d, rho, inst);
      z.vb = bars.vb;
      z.xb = bars.xb;
      z.fb = bars.fb;
      feas.expect(bars_feasible(z.vb, z.xb, z.fb, inst), "barred update left the power sets");
      const RealVector g = relay::al_gradient(z, lambda, rho, inst).head(nb);
      const RealVector p = relay::flatten(z).head(nb);
      for (int s = 0; s < 50; ++s) {
        const RealVector y = relay::flatten(random_feasible_bars(z, inst, rng)).head(nb);
        vi.add(std::max(0.0, -g.dot(y - p)) / std::max(1.0, g.norm() * (y - p).norm()));
      }
    }
  }
  return combine({stat.within(1e-6, "block gradient after update (relative)"),
                  vi.within(1e-9, "projection optimality violation"), feas.outcome("barred feasibility")});
}

Outcome rl_projection() {
  std::mt19937_64 rng(305);
  Worst idem;
  Worst vi;
  Tally feas;
  for (const auto& sh : kRelayShapes) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto inst = relay::random_instance(sh[0], sh[1], sh[2], uniform(rng, 0.0, 20.0), rng());
      const auto z = random_relay_iterate(inst, rng);
      const Eigen::Index nb = 2 * (z.vb.size() + z.xb.size() + z.fb.size());
      const RealVector tail = relay::flatten(z).tail(relay::flatten(z).size() - nb);
      const RealVector x = gauss(nb, 1, rng, rep % 2 ? 5.0 : 0.5);
      const RealVector p = relay::project_bars(x, inst);
      idem.add((relay::project_bars(p, inst) - p).cwiseAbs().maxCoeff() / std::max(1.0, p.norm()));
      RealVector full(nb + tail.size());
      full << p, tail;
      const auto zp = relay::unflatten(full, z);
      feas.expect(bars_feasible(zp.vb, zp.xb, zp.fb, inst), "projection left the power sets");
      for (int s = 0; s < 30; ++s) {
        const RealVector y = relay::flatten(random_feasible_bars(z, inst, rng)).head(nb);
        vi.add(std::max(0.0, (x - p).dot(y - p)) / std::max(1.0, (x - p).norm() * (y - p).norm()));
      }
    }
  }
  return combine({idem.within(1e-12, "|P(P(x)) - P(x)|"), vi.within(1e-8, "variational-inequality violation"),
                  feas.outcome("feasibility")});
}

Outcome rl_inner_steps() {
  std::mt19937_64 rng(306);
  Worst rise;
  Worst tight;
  Tally feas;
  for (const auto& sh : kRelayShapes) {
    for (int rep = 0; rep < 4; ++rep) {
      const auto inst = relay::random_instance(sh[0], sh[1], sh[2], 10.0, rng());
      relay::RelayIterate z = relay::initial_iterate(inst, rng());
      const RealVector lambda = random_relay_duals(inst, rng);
      const double rho = uniform(rng, 0.2, 2.0);
      double prev = relay::augmented_lagrangian(z, lambda, rho, inst);
      for (int s = 0; s < 30; ++s) {
        z = relay::bsum_inner_step(z, lambda, rho, inst);
        feas.expect(bars_feasible(z.vb, z.xb, z.fb, inst), "barred copies infeasible after a step");
        const double cur = relay::augmented_lagrangian(z, lambda, rho, inst);
        rise.add(std::max(0.0, cur - prev) / (1.0 + std::abs(prev)));
        prev = cur;
        // refreshed WMMSE weights make the surrogate exact
        relay::RelayIterate r = z;
        std::tie(r.u, r.w) = relay::wmmse_weights(r.x, r.f, inst);
        tight.add(rel_gap(relay::surrogate_objective(r, relay::unpack_duals(lambda, inst), rho, inst), cur));
      }
    }
  }
  return combine({rise.within(1e-9, "relative AL increase per step"), tight.within(1e-10, "surrogate gap"),
                  feas.outcome("barred feasibility")});
}

Outcome rl_rbsum_monotone() {
  std::mt19937_64 rng(307);
  const auto inst = relay::random_instance(4, 4, 4, 10.0, 5);
  const relay::RelayProblem p(inst);
  Worst rise;
  inner_monotone(rise, p, relay::initial_iterate(inst, 5), random_relay_duals(inst, rng), 0.5, 40,
                 BlockOrder::Randomized, 5);
  return rise.within(1e-9, kRise);
}

Outcome rl_schedule() {
  const auto inst = relay::random_instance(4, 4, 4, 10.0, 2);
  const relay::RelayProblem p(inst);
  PddConfig cfg = relay::default_config(inst);
  cfg.max_outer = 12;
  return schedule_identities(p, relay::initial_iterate(inst, 2), RealVector::Zero(relay::constraint_dim(inst)), cfg);
}

std::vector<Check> relay_checks() {
  return {{"wmmse_weights", rl_weights},           {"rate_lower_bound", rl_lower_bound},
          {"al_gradient_fd", rl_gradient},         {"block_optimality", rl_block_optimality},
          {"bars_projection", rl_projection},      {"inner_steps", rl_inner_steps},
          {"rbsum_monotone", rl_rbsum_monotone},   {"schedule_identities", rl_schedule}};
}

// ----------------------------------------------------------------- volmin

struct VmCase {
  volmin::VolMinInstance inst;
  volmin::VolMinIterate z;
  RealVector lambda;
  double rho;
};

VmCase random_vm_case(std::mt19937_64& rng, int n = 6, int k = 3, int l = 30) {
  auto [inst, truth] = volmin::gen_data(n, k, l, 0.8, 30.0, rng());
  (void)truth;
  VmCase c{std::move(inst), {}, {}, uniform(rng, 0.05, 1.0)};
  c.z = volmin::initial_iterate(c.inst, rng());
  c.z.y = c.z.x + gauss(n, k, rng, 0.1);
  c.z.x += gauss(n, k, rng, 0.1);
  c.lambda = gauss(static_cast<Eigen::Index>(volmin::constraint_dim(c.inst)), 1, rng, 0.2);
  return c;
}

Outcome vm_g_eps() {
  Worst deriv;
  Worst cont;
  for (double eps : {1e-2, 1e-1, 1.0}) {
    for (int i = 0; i <= 3000; ++i) {
      const double x = 3.0 * eps * i / 3000.0;
      const double h = 1e-8 * std::max(1.0, eps);
      const double fd = (volmin::g_eps(x + h, eps) - volmin::g_eps(x - h, eps)) / (2.0 * h);
      deriv.add(std::abs(fd - volmin::g_eps_deriv(x, eps)));
    }
    const double below = std::nextafter(eps, 0.0);
    cont.add(std::abs(volmin::g_eps(below, eps) - volmin::g_eps(eps, eps)));
    cont.add(std::abs(volmin::g_eps_deriv(below, eps) - volmin::g_eps_deriv(eps, eps)));
  }
  return combine({deriv.within(1e-6, "derivative mismatch across eps"), cont.within(1e-12, "jump at eps")});
}

Outcome vm_f_eps_logdet() {
  std::mt19937_64 rng(401);
  Worst err;
  for (int rep = 0; rep < 100; ++rep) {
    const RealMatrix x = gauss(8, 3, rng) + 3.0 * RealMatrix::Identity(8, 3);
    const double ref = std::log((x.transpose() * x).determinant());
    err.add(rel_gap(volmin::f_eps(x, 1e-2), ref));
  }
  return err.within(1e-10, "deviation from log det(X^T X)");
}

Outcome vm_gradient() {
  std::mt19937_64 rng(402);
  Worst err;
  for (int rep = 0; rep < 6; ++rep) {
    const VmCase c = random_vm_case(rng, 5, 3, 12);
    const volmin::VolMinProblem p(c.inst);
    const auto f = [&](const RealVector& x) { return p.augmented_lagrangian(p.unflatten(x), c.lambda, c.rho); };
    err.add(rel_err(fd_gradient(f, p.flatten(c.z)), p.al_gradient(c.z, c.lambda, c.rho)));
  }
  return err.within(1e-4, "relative gradient error");
}

Outcome vm_update_s() {
  std::mt19937_64 rng(403);
  Worst tight;
  Worst descent;
  Worst dominance;
  Worst simplex;
  for (int rep = 0; rep < 20; ++rep) {
    const VmCase c = random_vm_case(rng);
    const auto d = volmin::unpack_duals(c.lambda, c.inst);
    const double s1 = numerics::thin_svd(c.z.y).sigma(0);
    const double beta = 1.01 * s1 * s1 + 1e-12;
    const RealMatrix& st = c.z.s;
    const RealMatrix out = volmin::update_S(c.z, d, c.rho, c.inst);
    const double obj0 = volmin::s_objective(st, c.z.y, d, c.rho, c.inst);
    const double scale = 1.0 + std::abs(obj0);
    tight.add(std::abs(volmin::s_majorizer(st, st, c.z.y, d, c.rho, beta, c.inst) - obj0) / scale);
    descent.add(std::max(0.0, volmin::s_majorizer(out, st, c.z.y, d, c.rho, beta, c.inst) - obj0) / scale);
    descent.add(std::max(0.0, volmin::s_objective(out, c.z.y, d, c.rho, c.inst) - obj0) / scale);
    simplex.add((out.colwise().sum().transpose() - RealVector::Ones(out.cols())).cwiseAbs().maxCoeff());
    simplex.add(std::max(0.0, -out.minCoeff()));
    for (int s = 0; s < 30; ++s) {
      const RealMatrix cand = numerics::project_simplex_columns(gauss(st.rows(), st.cols(), rng));
      const double obj = volmin::s_objective(cand, c.z.y, d, c.rho, c.inst);
      dominance.add(std::max(0.0, obj - volmin::s_majorizer(cand, st, c.z.y, d, c.rho, beta, c.inst)) /
                    (1.0 + std::abs(obj)));
    }
  }
  return combine({tight.within(1e-12, "majorizer gap at S~"), descent.within(1e-12, "increase after update"),
                  dominance.within(1e-12, "majorizer undercut"), simplex.within(1e-12, "simplex violation")});
}

Outcome vm_x_scalar_grid() {
  std::mt19937_64 rng(404);
  Worst undercut;
  for (int rep = 0; rep < 200; ++rep) {
    const double eps = rep % 2 ? 1e-2 : 1e-1;
    const double sbar = rep % 10 == 0 ? 0.0 : uniform(rng, 0.0, 2.0);
    const double gt = volmin::g_eps(std::pow(uniform(rng, 0.0, 2.0), 2), eps);
    const double rho = std::pow(10.0, uniform(rng, -2.0, 0.7));
    const double s = volmin::solve_x_scalar(sbar, gt, rho, eps);
    const double val = volmin::x_scalar_objective(s, sbar, gt, rho, eps);
    const double hi = sbar + 3.0 * std::sqrt(eps);
    double grid = std::numeric_limits<double>::infinity();
    for (double x = 0.0; x <= hi; x += 1e-3) grid = std::min(grid, volmin::x_scalar_objective(x, sbar, gt, rho, eps));
    undercut.add(std::max(0.0, val - grid) / std::max(1.0, std::abs(grid)));
  }
  return undercut.within(1e-12, "excess over the 1e-3 grid minimum");
}

Outcome vm_update_x() {
  std::mt19937_64 rng(405);
  Worst align;
  Worst perm;
  Worst descent;
  for (int rep = 0; rep < 30; ++rep) {
    const VmCase c = random_vm_case(rng);
    const auto d = volmin::unpack_duals(c.lambda, c.inst);
    const RealMatrix out = volmin::update_X(c.z, d, c.rho, c.inst);
    const RealMatrix xbar = c.z.y - c.rho * d.q;
    Eigen::JacobiSVD<RealMatrix> svd(xbar, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RealMatrix core = svd.matrixU().transpose() * out * svd.matrixV();
    const RealVector sig = core.diagonal();
    align.add((out - svd.matrixU() * sig.asDiagonal() * svd.matrixV().transpose()).norm() / std::max(1.0, out.norm()));
    // no reassignment of the singular values to other directions brings X closer to X~
    const RealVector sbar = svd.singularValues();
    std::vector<int> idx(sig.size());
    std::iota(idx.begin(), idx.end(), 0);
    const double base = (sig - sbar).squaredNorm();
    do {
      double q = 0.0;
      for (std::size_t i = 0; i < idx.size(); ++i) q += std::pow(sig(idx[i]) - sbar(i), 2);
      perm.add(std::max(0.0, base - q));
    } while (std::next_permutation(idx.begin(), idx.end()));
    const double before = volmin::x_objective(c.z.x, c.z.y, d, c.rho, c.inst);
    const double after = volmin::x_objective(out, c.z.y, d, c.rho, c.inst);
    descent.add(std::max(0.0, after - before) / (1.0 + std::abs(before)));
  }
  return combine({align.within(1e-10, "misalignment with the singular vectors of X~"),
                  perm.within(1e-12, "improvement by permuting singular values"),
                  descent.within(1e-10, "X-block objective increase")});
}

Outcome vm_update_y() {
  std::mt19937_64 rng(406);
  Worst stat;
  for (int rep = 0; rep < 20; ++rep) {
    VmCase c = random_vm_case(rng);
    const volmin::VolMinProblem p(c.inst);
    const Eigen::Index ns = c.z.s.size();
    const Eigen::Index ny = c.z.y.size();
    const double before = p.al_gradient(c.z, c.lambda, c.rho).segment(ns, ny).norm();
    c.z.y = volmin::update_Y(c.z, volmin::unpack_duals(c.lambda, c.inst), c.rho, c.inst);
    const double after = p.al_gradient(c.z, c.lambda, c.rho).segment(ns, ny).norm();
    stat.add(after / std::max(1.0, before));
  }
  return stat.within(1e-8, "Y-block gradient after update (relative)");
}

Outcome vm_inner_monotone() {
  std::mt19937_64 rng(407);
  Worst rise;
  for (int rep = 0; rep < 4; ++rep) {
    const VmCase c = random_vm_case(rng, 10, 3, 100);
    const volmin::VolMinProblem p(c.inst);
    inner_monotone(rise, p, c.z, c.lambda, c.rho, 40, rep % 2 ? BlockOrder::Randomized : BlockOrder::Cyclic, rng());
  }
  return rise.within(1e-9, kRise);
}

Outcome vm_schedule() {
  const auto data = volmin::gen_data(10, 3, 100, 0.8, std::numeric_limits<double>::infinity(), 3);
  const volmin::VolMinProblem p(data.first);
  PddConfig cfg = volmin::default_config(data.first);
  cfg.max_outer = 10;
  return schedule_identities(p, volmin::initial_iterate(data.first, 3),
                             RealVector::Zero(volmin::constraint_dim(data.first)), cfg);
}

std::vector<Check> volmin_checks() {
  return {{"g_eps_c1", vm_g_eps},
          {"f_eps_logdet", vm_f_eps_logdet},
          {"al_gradient_fd", vm_gradient},
          {"update_s_majorization", vm_update_s},
          {"update_x_scalar_grid", vm_x_scalar_grid},
          {"update_x_alignment", vm_update_x},
          {"update_y_stationary", vm_update_y},
          {"inner_monotone", vm_inner_monotone},
          {"schedule_identities", vm_schedule}};
}

std::vector<Check> checks_for(const std::string& name) {
  if (name == "numerics") return numerics_checks();
  if (name == "pdd-core") return core_checks();
  if (name == "multicast") return multicast_checks();
  if (name == "relay") return relay_checks();
  if (name == "volmin") return volmin_checks();
  throw InvalidInput("verify: unknown suite '" + name + "' (expected numerics, pdd-core, multicast, relay, volmin "
                     "or all)");
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"numerics", "pdd-core", "multicast", "relay", "volmin"};
  return names;
}

SuiteReport run_suite(const std::string& name) {
  const auto checks = checks_for(name);
  SuiteReport rep;
  rep.suite = name;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& [id, fn] : checks) {
    CheckResult r;
    r.id = name + "/" + id;
    const auto c0 = std::chrono::steady_clock::now();
    try {
      const Outcome o = fn();
      r.passed = o.ok;
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - c0).count();
    rep.checks.push_back(std::move(r));
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::vector<SuiteReport> run(const std::string& name) {
  std::vector<SuiteReport> out;
  if (name == "all") {
    for (const auto& s : suite_names()) out.push_back(run_suite(s));
  } else {
    out.push_back(run_suite(name));
  }
  return out;
}

}  // namespace pdd::verify
