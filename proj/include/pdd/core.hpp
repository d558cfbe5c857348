#pragma once

// Penalty dual decomposition outer loop (PDD and the increasing-penalty
// variant IPDD) driving a randomized block successive upper-bound
// minimization (rBSUM) inner solver.
//
// Conventions: every problem is posed as a minimization. The augmented
// Lagrangian is
//
//   L(z; lambda, rho) = f(z) + lambda^T h(z) + ||h(z)||^2 / (2 rho)
//
// so rho is an inverse penalty: it shrinks toward 0 to tighten the penalty.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "pdd/error.hpp"
#include "pdd/numerics.hpp"

namespace pdd {

enum class Mode { Pdd, Ipdd };
enum class InnerStop { ObjectiveProgress, Residual, IterationCap };
enum class BlockOrder { Randomized, Cyclic };
enum class Branch { DualUpdate, PenaltyDecrease };

std::string to_string(Mode m);
std::string to_string(InnerStop s);
std::string to_string(BlockOrder o);
std::string to_string(Branch b);
Mode parse_mode(const std::string& s);
InnerStop parse_inner_stop(const std::string& s);
BlockOrder parse_block_order(const std::string& s);

struct PddConfig {
  Mode mode = Mode::Pdd;
  double rho0 = 1.0;
  double c = 0.6;               // rho <- c * rho on the penalty branch
  double tau = 0.9;             // eta_k = tau * min(eta_{k-1}, ||h(z^{k-1})||_inf)
  double eta0 = 0.0;            // <= 0 selects max(1, ||h(z0)||_inf)
  double eps0 = 1e-3;
  double eps_shrink = 0.0;      // <= 0 selects c
  int max_outer = 50;
  int max_inner = 100;
  double eps_outer = 1e-4;
  InnerStop inner_stop = InnerStop::ObjectiveProgress;
  BlockOrder block_order = BlockOrder::Randomized;
  std::uint64_t seed = 1;
  double rho_min_ratio = 1e-8;  // rho floor = rho_min_ratio * rho0; 0 disables

  double effective_eps_shrink() const { return eps_shrink > 0.0 ? eps_shrink : c; }
  double rho_min() const { return rho_min_ratio * rho0; }

  /// Throws InvalidInput on any out-of-range field.
  void validate() const;
};

/// Stationarity residuals: e over set-constrained coordinates, delta over the
/// remaining (nonsmooth-capable) coordinates.
struct Residuals {
  RealVector e;
  RealVector delta;
  double inf_norm() const { return std::max(numerics::inf_norm(e), numerics::inf_norm(delta)); }
};

/// An augmented-Lagrangian problem split into blocks.
///
/// Implementations keep any surrogate state (e.g. WMMSE weights) inside the
/// iterate and refresh it in begin_sweep. update_block must minimize a locally
/// tight upper bound of L in block i, so that L never increases across a sweep.
template <class Iterate>
class BlockProblem {
 public:
  virtual ~BlockProblem() = default;

  virtual std::size_t num_blocks() const = 0;
  virtual std::size_t constraint_dim() const = 0;
  virtual RealVector constraint(const Iterate& z) const = 0;
  /// f(z) in the minimization form used by the augmented Lagrangian.
  virtual double objective(const Iterate& z) const = 0;
  /// Value recorded in traces; defaults to objective().
  virtual double report_objective(const Iterate& z) const { return objective(z); }
  virtual void begin_sweep(Iterate& /*z*/) const {}
  virtual void update_block(std::size_t block, Iterate& z, const RealVector& lambda, double rho) const = 0;

  virtual double augmented_lagrangian(const Iterate& z, const RealVector& lambda, double rho) const {
    const RealVector h = constraint(z);
    return objective(z) + lambda.dot(h) + h.squaredNorm() / (2.0 * rho);
  }

  // Optional first-order interface, used by stationarity_residuals.
  virtual bool has_gradient() const { return false; }
  virtual RealVector flatten(const Iterate& /*z*/) const {
    throw UnsupportedOperation("problem does not expose a flat variable view");
  }
  /// Gradient of the smooth part of L with respect to flatten(z).
  virtual RealVector al_gradient(const Iterate& /*z*/, const RealVector& /*lambda*/, double /*rho*/) const {
    throw UnsupportedOperation("problem does not provide an AL gradient");
  }
  /// Number of leading flat coordinates that belong to set-constrained blocks.
  virtual std::size_t constrained_dim() const { return 0; }
  /// Projection of the constrained coordinates onto their (convex) set.
  virtual RealVector project_constrained(const RealVector& x) const { return x; }
  /// argmin_y { phi'(s(y_k)) s(y) + 0.5 ||y - point||^2 } for the unconstrained
  /// coordinates; `anchor` is y_k. Identity when there is no nonsmooth term.
  virtual RealVector prox_nonsmooth(const RealVector& point, const RealVector& /*anchor*/) const { return point; }
};

struct IterationRecord {
  int k = 0;
  double al_value = 0.0;
  double objective = 0.0;
  double h_inf = 0.0;
  double rho = 0.0;
  double eta = 0.0;
  Branch branch = Branch::DualUpdate;
  int inner_iters = 0;
  double time_ms = 0.0;
  bool rho_floored = false;
};

struct PddTrace {
  std::vector<IterationRecord> records;
  /// Number of inner sweeps whose AL increase exceeded 1e-9 * (1 + |L|).
  int monotonicity_violations = 0;
};

template <class Iterate>
struct PddState {
  Iterate z;
  RealVector lambda;
  double rho = 0.0;
  double eta = 0.0;
  double eps = 0.0;
  int k = 0;
};

template <class Iterate>
struct PddResult {
  Iterate z;
  RealVector lambda;
  double rho = 0.0;
  PddTrace trace;
  bool converged = false;
};

struct InnerResult {
  int iterations = 0;
  bool stop_satisfied = false;  // stopping rule met (not just the cap)
  int monotonicity_violations = 0;
  double al_value = 0.0;
};

/// Observer invoked after each completed outer iteration.
using IterationCallback = std::function<void(const IterationRecord&)>;

/// Stationarity residuals of the AL subproblem at z.
template <class Iterate>
Residuals stationarity_residuals(const BlockProblem<Iterate>& problem, const Iterate& z, const RealVector& lambda,
                                 double rho) {
  if (!problem.has_gradient()) throw UnsupportedOperation("stationarity_residuals: problem has no gradient support");
  const RealVector flat = problem.flatten(z);
  const RealVector grad = problem.al_gradient(z, lambda, rho);
  const auto nx = static_cast<Eigen::Index>(problem.constrained_dim());
  const Eigen::Index ny = flat.size() - nx;
  Residuals r;
  const RealVector x = flat.head(nx);
  r.e = problem.project_constrained(x - grad.head(nx)) - x;
  const RealVector y = flat.tail(ny);
  r.delta = y - problem.prox_nonsmooth(y - grad.tail(ny), y);
  return r;
}

/// One visit order for an rBSUM sweep: (i, 0, 1, ..., i-1, i+1, ..., n-1).
std::vector<std::size_t> rbsum_order(std::size_t num_blocks, std::size_t lead);

/// Inner solver. Runs sweeps until the stop rule is met or max_inner sweeps.
template <class Iterate>
InnerResult rbsum_run(const BlockProblem<Iterate>& problem, Iterate& z, const RealVector& lambda, double rho,
                      InnerStop stop, double eps, int max_inner, BlockOrder order, std::mt19937_64& rng) {
  InnerResult out;
  const std::size_t n = problem.num_blocks();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  double prev = problem.augmented_lagrangian(z, lambda, rho);
  if (!std::isfinite(prev)) throw NumericalFailure("rbsum_run: non-finite augmented Lagrangian at entry", prev);
  for (int it = 0; it < max_inner; ++it) {
    const std::size_t lead = order == BlockOrder::Randomized ? pick(rng) : 0;
    problem.begin_sweep(z);
    for (std::size_t i : rbsum_order(n, lead)) problem.update_block(i, z, lambda, rho);
    const double cur = problem.augmented_lagrangian(z, lambda, rho);
    if (!std::isfinite(cur)) throw NumericalFailure("rbsum_run: non-finite augmented Lagrangian", cur);
    if (cur > prev + 1e-9 * (1.0 + std::abs(prev))) ++out.monotonicity_violations;
    out.iterations = it + 1;
    bool done = false;
    switch (stop) {
      case InnerStop::ObjectiveProgress:
        done = std::abs(cur - prev) / (1.0 + std::abs(prev)) <= eps;
        break;
      case InnerStop::Residual:
        done = stationarity_residuals(problem, z, lambda, rho).inf_norm() <= eps;
        break;
      case InnerStop::IterationCap:
        done = false;
        break;
    }
    prev = cur;
    out.al_value = cur;
    if (done) {
      out.stop_satisfied = true;
      break;
    }
  }
  if (stop == InnerStop::IterationCap) out.stop_satisfied = true;
  if (out.iterations == 0) out.al_value = prev;
  return out;
}

/// Outer PDD / IPDD loop.
template <class Iterate>
PddResult<Iterate> pdd_run(const BlockProblem<Iterate>& problem, Iterate z0, RealVector lambda0,
                           const PddConfig& config, const IterationCallback& on_iteration = {}) {
  config.validate();
  if (static_cast<std::size_t>(lambda0.size()) != problem.constraint_dim()) {
    throw InvalidInput("pdd_run: dual vector has the wrong dimension");
  }
  std::mt19937_64 rng(config.seed);
  PddState<Iterate> st{std::move(z0), std::move(lambda0), config.rho0, 0.0, config.eps0, 0};
  const double h0 = numerics::inf_norm(problem.constraint(st.z));
  st.eta = config.eta0 > 0.0 ? config.eta0 : std::max(1.0, h0);
  const double rho_floor = config.rho_min();

  PddResult<Iterate> res;
  for (st.k = 1; st.k <= config.max_outer; ++st.k) {
    const auto t0 = std::chrono::steady_clock::now();
    InnerResult inner;
    try {
      inner = rbsum_run(problem, st.z, st.lambda, st.rho, config.inner_stop, st.eps, config.max_inner,
                        config.block_order, rng);
    } catch (const NumericalFailure& e) {
      throw NumericalFailure(std::string("outer iteration ") + std::to_string(st.k) + ": " + e.what(), e.residual());
    }
    res.trace.monotonicity_violations += inner.monotonicity_violations;
    const RealVector h = problem.constraint(st.z);
    const double h_inf = numerics::inf_norm(h);
    IterationRecord rec;
    rec.k = st.k;
    rec.al_value = problem.augmented_lagrangian(st.z, st.lambda, st.rho);
    if (!std::isfinite(rec.al_value)) throw NumericalFailure("pdd_run: augmented Lagrangian is NaN", rec.al_value);
    rec.objective = problem.report_objective(st.z);
    rec.h_inf = h_inf;
    rec.rho = st.rho;
    rec.eta = st.eta;
    rec.inner_iters = inner.iterations;

    const double rho_used = st.rho;
    auto shrink_rho = [&] {
      const double next = config.c * st.rho;
      rec.rho_floored = next < rho_floor;
      st.rho = std::max(next, rho_floor);
    };
    if (config.mode == Mode::Ipdd) {
      st.lambda += h / rho_used;
      shrink_rho();
      rec.branch = Branch::DualUpdate;
    } else if (h_inf <= st.eta) {
      st.lambda += h / rho_used;
      rec.branch = Branch::DualUpdate;
    } else {
      shrink_rho();
      rec.branch = Branch::PenaltyDecrease;
    }
    if (!st.lambda.allFinite()) throw NumericalFailure("pdd_run: dual vector became non-finite", h_inf);
    st.eta = config.tau * std::min(st.eta, h_inf);
    st.eps *= config.effective_eps_shrink();
    rec.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    res.trace.records.push_back(rec);
    if (on_iteration) on_iteration(rec);
    if (h_inf <= config.eps_outer && inner.stop_satisfied) {
      res.converged = true;
      break;
    }
  }
  res.z = std::move(st.z);
  res.lambda = std::move(st.lambda);
  res.rho = st.rho;
  return res;
}

}  // namespace pdd
