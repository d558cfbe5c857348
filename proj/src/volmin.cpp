#include "pdd/volmin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "pdd/error.hpp"

namespace pdd::volmin {

namespace {

// Singular values of a tall or square matrix, without the residual checks of thin_svd.
RealVector singular_values(const RealMatrix& m) {
  if (m.size() == 0) return RealVector();
  return Eigen::JacobiSVD<RealMatrix>(m).singularValues();
}

}  // namespace

VolMinInstance make_instance(RealMatrix a, int k, double eps) {
  if (a.rows() < 1 || a.cols() < 1) throw InvalidInput("volmin: empty data matrix");
  if (k < 1 || k > a.rows()) throw InvalidInput("volmin: rank must satisfy 1 <= K <= N");
  if (!(eps > 0.0)) throw InvalidInput("volmin: smoothing must be positive");
  if (!a.allFinite()) throw InvalidInput("volmin: non-finite data");
  VolMinInstance inst;
  inst.a = std::move(a);
  inst.k = k;
  inst.eps = eps;
  return inst;
}

double g_eps(double x, double eps) { return std::abs(x) >= eps ? x : x * x / (2.0 * eps) + eps / 2.0; }

double g_eps_deriv(double x, double eps) { return std::abs(x) >= eps ? 1.0 : x / eps; }

double f_eps(const RealMatrix& x, double eps) {
  const RealVector s = singular_values(x);
  double f = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) f += std::log(g_eps(s(i) * s(i), eps));
  return f;
}

std::size_t constraint_dim(const VolMinInstance& inst) {
  return static_cast<std::size_t>(inst.n()) * (inst.l() + inst.k);
}

VolMinDuals unpack_duals(const RealVector& lambda, const VolMinInstance& inst) {
  if (static_cast<std::size_t>(lambda.size()) != constraint_dim(inst)) throw InvalidInput("volmin: dual size mismatch");
  const Eigen::Index nl = Eigen::Index(inst.n()) * inst.l();
  VolMinDuals d;
  d.p = lambda.head(nl).reshaped(inst.n(), inst.l());
  d.q = lambda.tail(lambda.size() - nl).reshaped(inst.n(), inst.k);
  return d;
}

RealVector pack_duals(const VolMinDuals& d) {
  RealVector out(d.p.size() + d.q.size());
  out << d.p.reshaped(), d.q.reshaped();
  return out;
}

RealVector constraint_h(const VolMinIterate& z, const VolMinInstance& inst) {
  return pack_duals({inst.a - z.y * z.s, z.x - z.y});
}

double augmented_lagrangian(const VolMinIterate& z, const RealVector& lambda, double rho, const VolMinInstance& inst) {
  const RealVector h = constraint_h(z, inst);
  return f_eps(z.x, inst.eps) + lambda.dot(h) + h.squaredNorm() / (2.0 * rho);
}

RealMatrix update_Y(const VolMinIterate& z, const VolMinDuals& d, double rho, const VolMinInstance& inst) {
  const RealMatrix rhs = (inst.a + rho * d.p) * z.s.transpose() + z.x + rho * d.q;
  const RealMatrix gram = RealMatrix::Identity(inst.k, inst.k) + z.s * z.s.transpose();
  // Y gram = rhs, gram symmetric PD.
  return gram.llt().solve(rhs.transpose()).transpose();
}

RealMatrix update_S(const VolMinIterate& z, const VolMinDuals& d, double rho, const VolMinInstance& inst,
                    double beta) {
  const RealMatrix yty = z.y.transpose() * z.y;
  if (beta <= 0.0) {
    const RealVector sv = singular_values(z.y);
    const double s1 = sv.size() ? sv(0) : 0.0;
    beta = 1.01 * s1 * s1 + 1e-12;
  }
  const RealMatrix sbar =
      (z.y.transpose() * (inst.a + rho * d.p) + (beta * RealMatrix::Identity(inst.k, inst.k) - yty) * z.s) / beta;
  return numerics::project_simplex_columns(sbar);
}

double s_objective(const RealMatrix& s, const RealMatrix& y, const VolMinDuals& d, double rho,
                   const VolMinInstance& inst) {
  return 0.5 * (inst.a + rho * d.p - y * s).squaredNorm();
}

double s_majorizer(const RealMatrix& s, const RealMatrix& s_tilde, const RealMatrix& y, const VolMinDuals& d,
                   double rho, double beta, const VolMinInstance& inst) {
  const RealMatrix grad = y.transpose() * (y * s_tilde - inst.a - rho * d.p);
  const RealMatrix ds = s - s_tilde;
  return s_objective(s_tilde, y, d, rho, inst) + (grad.array() * ds.array()).sum() + 0.5 * beta * ds.squaredNorm();
}

double x_scalar_objective(double sigma, double sigma_bar, double g_tilde, double rho, double eps) {
  const double r = sigma - sigma_bar;
  return g_eps(sigma * sigma, eps) / g_tilde + r * r / (2.0 * rho);
}

double solve_x_scalar(double sigma_bar, double g_tilde, double rho, double eps) {
  const double root_eps = std::sqrt(eps);
  const double s1 = std::max(g_tilde * sigma_bar / (2.0 * rho + g_tilde), root_eps);
  double s2 = 0.0;
  if (sigma_bar > 0.0) s2 = numerics::solve_monotone_cubic(2.0 / (eps * g_tilde), 1.0 / rho, sigma_bar / rho);
  s2 = std::clamp(s2, 0.0, root_eps);
  const double v1 = x_scalar_objective(s1, sigma_bar, g_tilde, rho, eps);
  const double v2 = x_scalar_objective(s2, sigma_bar, g_tilde, rho, eps);
  if (v1 < v2) return s1;
  if (v2 < v1) return s2;
  return std::min(s1, s2);
}

RealMatrix update_X(const VolMinIterate& z, const VolMinDuals& d, double rho, const VolMinInstance& inst) {
  const RealMatrix xbar = z.y - rho * d.q;
  const numerics::ThinSvd svd = numerics::thin_svd(xbar);
  const RealVector prev = singular_values(z.x);
  RealVector sigma(svd.sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    const double g_tilde = g_eps(prev(i) * prev(i), inst.eps);
    sigma(i) = solve_x_scalar(svd.sigma(i), g_tilde, rho, inst.eps);
  }
  return svd.u * sigma.asDiagonal() * svd.v.transpose();
}

double x_objective(const RealMatrix& x, const RealMatrix& y, const VolMinDuals& d, double rho,
                   const VolMinInstance& inst) {
  return f_eps(x, inst.eps) + (x - y + rho * d.q).squaredNorm() / (2.0 * rho);
}

void VolMinProblem::update_block(std::size_t block, VolMinIterate& z, const RealVector& lambda, double rho) const {
  const VolMinDuals d = unpack_duals(lambda, inst_);
  switch (block) {
    case 0:
      z.y = update_Y(z, d, rho, inst_);
      break;
    case 1:
      z.s = update_S(z, d, rho, inst_);
      break;
    case 2:
      z.x = update_X(z, d, rho, inst_);
      break;
    default:
      throw InvalidInput("volmin: block index out of range");
  }
}

RealVector VolMinProblem::flatten(const VolMinIterate& z) const {
  RealVector out(z.s.size() + z.y.size() + z.x.size());
  out << z.s.reshaped(), z.y.reshaped(), z.x.reshaped();
  return out;
}

VolMinIterate VolMinProblem::unflatten(const RealVector& flat) const {
  const Eigen::Index ns = Eigen::Index(inst_.k) * inst_.l();
  const Eigen::Index nx = Eigen::Index(inst_.n()) * inst_.k;
  if (flat.size() != ns + 2 * nx) throw InvalidInput("volmin: flat vector size mismatch");
  VolMinIterate z;
  z.s = flat.head(ns).reshaped(inst_.k, inst_.l());
  z.y = flat.segment(ns, nx).reshaped(inst_.n(), inst_.k);
  z.x = flat.tail(nx).reshaped(inst_.n(), inst_.k);
  return z;
}

RealVector VolMinProblem::al_gradient(const VolMinIterate& z, const RealVector& lambda, double rho) const {
  const VolMinDuals d = unpack_duals(lambda, inst_);
  const RealMatrix q1 = d.p + (inst_.a - z.y * z.s) / rho;
  const RealMatrix q2 = d.q + (z.x - z.y) / rho;
  const RealMatrix gs = -z.y.transpose() * q1;
  const RealMatrix gy = -q1 * z.s.transpose() - q2;
  const numerics::ThinSvd svd = numerics::thin_svd(z.x);
  RealVector w(svd.sigma.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double s = svd.sigma(i);
    w(i) = 2.0 * s * g_eps_deriv(s * s, inst_.eps) / g_eps(s * s, inst_.eps);
  }
  const RealMatrix gx = q2 + svd.u * w.asDiagonal() * svd.v.transpose();
  RealVector out(gs.size() + gy.size() + gx.size());
  out << gs.reshaped(), gy.reshaped(), gx.reshaped();
  return out;
}

RealVector VolMinProblem::project_constrained(const RealVector& x) const {
  const RealMatrix s = x.reshaped(inst_.k, inst_.l());
  return numerics::project_simplex_columns(s).reshaped();
}

PddConfig default_config(const VolMinInstance& inst) {
  PddConfig cfg;
  cfg.rho0 = inst.l() / 100.0;
  cfg.c = 0.6;
  cfg.eps0 = 1e-3;
  cfg.eps_outer = 1e-6;
  cfg.max_outer = 30;
  cfg.max_inner = 100;
  cfg.block_order = BlockOrder::Cyclic;
  return cfg;
}

VolMinIterate initial_iterate(const VolMinInstance& inst, std::uint64_t seed) {
  std::mt19937_64 rng(numerics::derive_seed(seed, 3));
  std::vector<int> cols(inst.l());
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(cols.begin(), cols.end(), rng);
  const double scale = inst.a.cwiseAbs().maxCoeff();
  std::normal_distribution<double> jitter(0.0, 1e-6 * std::max(scale, 1e-12));
  VolMinIterate z;
  z.x.resize(inst.n(), inst.k);
  for (int j = 0; j < inst.k; ++j) {
    z.x.col(j) = inst.a.col(cols[j % inst.l()]);
    for (int i = 0; i < inst.n(); ++i) z.x(i, j) += jitter(rng);
  }
  const RealMatrix coeff = z.x.colPivHouseholderQr().solve(inst.a);
  z.s = numerics::project_simplex_columns(coeff);
  z.y = z.x;
  return z;
}

VolMinResult solve(const VolMinInstance& inst, const PddConfig& config, const SolveOptions& opts,
                   const IterationCallback& cb) {
  if (opts.restarts < 1) throw InvalidInput("volmin: restarts must be >= 1");
  const VolMinInstance* work = &inst;
  VolMinInstance scaled;
  double factor = 1.0;
  if (opts.prescale) {
    const RealVector sv = singular_values(inst.a);
    const double target = 2.0 * std::sqrt(inst.eps) * std::sqrt(double(inst.l()));
    const double sk = sv(inst.k - 1);
    if (sk > 0.0 && sk < target) {
      factor = target / sk;
      scaled = inst;
      scaled.a *= factor;
      work = &scaled;
    }
  }
  VolMinProblem problem(*work);

  struct Run {
    VolMinIterate z;
    PddTrace trace;
    bool converged;
    double gap, f;
  };
  std::vector<Run> runs;
  for (int r = 0; r < opts.restarts; ++r) {
    PddConfig cfg = config;
    cfg.seed = config.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r);
    VolMinIterate z0 = initial_iterate(*work, cfg.seed);
    auto res = pdd_run<VolMinIterate>(problem, std::move(z0), RealVector::Zero(constraint_dim(*work)), cfg, cb);
    const double gap = numerics::inf_norm(constraint_h(res.z, *work));
    const double f = f_eps(res.z.x, work->eps);
    runs.push_back({std::move(res.z), std::move(res.trace), res.converged, gap, f});
  }
  // A restart counts as feasible if its gap is below the absolute threshold or
  // close to the best gap achieved (noisy data never fits exactly).
  double min_gap = runs[0].gap;
  for (const Run& r : runs) min_gap = std::min(min_gap, r.gap);
  const double cutoff = std::max(opts.feasible_gap, opts.gap_slack * min_gap);
  std::size_t best = runs.size();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs[r].gap <= cutoff && (best == runs.size() || runs[r].f < runs[best].f)) best = r;
  }
  Run& b = runs[best];
  VolMinResult out;
  out.x = b.z.x / factor;
  out.s = b.z.s;
  out.f_eps = f_eps(out.x, inst.eps);
  out.feasibility_gap = b.gap / factor;
  out.relative_error = (inst.a - out.x * out.s).norm() / std::max(inst.a.norm(), 1e-300);
  out.restarts_used = opts.restarts;
  out.best_restart = static_cast<int>(best);
  out.iterations = static_cast<int>(b.trace.records.size());
  out.converged = b.converged;
  out.prescale_factor = factor;
  out.trace = std::move(b.trace);
  return out;
}

double mse_linear(const RealMatrix& x_hat, const RealMatrix& x_true) {
  if (x_hat.rows() != x_true.rows() || x_hat.cols() != x_true.cols()) throw InvalidInput("mse: shape mismatch");
  const Eigen::Index k = x_true.cols();
  if (k < 1 || k > 8) throw InvalidInput("mse: K must be in [1, 8]");
  RealMatrix a = x_true, b = x_hat;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double na = a.col(j).norm(), nb = b.col(j).norm();
    if (na == 0.0 || nb == 0.0) throw InvalidInput("mse: zero column");
    a.col(j) /= na;
    b.col(j) /= nb;
  }
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) s += (a.col(j) - b.col(perm[j])).squaredNorm();
    best = std::min(best, s / k);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double mse_metric(const RealMatrix& x_hat, const RealMatrix& x_true) {
  const double m = mse_linear(x_hat, x_true);
  return m <= 1e-12 ? -120.0 : std::max(-120.0, 10.0 * std::log10(m));
}

std::pair<VolMinInstance, GroundTruth> gen_data(int n, int k, int l, double gamma, double snr_db, std::uint64_t seed,
                                                double eps) {
  if (n < 1 || k < 1 || l < 1 || k > n) throw InvalidInput("gen_data: need 1 <= K <= N and L >= 1");
  if (!(gamma > 1.0 / k) || gamma > 1.0) throw InvalidInput("gen_data: gamma must lie in (1/K, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  GroundTruth gt;
  gt.gamma = gamma;
  gt.snr_db = snr_db;
  gt.x.resize(n, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < n; ++i) gt.x(i, j) = unif(rng);
  gt.s.resize(k, l);
  RealVector col(k);
  for (int c = 0; c < l; ++c) {
    int draws = 0;
    for (;;) {
      if (++draws > 1000000) throw InvalidInput("gen_data: gamma too small, rejection sampling exhausted");
      for (int i = 0; i < k; ++i) col(i) = expo(rng);
      col /= col.sum();
      if (col.maxCoeff() <= gamma) break;
    }
    gt.s.col(c) = col;
  }
  RealMatrix a = gt.x * gt.s;
  if (std::isfinite(snr_db)) {
    const double signal = a.squaredNorm() / l;  // average ||X s||^2 per column
    const double var = signal / (n * std::pow(10.0, snr_db / 10.0));
    std::normal_distribution<double> noise(0.0, std::sqrt(var));
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) += noise(rng);
  }
  return {make_instance(std::move(a), k, eps), std::move(gt)};
}

}  // namespace pdd::volmin
