#include "pdd/multicast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pdd::multicast {

using numerics::complex_from_embed;
using numerics::real_embed_vec;

namespace {

constexpr double kDegenerateNorm = 1e-10;
constexpr double kJitter = 1e-8;

double quad(const RealMatrix& m, const RealVector& v) { return v.dot(m * v); }

// Deterministic pseudo-random unit direction used to jitter a degenerate expansion point.
RealVector jitter_direction(Eigen::Index n, int k) {
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(k));
  std::normal_distribution<double> nd;
  RealVector d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = nd(rng);
  return d.normalized();
}

}  // namespace

MulticastInstance build_instance(int n_t, std::vector<std::vector<int>> groups, std::vector<ComplexVector> channels,
                                 RealVector sigma2, double p_bs) {
  if (n_t < 1) throw InvalidInput("multicast: N_t must be positive");
  if (groups.empty()) throw InvalidInput("multicast: at least one group is required");
  if (!(p_bs > 0.0) || !std::isfinite(p_bs)) throw InvalidInput("multicast: P_BS must be positive");
  const int num_users = static_cast<int>(channels.size());
  if (sigma2.size() != num_users) throw InvalidInput("multicast: sigma2 length differs from the number of users");
  MulticastInstance inst;
  inst.n_t = n_t;
  inst.group_of.assign(num_users, -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw InvalidInput("multicast: group " + std::to_string(g) + " is empty");
    for (int k : groups[g]) {
      if (k < 0 || k >= num_users) throw InvalidInput("multicast: user index out of range");
      if (inst.group_of[k] != -1) throw InvalidInput("multicast: user assigned to two groups");
      inst.group_of[k] = static_cast<int>(g);
    }
  }
  for (int k = 0; k < num_users; ++k) {
    if (inst.group_of[k] == -1) throw InvalidInput("multicast: user " + std::to_string(k) + " has no group");
    if (channels[k].size() != n_t) throw InvalidInput("multicast: channel length differs from N_t");
    if (!(sigma2(k) > 0.0)) throw InvalidInput("multicast: noise powers must be positive");
  }
  inst.groups = std::move(groups);
  inst.channels = std::move(channels);
  inst.sigma2 = std::move(sigma2);
  inst.p_bs = p_bs;
  inst.num_users = num_users;

  const int ng = inst.num_groups();
  const int n = inst.dim();
  for (int k = 0; k < num_users; ++k) {
    const ComplexVector& h = inst.channels[k];
    const ComplexMatrix r = h * h.adjoint();
    ComplexMatrix a = ComplexMatrix::Zero(n, n);
    ComplexMatrix b = ComplexMatrix::Zero(n, n);
    for (int g = 0; g < ng; ++g) {
      if (g == inst.group_of[k]) {
        a.block(g * n_t, g * n_t, n_t, n_t) = r;
      } else {
        b.block(g * n_t, g * n_t, n_t, n_t) = r;
      }
    }
    b.diagonal().array() += inst.sigma2(k) / p_bs;
    inst.a_eq.push_back(numerics::real_embed_psd(a));
    inst.b_eq.push_back(numerics::real_embed_psd(b));
    inst.a.push_back(std::move(a));
    inst.b.push_back(std::move(b));
  }
  return inst;
}

MulticastInstance random_instance(int n_t, int n_g, int m_g, double p_bs_db, std::uint64_t seed) {
  if (n_g < 1 || m_g < 1) throw InvalidInput("multicast: n_g and m_g must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  std::vector<std::vector<int>> groups(n_g);
  std::vector<ComplexVector> channels;
  for (int g = 0; g < n_g; ++g) {
    for (int m = 0; m < m_g; ++m) {
      groups[g].push_back(static_cast<int>(channels.size()));
      ComplexVector h(n_t);
      for (int i = 0; i < n_t; ++i) h(i) = Complex(nd(rng), nd(rng));
      channels.push_back(std::move(h));
    }
  }
  const auto k = static_cast<Eigen::Index>(channels.size());
  return build_instance(n_t, std::move(groups), std::move(channels), RealVector::Ones(k),
                        std::pow(10.0, p_bs_db / 10.0));
}

RealVector sinr(const ComplexVector& w_scaled, const MulticastInstance& inst) {
  RealVector out(inst.num_users);
  for (int k = 0; k < inst.num_users; ++k) {
    const ComplexVector& h = inst.channels[k];
    double signal = 0.0;
    double interference = 0.0;
    for (int g = 0; g < inst.num_groups(); ++g) {
      const double p = std::norm(h.dot(w_scaled.segment(g * inst.n_t, inst.n_t)));  // |h^H w_g|^2
      (g == inst.group_of[k] ? signal : interference) += p;
    }
    out(k) = signal / (interference + inst.sigma2(k));
  }
  return out;
}

double a_norm(const ComplexVector& w, const MulticastInstance& inst, int k) {
  return std::sqrt(std::max(0.0, (inst.a[k] * w).dot(w).real()));
}

double b_norm(const ComplexVector& w, const MulticastInstance& inst, int k) {
  return std::sqrt(std::max(0.0, (inst.b[k] * w).dot(w).real()));
}

RealVector constraint_h(const ComplexVector& w, const RealVector& t, const MulticastInstance& inst) {
  RealVector h(inst.num_users + 1);
  for (int k = 0; k < inst.num_users; ++k) h(k) = a_norm(w, inst, k) - t(k) * b_norm(w, inst, k);
  h(inst.num_users) = w.squaredNorm() - 1.0;
  return h;
}

TSolution solve_t_subproblem(const RealVector& a, const RealVector& b) {
  const Eigen::Index n = a.size();
  if (b.size() != n || n == 0) throw InvalidInput("solve_t_subproblem: a and b must be non-empty and equal length");
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(a(k) > 0.0)) throw InvalidInput("solve_t_subproblem: a_k must be positive");
  }
  // phi(s) = s - sum_{b_k < s} a_k (s - b_k)^2 is concave; its maximizer over s >= 0
  // is tau(kbar) for the right split of the sorted b. Evaluate every candidate.
  std::vector<Eigen::Index> idx(n);
  for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index x, Eigen::Index y) { return b(x) > b(y); });
  auto phi = [&](double s) {
    double v = s;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (b(k) < s) v -= a(k) * (s - b(k)) * (s - b(k));
    }
    return v;
  };
  double best_s = 0.0;
  double best_val = phi(0.0);
  double sum_a = 0.0;
  double sum_ab = 0.0;
  // kbar = number of leading (largest-b) entries pinned at t_k = b_k
  for (Eigen::Index kbar = n - 1; kbar >= 0; --kbar) {
    const Eigen::Index k = idx[kbar];
    sum_a += a(k);
    sum_ab += a(k) * b(k);
    const double s = std::max((1.0 + 2.0 * sum_ab) / (2.0 * sum_a), 0.0);
    const double val = phi(s);
    if (val > best_val) {
      best_val = val;
      best_s = s;
    }
  }
  TSolution out;
  out.s = best_s;
  out.t = b.cwiseMax(best_s);
  return out;
}

double theta(const ComplexVector& w, const RealVector& t, const RealVector& lambda, double rho,
             const MulticastInstance& inst) {
  double v = 0.0;
  for (int k = 0; k < inst.num_users; ++k) {
    const double r = a_norm(w, inst, k) - t(k) * b_norm(w, inst, k) + rho * lambda(k);
    v += r * r;
  }
  return v;
}

Surrogate build_surrogate_C(const ComplexVector& w_tilde, const RealVector& t, const RealVector& lambda, double rho,
                            const MulticastInstance& inst) {
  const RealVector wt = real_embed_vec(w_tilde);
  const Eigen::Index n = wt.size();
  Surrogate sur{RealMatrix::Zero(n, n), 0.0};
  RealMatrix& c = sur.c;
  for (int k = 0; k < inst.num_users; ++k) {
    const RealMatrix& a = inst.a_eq[k];
    const RealMatrix& b = inst.b_eq[k];
    const RealVector aw = a * wt;
    const RealVector bw = b * wt;
    const double alpha = std::sqrt(std::max(0.0, wt.dot(aw)));
    const double beta = std::sqrt(std::max(0.0, wt.dot(bw)));
    const double tk = t(k);
    const double lk = lambda(k);

    c += a + tk * tk * b;
    sur.constant += rho * rho * lk * lk;

    // -2 t ||A^{1/2} w|| ||B^{1/2} w|| is bounded above by a Cauchy-Schwarz cross term;
    // when ||A^{1/2} w~|| vanishes the term is dropped (it is <= 0 and ~0 at w~).
    if (alpha >= kDegenerateNorm) c -= (tk / (alpha * beta)) * (aw * bw.transpose() + bw * aw.transpose());

    if (lk >= 0.0) {
      // -2 rho lambda t ||w|| ||B^{1/2} w||
      c -= (rho * lk * tk / beta) * (wt * bw.transpose() + bw * wt.transpose());
      // 2 rho lambda ||A^{1/2} w|| <= rho lambda (||A^{1/2} w||^2 / delta + delta)
      double delta = alpha;
      if (delta < kDegenerateNorm && lk > 0.0) {
        const RealVector wj = (wt + kJitter * jitter_direction(n, k)).normalized();
        delta = std::sqrt(std::max(0.0, quad(a, wj)));
      }
      if (delta > 0.0 && lk > 0.0) {
        c += (rho * lk / delta) * a;
        sur.constant += rho * lk * delta;
      }
    } else {
      const double mu = -lk;
      // 2 rho mu t ||B^{1/2} w|| <= rho mu t (||B^{1/2} w||^2 / beta + beta)
      c += (rho * mu * tk / beta) * b;
      sur.constant += rho * mu * tk * beta;
      // -2 rho mu ||w|| ||A^{1/2} w||
      if (alpha >= kDegenerateNorm) c -= (rho * mu / alpha) * (wt * aw.transpose() + aw * wt.transpose());
    }
  }
  c = 0.5 * (c + c.transpose());
  return sur;
}

double augmented_lagrangian(const MulticastIterate& z, const RealVector& lambda, double rho,
                            const MulticastInstance& inst) {
  const RealVector h = constraint_h(z.w, z.t, inst).head(inst.num_users);
  return -z.t.minCoeff() + lambda.dot(h) + h.squaredNorm() / (2.0 * rho);
}

RealVector penalty_gradient(const MulticastIterate& z, const RealVector& lambda, double rho,
                            const MulticastInstance& inst) {
  const RealVector w = real_embed_vec(z.w);
  const Eigen::Index n = w.size();
  RealVector g = RealVector::Zero(n + inst.num_users);
  for (int k = 0; k < inst.num_users; ++k) {
    const RealVector aw = inst.a_eq[k] * w;
    const RealVector bw = inst.b_eq[k] * w;
    const double alpha = std::sqrt(std::max(0.0, w.dot(aw)));
    const double beta = std::sqrt(std::max(0.0, w.dot(bw)));
    const double hk = alpha - z.t(k) * beta;
    const double coef = lambda(k) + hk / rho;
    RealVector dh = -z.t(k) * bw / beta;
    if (alpha > 0.0) dh += aw / alpha;
    g.head(n) += coef * dh;
    g(n + k) = -coef * beta;
  }
  return g;
}

void update_t(MulticastIterate& z, const RealVector& lambda, double rho, const MulticastInstance& inst) {
  RealVector a(inst.num_users);
  RealVector b(inst.num_users);
  for (int k = 0; k < inst.num_users; ++k) {
    const double bn = b_norm(z.w, inst, k);
    a(k) = bn * bn / (2.0 * rho);
    b(k) = (a_norm(z.w, inst, k) + rho * lambda(k)) / bn;
  }
  z.t = solve_t_subproblem(a, b).t;
}

void update_w(MulticastIterate& z, const RealVector& lambda, double rho, const MulticastInstance& inst) {
  const Surrogate sur = build_surrogate_C(z.w, z.t, lambda, rho, inst);
  const numerics::EigPair eig = numerics::min_eigvec_sym(sur.c);
  z.w = complex_from_embed(eig.vector);
  z.w.normalize();
}

MulticastIterate bsum_inner_step(const MulticastIterate& z, const RealVector& lambda, double rho,
                                 const MulticastInstance& inst) {
  MulticastIterate out = z;
  update_t(out, lambda, rho, inst);
  update_w(out, lambda, rho, inst);
  return out;
}

RealVector MulticastProblem::constraint(const MulticastIterate& z) const {
  return constraint_h(z.w, z.t, inst_).head(inst_.num_users);
}

double MulticastProblem::objective(const MulticastIterate& z) const { return -z.t.minCoeff(); }

double MulticastProblem::report_objective(const MulticastIterate& z) const {
  return min_rate(std::sqrt(inst_.p_bs) * z.w, inst_);
}

void MulticastProblem::update_block(std::size_t block, MulticastIterate& z, const RealVector& lambda,
                                    double rho) const {
  if (block == 0) {
    update_t(z, lambda, rho, inst_);
  } else {
    update_w(z, lambda, rho, inst_);
  }
}

PddConfig default_config(const MulticastInstance& inst) {
  PddConfig cfg;
  cfg.rho0 = 0.5 * inst.num_users;
  cfg.eps0 = 1e-12;
  cfg.eps_outer = 1e-4;
  cfg.c = 0.6;
  cfg.eps_shrink = 0.6;
  cfg.max_inner = 100;
  cfg.max_outer = 50;
  cfg.block_order = BlockOrder::Cyclic;
  return cfg;
}

MulticastIterate initial_iterate(const MulticastInstance& inst, std::uint64_t seed) {
  std::mt19937_64 rng(numerics::derive_seed(seed, 1));
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  MulticastIterate z;
  z.w.resize(inst.dim());
  for (Eigen::Index i = 0; i < z.w.size(); ++i) z.w(i) = Complex(nd(rng), nd(rng));
  z.w.normalize();
  z.t.resize(inst.num_users);
  for (int k = 0; k < inst.num_users; ++k) z.t(k) = a_norm(z.w, inst, k) / b_norm(z.w, inst, k);
  return z;
}

MulticastResult solve(const MulticastInstance& inst, const PddConfig& config, const IterationCallback& cb) {
  MulticastProblem problem(inst);
  MulticastIterate z0 = initial_iterate(inst, config.seed);
  auto run = pdd_run(problem, std::move(z0), RealVector::Zero(inst.num_users), config, cb);
  MulticastResult res;
  res.w_unit = run.z.w;
  res.w_scaled = std::sqrt(inst.p_bs) * run.z.w;
  for (int g = 0; g < inst.num_groups(); ++g) res.beamformers.push_back(res.w_scaled.segment(g * inst.n_t, inst.n_t));
  res.t = run.z.t;
  res.lambda = run.lambda;
  res.trace = std::move(run.trace);
  res.converged = run.converged;
  res.min_rate_bits = min_rate(res.w_scaled, inst);
  res.kkt_residual = kkt_residual(res.w_unit, inst);
  res.feasibility_gap = numerics::inf_norm(problem.constraint(run.z));
  res.iterations = static_cast<int>(res.trace.records.size());
  return res;
}

double min_rate(const ComplexVector& w_scaled, const MulticastInstance& inst) {
  return (1.0 + sinr(w_scaled, inst).array()).log2().minCoeff();
}

RealVector ratio_gradient(const ComplexVector& w, const MulticastInstance& inst, int k) {
  const RealVector we = real_embed_vec(w);
  const RealVector aw = inst.a_eq[k] * we;
  const RealVector bw = inst.b_eq[k] * we;
  const double den = we.dot(bw);
  const double ratio = we.dot(aw) / den;
  return 2.0 * (aw - ratio * bw) / den;
}

namespace {

RealMatrix gradient_matrix(const ComplexVector& w_unit, const MulticastInstance& inst) {
  const RealVector we = real_embed_vec(w_unit);
  RealMatrix f(we.size(), inst.num_users);
  for (int k = 0; k < inst.num_users; ++k) {
    const RealVector fk = ratio_gradient(w_unit, inst, k);
    f.col(k) = fk - we * we.dot(fk);  // lambda_0 eliminated: project out w
  }
  return f;
}

}  // namespace

double kkt_objective(const ComplexVector& w_unit, const MulticastInstance& inst, const RealVector& weights) {
  return (gradient_matrix(w_unit, inst) * weights).norm();
}

double kkt_residual(const ComplexVector& w_unit, const MulticastInstance& inst) {
  const RealMatrix f = gradient_matrix(w_unit, inst);
  const RealMatrix q = f.transpose() * f;
  const int k = inst.num_users;
  const double lip = 2.0 * std::max(q.norm(), 1e-300);
  // accelerated projected gradient on 0.5 * ||F lambda||^2 over the simplex
  RealVector x = RealVector::Constant(k, 1.0 / k);
  RealVector y = x;
  double theta_k = 1.0;
  for (int it = 0; it < 200000; ++it) {
    const RealVector grad = q * y;
    const RealVector next = numerics::project_simplex(y - grad / lip);
    const double step = (next - y).norm() * lip;
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta_k * theta_k));
    RealVector momentum = next + ((theta_k - 1.0) / theta_next) * (next - x);
    // restart when the objective goes up
    if (next.dot(q * next) > x.dot(q * x)) {
      momentum = next;
      theta_k = 1.0;
    } else {
      theta_k = theta_next;
    }
    x = next;
    y = momentum;
    if (step <= 1e-8) break;
  }
  return std::sqrt(std::max(0.0, x.dot(q * x)));
}

}  // namespace pdd::multicast
