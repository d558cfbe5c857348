#include "pdd/relay.hpp"

#include <cmath>
#include <random>

#include <Eigen/QR>

#include "pdd/error.hpp"

namespace pdd::relay {

namespace {

using numerics::project_ball;

// Appends Re(M) then Im(M), both column-major.
void append(RealVector& out, Eigen::Index& pos, const ComplexMatrix& m) {
  const Eigen::Index n = m.size();
  out.segment(pos, n) = m.real().reshaped();
  out.segment(pos + n, n) = m.imag().reshaped();
  pos += 2 * n;
}

ComplexMatrix take(const RealVector& in, Eigen::Index& pos, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::Index n = rows * cols;
  ComplexMatrix m(rows, cols);
  m.real() = in.segment(pos, n).reshaped(rows, cols);
  m.imag() = in.segment(pos + n, n).reshaped(rows, cols);
  pos += 2 * n;
  return m;
}

ComplexMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  ComplexMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Complex(n(rng), n(rng));
  return m;
}

// Total received power T_k and interference-plus-noise I_k at user k.
void powers(const ComplexMatrix& x, const ComplexMatrix& f, const RelayInstance& inst, RealVector& total,
            RealVector& interf, ComplexMatrix& gx) {
  gx = inst.g.adjoint() * x;  // (k, j) = g_k^H x_j
  const ComplexMatrix gf = inst.g.adjoint() * f;
  total.resize(inst.k);
  interf.resize(inst.k);
  for (int k = 0; k < inst.k; ++k) {
    const double noise = inst.sigma_r2 * gf.row(k).squaredNorm() + inst.sigma2(k);
    total(k) = gx.row(k).squaredNorm() + noise;
    interf(k) = total(k) - std::norm(gx(k, k));
  }
}

// Smallest mu >= 0 with ||x / (1 + mu)||^2 + s2 ||f / (1 + mu s2)||^2 <= p.
double ellipsoid_multiplier(double nx2, double nf2, double s2, double p) {
  auto g = [&](double mu) { return nx2 / ((1 + mu) * (1 + mu)) + s2 * nf2 / ((1 + mu * s2) * (1 + mu * s2)); };
  if (g(0.0) <= p) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (g(hi) > p) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > p ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

RelayInstance build_instance(ComplexMatrix h, ComplexMatrix g, double sigma_r2, RealVector sigma2, double p_s,
                             double p_r, RealVector alpha) {
  RelayInstance inst;
  inst.n_r = static_cast<int>(h.rows());
  inst.n_s = static_cast<int>(h.cols());
  inst.k = static_cast<int>(g.cols());
  if (inst.n_r < 1 || inst.n_s < 1 || inst.k < 1) throw InvalidInput("relay: empty dimensions");
  if (g.rows() != h.rows()) throw InvalidInput("relay: g must have N_r rows");
  if (sigma2.size() != inst.k || alpha.size() != inst.k) throw InvalidInput("relay: per-user vectors need K entries");
  if (!(sigma_r2 > 0.0)) throw InvalidInput("relay: relay noise power must be positive");
  if (!(p_s > 0.0) || !(p_r > 0.0)) throw InvalidInput("relay: power budgets must be positive");
  if (!(sigma2.array() > 0.0).all()) throw InvalidInput("relay: user noise powers must be positive");
  if (!(alpha.array() > 0.0).all()) throw InvalidInput("relay: weights must be positive");
  if (!h.allFinite() || !g.allFinite()) throw InvalidInput("relay: non-finite channel");
  inst.h = std::move(h);
  inst.g = std::move(g);
  inst.sigma_r2 = sigma_r2;
  inst.sigma2 = std::move(sigma2);
  inst.p_s = p_s;
  inst.p_r = p_r;
  inst.alpha = std::move(alpha);
  return inst;
}

RelayInstance random_instance(int n_s, int n_r, int k, double snr_db, std::uint64_t seed) {
  if (n_s < 1 || n_r < 1 || k < 1) throw InvalidInput("relay: dimensions must be positive");
  std::mt19937_64 rng(seed);
  ComplexMatrix h = complex_gaussian(n_r, n_s, rng);
  ComplexMatrix g = complex_gaussian(n_r, k, rng);
  const double p = std::pow(10.0, snr_db / 10.0);
  return build_instance(std::move(h), std::move(g), 1.0, RealVector::Ones(k), p, p, RealVector::Ones(k));
}

std::size_t constraint_dim(const RelayInstance& inst) {
  const auto kr = static_cast<std::size_t>(inst.n_r) * inst.k;
  return 2 * (2 * kr + static_cast<std::size_t>(inst.n_r) * inst.n_r + static_cast<std::size_t>(inst.n_s) * inst.k);
}

RelayDuals unpack_duals(const RealVector& lambda, const RelayInstance& inst) {
  if (static_cast<std::size_t>(lambda.size()) != constraint_dim(inst)) throw InvalidInput("relay: dual size mismatch");
  Eigen::Index pos = 0;
  RelayDuals d;
  d.z = take(lambda, pos, inst.n_r, inst.k);
  d.zf = take(lambda, pos, inst.n_r, inst.n_r);
  d.zx = take(lambda, pos, inst.n_r, inst.k);
  d.zv = take(lambda, pos, inst.n_s, inst.k);
  return d;
}

RealVector pack_duals(const RelayDuals& d) {
  RealVector out(2 * (d.z.size() + d.zf.size() + d.zx.size() + d.zv.size()));
  Eigen::Index pos = 0;
  append(out, pos, d.z);
  append(out, pos, d.zf);
  append(out, pos, d.zx);
  append(out, pos, d.zv);
  return out;
}

RealVector constraint_h(const RelayIterate& z, const RelayInstance& inst) {
  RelayDuals r;
  r.z = z.x - z.f * inst.h * z.v;
  r.zf = inst.sigma_r() * (z.f - z.fb);
  r.zx = z.x - z.xb;
  r.zv = z.v - z.vb;
  return pack_duals(r);
}

std::pair<ComplexVector, RealVector> wmmse_weights(const ComplexMatrix& x, const ComplexMatrix& f,
                                                   const RelayInstance& inst) {
  RealVector total, interf;
  ComplexMatrix gx;
  powers(x, f, inst, total, interf, gx);
  ComplexVector u(inst.k);
  RealVector w(inst.k);
  for (int k = 0; k < inst.k; ++k) {
    u(k) = gx(k, k) / total(k);
    w(k) = 1.0 + std::norm(gx(k, k)) / interf(k);
  }
  return {u, w};
}

double mse(const Complex& u, const ComplexMatrix& x, const ComplexMatrix& f, const RelayInstance& inst, int k) {
  const ComplexVector gk = inst.g.col(k);
  const Eigen::RowVectorXcd gx = gk.adjoint() * x;
  double e = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Complex y = std::conj(u) * gx(j);
    e += j == k ? std::norm(1.0 - y) : std::norm(y);
  }
  e += inst.sigma_r2 * std::norm(u) * (gk.adjoint() * f).squaredNorm();
  e += inst.sigma2(k) * std::norm(u);
  return e;
}

std::pair<ComplexMatrix, ComplexMatrix> weighted_matrices(const ComplexVector& u, const RealVector& w,
                                                          const RelayInstance& inst) {
  ComplexMatrix gw = ComplexMatrix::Zero(inst.n_r, inst.n_r);
  ComplexMatrix dw = ComplexMatrix::Zero(inst.k, inst.k);
  for (int k = 0; k < inst.k; ++k) {
    const double s = w(k) * inst.alpha(k);
    gw += s * std::norm(u(k)) * inst.g.col(k) * inst.g.col(k).adjoint();
    dw(k, k) = s * u(k);
  }
  return {gw, dw};
}

RealVector sinr_x(const ComplexMatrix& x, const ComplexMatrix& f, const RelayInstance& inst) {
  RealVector total, interf;
  ComplexMatrix gx;
  powers(x, f, inst, total, interf, gx);
  RealVector out(inst.k);
  for (int k = 0; k < inst.k; ++k) out(k) = std::norm(gx(k, k)) / interf(k);
  return out;
}

RealVector sinr(const ComplexMatrix& v, const ComplexMatrix& f, const RelayInstance& inst) {
  return sinr_x(f * inst.h * v, f, inst);
}

double sum_rate_x(const ComplexMatrix& x, const ComplexMatrix& f, const RelayInstance& inst) {
  const RealVector g = sinr_x(x, f, inst);
  double r = 0.0;
  for (int k = 0; k < inst.k; ++k) r += inst.alpha(k) * std::log1p(g(k));
  return r;
}

double sum_rate(const ComplexMatrix& v, const ComplexMatrix& f, const RelayInstance& inst) {
  return sum_rate_x(f * inst.h * v, f, inst);
}

double surrogate_objective(const RelayIterate& z, const RelayDuals& d, double rho, const RelayInstance& inst) {
  double f = 0.0;
  for (int k = 0; k < inst.k; ++k) {
    f += inst.alpha(k) * (z.w(k) * mse(z.u(k), z.x, z.f, inst, k) - std::log(z.w(k)) - 1.0);
  }
  const RealVector h = constraint_h(z, inst);
  return f + pack_duals(d).dot(h) + h.squaredNorm() / (2.0 * rho);
}

double augmented_lagrangian(const RelayIterate& z, const RealVector& lambda, double rho, const RelayInstance& inst) {
  const RealVector h = constraint_h(z, inst);
  return -sum_rate_x(z.x, z.f, inst) + lambda.dot(h) + h.squaredNorm() / (2.0 * rho);
}

ComplexMatrix update_F(const RelayIterate& z, const RelayDuals& d, double rho, const RelayInstance& inst) {
  const auto [gw, dw] = weighted_matrices(z.u, z.w, inst);
  (void)dw;
  const double sr = inst.sigma_r();
  const ComplexMatrix hv = inst.h * z.v;
  const ComplexMatrix a =
      inst.sigma_r2 * (2.0 * rho * gw + ComplexMatrix::Identity(inst.n_r, inst.n_r));
  const ComplexMatrix b = hv * hv.adjoint();
  const ComplexMatrix c = sr * (sr * z.fb - rho * d.zf) + (z.x + rho * d.z) * hv.adjoint();
  return numerics::solve_sylvester(a, b, c);
}

Bars update_bars(const RelayIterate& z, const RelayDuals& d, double rho, const RelayInstance& inst) {
  Bars out;
  out.vb = project_ball(z.v + rho * d.zv, std::sqrt(inst.p_s));
  const double sr = inst.sigma_r();
  ComplexMatrix joint(inst.n_r, inst.k + inst.n_r);
  joint << z.x + rho * d.zx, sr * z.f + rho * d.zf;
  const ComplexMatrix p = project_ball(joint, std::sqrt(inst.p_r));
  out.xb = p.leftCols(inst.k);
  out.fb = p.rightCols(inst.n_r) / sr;
  return out;
}

ComplexMatrix update_X(const RelayIterate& z, const RelayDuals& d, double rho, const RelayInstance& inst) {
  const auto [gw, dw] = weighted_matrices(z.u, z.w, inst);
  const ComplexMatrix lhs = rho * gw + ComplexMatrix::Identity(inst.n_r, inst.n_r);
  const ComplexMatrix rhs =
      2.0 * rho * inst.g * dw + (z.f * inst.h * z.v - rho * d.z) + (z.xb - rho * d.zx);
  return 0.5 * lhs.llt().solve(rhs);
}

ComplexMatrix update_V(const RelayIterate& z, const RelayDuals& d, double rho, const RelayInstance& inst) {
  const ComplexMatrix fh = z.f * inst.h;
  const ComplexMatrix lhs = ComplexMatrix::Identity(inst.n_s, inst.n_s) + fh.adjoint() * fh;
  const ComplexMatrix rhs = z.vb - rho * d.zv + fh.adjoint() * (z.x + rho * d.z);
  return lhs.llt().solve(rhs);
}

RelayIterate bsum_inner_step(const RelayIterate& z, const RealVector& lambda, double rho, const RelayInstance& inst) {
  RelayProblem problem(inst);
  RelayIterate out = z;
  problem.begin_sweep(out);
  for (std::size_t i = 0; i < problem.num_blocks(); ++i) problem.update_block(i, out, lambda, rho);
  return out;
}

void RelayProblem::begin_sweep(RelayIterate& z) const {
  auto [u, w] = wmmse_weights(z.x, z.f, inst_);
  z.u = std::move(u);
  z.w = std::move(w);
}

void RelayProblem::update_block(std::size_t block, RelayIterate& z, const RealVector& lambda, double rho) const {
  const RelayDuals d = unpack_duals(lambda, inst_);
  switch (block) {
    case 0:
      z.f = update_F(z, d, rho, inst_);
      break;
    case 1: {
      Bars b = update_bars(z, d, rho, inst_);
      z.vb = std::move(b.vb);
      z.xb = std::move(b.xb);
      z.fb = std::move(b.fb);
      break;
    }
    case 2:
      z.x = update_X(z, d, rho, inst_);
      break;
    case 3:
      z.v = update_V(z, d, rho, inst_);
      break;
    default:
      throw InvalidInput("relay: block index out of range");
  }
}

std::size_t RelayProblem::constrained_dim() const {
  return 2 * static_cast<std::size_t>(inst_.n_s * inst_.k + inst_.n_r * inst_.k + inst_.n_r * inst_.n_r);
}

RealVector flatten(const RelayIterate& z) {
  RealVector out(2 * (z.vb.size() + z.xb.size() + z.fb.size() + z.v.size() + z.f.size() + z.x.size()));
  Eigen::Index pos = 0;
  for (const ComplexMatrix* m : {&z.vb, &z.xb, &z.fb, &z.v, &z.f, &z.x}) append(out, pos, *m);
  return out;
}

RelayIterate unflatten(const RealVector& flat, const RelayIterate& shape) {
  RelayIterate z = shape;
  Eigen::Index pos = 0;
  for (ComplexMatrix* m : {&z.vb, &z.xb, &z.fb, &z.v, &z.f, &z.x}) *m = take(flat, pos, m->rows(), m->cols());
  if (pos != flat.size()) throw InvalidInput("relay: flat vector size mismatch");
  return z;
}

RealVector al_gradient(const RelayIterate& z, const RealVector& lambda, double rho, const RelayInstance& inst) {
  const RelayDuals d = unpack_duals(lambda, inst);
  const double sr = inst.sigma_r();
  const ComplexMatrix hv = inst.h * z.v;
  const ComplexMatrix fh = z.f * inst.h;
  // Q_i = Lambda_i + R_i / rho; the real gradient of the penalty part is the
  // real embedding of these chained through each residual.
  const ComplexMatrix q1 = d.z + (z.x - z.f * hv) / rho;
  const ComplexMatrix q2 = d.zf + sr * (z.f - z.fb) / rho;
  const ComplexMatrix q3 = d.zx + (z.x - z.xb) / rho;
  const ComplexMatrix q4 = d.zv + (z.v - z.vb) / rho;

  ComplexMatrix gx = q1 + q3;
  ComplexMatrix gf = -q1 * hv.adjoint() + sr * q2;
  const ComplexMatrix gv = -fh.adjoint() * q1 + q4;

  // -sum_k alpha_k (log T_k - log I_k); real gradient is twice the conjugate derivative.
  RealVector total, interf;
  ComplexMatrix gxm;
  powers(z.x, z.f, inst, total, interf, gxm);
  for (int k = 0; k < inst.k; ++k) {
    const ComplexVector gk = inst.g.col(k);
    const ComplexMatrix ggh = gk * gk.adjoint();
    ComplexMatrix xe = z.x;
    xe.col(k).setZero();
    gx -= 2.0 * inst.alpha(k) * (ggh * z.x / total(k) - ggh * xe / interf(k));
    gf -= 2.0 * inst.alpha(k) * inst.sigma_r2 * (1.0 / total(k) - 1.0 / interf(k)) * ggh * z.f;
  }

  RelayIterate g = z;
  g.vb = -q4;
  g.xb = -q3;
  g.fb = -sr * q2;
  g.v = gv;
  g.f = gf;
  g.x = gx;
  return flatten(g);
}

RealVector project_bars(const RealVector& bars, const RelayInstance& inst) {
  Eigen::Index pos = 0;
  const ComplexMatrix vb = take(bars, pos, inst.n_s, inst.k);
  const ComplexMatrix xb = take(bars, pos, inst.n_r, inst.k);
  const ComplexMatrix fb = take(bars, pos, inst.n_r, inst.n_r);
  if (pos != bars.size()) throw InvalidInput("relay: constrained vector size mismatch");
  const double mu = ellipsoid_multiplier(xb.squaredNorm(), fb.squaredNorm(), inst.sigma_r2, inst.p_r);
  RealVector out(bars.size());
  pos = 0;
  append(out, pos, project_ball(vb, std::sqrt(inst.p_s)));
  append(out, pos, ComplexMatrix(xb / (1.0 + mu)));
  append(out, pos, ComplexMatrix(fb / (1.0 + mu * inst.sigma_r2)));
  return out;
}

PddConfig default_config(const RelayInstance& inst) {
  PddConfig cfg;
  const double k = inst.k;
  cfg.rho0 = 500.0 * k / (2.0 * k * inst.n_r + double(inst.n_s) * inst.n_s + k * inst.n_s);
  cfg.c = 0.6;
  cfg.eps0 = 1e-3;
  cfg.eps_outer = 1e-4;
  cfg.max_outer = 30;
  cfg.max_inner = 100;
  cfg.block_order = BlockOrder::Cyclic;
  return cfg;
}

RelayIterate initial_iterate(const RelayInstance& inst, std::uint64_t seed) {
  std::mt19937_64 rng(numerics::derive_seed(seed, 2));
  RelayIterate z;
  const ComplexMatrix a = complex_gaussian(inst.n_s, inst.k, rng);
  if (inst.k <= inst.n_s) {
    Eigen::HouseholderQR<ComplexMatrix> qr(a);
    const ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(inst.n_s, inst.k);
    z.v = std::sqrt(inst.p_s / inst.k) * q;
  } else {
    z.v = a * std::sqrt(inst.p_s) / a.norm();
  }
  const double hv2 = (inst.h * z.v).squaredNorm();
  const double beta = std::sqrt(inst.p_r / (hv2 + inst.sigma_r2 * inst.n_r));
  z.f = beta * ComplexMatrix::Identity(inst.n_r, inst.n_r);
  z.x = z.f * inst.h * z.v;
  z.vb = z.v;
  z.fb = z.f;
  z.xb = z.x;
  std::tie(z.u, z.w) = wmmse_weights(z.x, z.f, inst);
  return z;
}

std::pair<double, double> repair(ComplexMatrix& v, ComplexMatrix& f, const RelayInstance& inst) {
  double sv = 1.0, sf = 1.0;
  const double pv = v.squaredNorm();
  if (pv > inst.p_s) {
    sv = std::sqrt(inst.p_s / pv);
    v *= sv;
  }
  const double pf = (f * inst.h * v).squaredNorm() + inst.sigma_r2 * f.squaredNorm();
  if (pf > inst.p_r) {
    sf = std::sqrt(inst.p_r / pf);
    f *= sf;
  }
  return {sv, sf};
}

RelayResult solve(const RelayInstance& inst, const PddConfig& config, const IterationCallback& cb) {
  RelayProblem problem(inst);
  RelayIterate z0 = initial_iterate(inst, config.seed);
  auto run = pdd_run<RelayIterate>(problem, std::move(z0), RealVector::Zero(constraint_dim(inst)), config, cb);
  RelayResult res;
  res.feasibility_gap = numerics::inf_norm(constraint_h(run.z, inst));
  res.v = run.z.v;
  res.f = run.z.f;
  std::tie(res.repair_scale_v, res.repair_scale_f) = repair(res.v, res.f, inst);
  res.sum_rate_nats = sum_rate(res.v, res.f, inst);
  res.iterations = static_cast<int>(run.trace.records.size());
  res.converged = run.converged;
  res.trace = std::move(run.trace);
  res.final_iterate = std::move(run.z);
  return res;
}

}  // namespace pdd::relay
