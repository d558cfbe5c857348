#pragma once

// Joint source-relay precoding for a multi-antenna relay broadcast channel.
//
// Source precoder V (N_s x K), relay precoder F (N_r x N_r). The coupled
// relay power constraint is split with auxiliary copies:
//   X = F H V,  sigma_R F = sigma_R Fb,  X = Xb,  V = Vb
// with the power budgets imposed on the barred copies only. The inner loop is
// a WMMSE-majorized BSUM over the blocks F, (Vb, Xb, Fb), X, V.

#include <cstdint>
#include <utility>
#include <vector>

#include "pdd/core.hpp"
#include "pdd/numerics.hpp"

namespace pdd::relay {

struct RelayInstance {
  int n_s = 0;
  int n_r = 0;
  int k = 0;
  ComplexMatrix h;      // N_r x N_s source-relay channel
  ComplexMatrix g;      // N_r x K, column k = conjugated relay-user channel g_k
  double sigma_r2 = 1.0;
  RealVector sigma2;    // per user
  double p_s = 1.0;
  double p_r = 1.0;
  RealVector alpha;     // per-user weights

  double sigma_r() const { return std::sqrt(sigma_r2); }
};

/// Validates shapes and positivity (sigma_R^2 = 0 is rejected).
RelayInstance build_instance(ComplexMatrix h, ComplexMatrix g, double sigma_r2, RealVector sigma2, double p_s,
                             double p_r, RealVector alpha);

/// Unit-variance complex Gaussian channels, unit noise, unit weights,
/// P_S = P_R = 10^(snr_db / 10).
RelayInstance random_instance(int n_s, int n_r, int k, double snr_db, std::uint64_t seed);

struct RelayIterate {
  ComplexMatrix v, f, x;     // V, F, X
  ComplexMatrix vb, fb, xb;  // barred copies
  ComplexVector u;           // WMMSE receive scalars
  RealVector w;              // WMMSE weights (>= 1)
};

struct RelayDuals {
  ComplexMatrix z, zf, zx, zv;
};

std::size_t constraint_dim(const RelayInstance& inst);
RelayDuals unpack_duals(const RealVector& lambda, const RelayInstance& inst);
RealVector pack_duals(const RelayDuals& d);

/// Real embedding of (X - F H V, sigma_R (F - Fb), X - Xb, V - Vb).
RealVector constraint_h(const RelayIterate& z, const RelayInstance& inst);

/// Optimal (u, w) for the given (X, F).
std::pair<ComplexVector, RealVector> wmmse_weights(const ComplexMatrix& x, const ComplexMatrix& f,
                                                   const RelayInstance& inst);

/// e_k(u_k, X, F).
double mse(const Complex& u, const ComplexMatrix& x, const ComplexMatrix& f, const RelayInstance& inst, int k);

/// G_w = sum_k w_k alpha_k |u_k|^2 g_k g_k^H and D_w = diag(w_k alpha_k u_k).
std::pair<ComplexMatrix, ComplexMatrix> weighted_matrices(const ComplexVector& u, const RealVector& w,
                                                          const RelayInstance& inst);

/// Per-user SINR with the received signal expressed through X.
RealVector sinr_x(const ComplexMatrix& x, const ComplexMatrix& f, const RelayInstance& inst);
/// Per-user SINR gamma_k(V, F).
RealVector sinr(const ComplexMatrix& v, const ComplexMatrix& f, const RelayInstance& inst);
/// sum_k alpha_k log(1 + gamma_k(V, F)), natural log.
double sum_rate(const ComplexMatrix& v, const ComplexMatrix& f, const RelayInstance& inst);
double sum_rate_x(const ComplexMatrix& x, const ComplexMatrix& f, const RelayInstance& inst);

/// Objective of the majorized block problem (WMMSE surrogate plus penalty),
/// using z.u and z.w.
double surrogate_objective(const RelayIterate& z, const RelayDuals& d, double rho, const RelayInstance& inst);

/// -sum_rate_x + lambda^T h + ||h||^2 / (2 rho).
double augmented_lagrangian(const RelayIterate& z, const RealVector& lambda, double rho, const RelayInstance& inst);

ComplexMatrix update_F(const RelayIterate& z, const RelayDuals& d, double rho, const RelayInstance& inst);
struct Bars {
  ComplexMatrix vb, xb, fb;
};
Bars update_bars(const RelayIterate& z, const RelayDuals& d, double rho, const RelayInstance& inst);
ComplexMatrix update_X(const RelayIterate& z, const RelayDuals& d, double rho, const RelayInstance& inst);
ComplexMatrix update_V(const RelayIterate& z, const RelayDuals& d, double rho, const RelayInstance& inst);

/// (u, w) refresh followed by the F, bars, X, V updates.
RelayIterate bsum_inner_step(const RelayIterate& z, const RealVector& lambda, double rho, const RelayInstance& inst);

/// Flat variable order: [Vb, Xb, Fb | V, F, X], each as (Re, Im) column-major.
RealVector flatten(const RelayIterate& z);
RelayIterate unflatten(const RealVector& flat, const RelayIterate& shape);
RealVector al_gradient(const RelayIterate& z, const RealVector& lambda, double rho, const RelayInstance& inst);

/// Euclidean projection of the barred coordinates of a flat vector onto the
/// power sets (ball for Vb, ellipsoid ||Xb||^2 + sigma_R^2 ||Fb||^2 <= P_R).
RealVector project_bars(const RealVector& bars, const RelayInstance& inst);

class RelayProblem final : public BlockProblem<RelayIterate> {
 public:
  explicit RelayProblem(const RelayInstance& inst) : inst_(inst) {}

  std::size_t num_blocks() const override { return 4; }
  std::size_t constraint_dim() const override { return relay::constraint_dim(inst_); }
  RealVector constraint(const RelayIterate& z) const override { return constraint_h(z, inst_); }
  double objective(const RelayIterate& z) const override { return -sum_rate_x(z.x, z.f, inst_); }
  double report_objective(const RelayIterate& z) const override { return sum_rate_x(z.x, z.f, inst_); }
  void begin_sweep(RelayIterate& z) const override;
  void update_block(std::size_t block, RelayIterate& z, const RealVector& lambda, double rho) const override;

  bool has_gradient() const override { return true; }
  RealVector flatten(const RelayIterate& z) const override { return relay::flatten(z); }
  RealVector al_gradient(const RelayIterate& z, const RealVector& lambda, double rho) const override {
    return relay::al_gradient(z, lambda, rho, inst_);
  }
  std::size_t constrained_dim() const override;
  RealVector project_constrained(const RealVector& x) const override { return project_bars(x, inst_); }

 private:
  const RelayInstance& inst_;
};

/// rho0 = 500 K / (2 K N_r + N_s^2 + K N_s), c = 0.6, eps_O = 1e-4, 30 outer
/// iterations, cyclic block order.
PddConfig default_config(const RelayInstance& inst);

/// Feasible start: V0 orthonormal columns at full source power, F0 = beta I at
/// full relay power, X = F H V, bars equal to the originals.
RelayIterate initial_iterate(const RelayInstance& inst, std::uint64_t seed);

struct RelayResult {
  ComplexMatrix v;  // repaired, feasible
  ComplexMatrix f;
  double sum_rate_nats = 0.0;
  double feasibility_gap = 0.0;  // ||h||_inf at termination, before repair
  double repair_scale_v = 1.0;
  double repair_scale_f = 1.0;
  int iterations = 0;
  bool converged = false;
  PddTrace trace;
  RelayIterate final_iterate;
};

/// Radially scales V into the source budget, then F into the relay budget.
std::pair<double, double> repair(ComplexMatrix& v, ComplexMatrix& f, const RelayInstance& inst);

RelayResult solve(const RelayInstance& inst, const PddConfig& config, const IterationCallback& cb = {});

}  // namespace pdd::relay
