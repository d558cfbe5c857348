#pragma once

// Max-min fair multicast beamforming.
//
// With w = (w_1, ..., w_ng) stacked and ||w|| = 1 the per-user SINR is the
// Rayleigh ratio w^H A_k w / w^H B_k w, where for user k in group i
//   A_k = diag(e_i) (x) h_k h_k^H
//   B_k = (I - diag(e_i)) (x) h_k h_k^H + (sigma_k^2 / P_BS) I.
// The solver maximizes min_k t_k subject to ||A_k^{1/2} w|| = t_k ||B_k^{1/2} w||,
// dualizing those K equalities and keeping ||w|| = 1 in the inner problem.

#include <cstdint>
#include <vector>

#include "pdd/core.hpp"
#include "pdd/numerics.hpp"

namespace pdd::multicast {

struct MulticastInstance {
  int n_t = 0;
  std::vector<std::vector<int>> groups;  // user indices per group
  std::vector<ComplexVector> channels;   // conjugated channel h_k per user
  RealVector sigma2;                     // per-user noise power
  double p_bs = 1.0;

  // derived
  int num_users = 0;
  std::vector<int> group_of;             // group index per user
  std::vector<ComplexMatrix> a;          // A_k
  std::vector<ComplexMatrix> b;          // B_k
  std::vector<RealMatrix> a_eq;          // real embeddings
  std::vector<RealMatrix> b_eq;

  int num_groups() const { return static_cast<int>(groups.size()); }
  int dim() const { return num_groups() * n_t; }
};

/// Assembles A_k, B_k. Every user must appear in exactly one non-empty group.
MulticastInstance build_instance(int n_t, std::vector<std::vector<int>> groups, std::vector<ComplexVector> channels,
                                 RealVector sigma2, double p_bs);

/// Random instance per the usual simulation protocol: unit-variance complex
/// Gaussian channels, unit noise, P_BS = 10^(p_bs_db / 10), users assigned
/// m_g per group in order.
MulticastInstance random_instance(int n_t, int n_g, int m_g, double p_bs_db, std::uint64_t seed);

struct MulticastIterate {
  ComplexVector w;  // unit norm
  RealVector t;     // nonnegative
};

/// Per-user SINR for the per-group beamformers stacked in w_scaled.
RealVector sinr(const ComplexVector& w_scaled, const MulticastInstance& inst);

/// ||A_k^{1/2} w|| and ||B_k^{1/2} w||.
double a_norm(const ComplexVector& w, const MulticastInstance& inst, int k);
double b_norm(const ComplexVector& w, const MulticastInstance& inst, int k);

/// (||A_k^{1/2} w|| - t_k ||B_k^{1/2} w||)_k followed by ||w||^2 - 1; dim K + 1.
RealVector constraint_h(const ComplexVector& w, const RealVector& t, const MulticastInstance& inst);

struct TSolution {
  RealVector t;
  double s = 0.0;
};

/// Global maximizer of min_k t_k - sum_k a_k (t_k - b_k)^2 over t >= 0.
TSolution solve_t_subproblem(const RealVector& a, const RealVector& b);

/// Quadratic majorizer of theta(w) = sum_k (||A_k^{1/2}w|| - t_k ||B_k^{1/2}w|| + rho lambda_k)^2
/// on the unit sphere, expanded at w_tilde: theta(w) <= w_eq^T C w_eq + constant.
struct Surrogate {
  RealMatrix c;
  double constant = 0.0;
};

Surrogate build_surrogate_C(const ComplexVector& w_tilde, const RealVector& t, const RealVector& lambda, double rho,
                            const MulticastInstance& inst);

/// theta(w) above.
double theta(const ComplexVector& w, const RealVector& t, const RealVector& lambda, double rho,
             const MulticastInstance& inst);

/// Augmented Lagrangian (minimization form): -min_k t_k + lambda^T h + ||h||^2 / (2 rho)
/// over the first K components of h.
double augmented_lagrangian(const MulticastIterate& z, const RealVector& lambda, double rho,
                            const MulticastInstance& inst);

/// Gradient of lambda^T h + ||h||^2/(2 rho) with respect to (Re w, Im w, t).
RealVector penalty_gradient(const MulticastIterate& z, const RealVector& lambda, double rho,
                            const MulticastInstance& inst);

/// t-update followed by the eigenvector w-update (one BSUM sweep).
MulticastIterate bsum_inner_step(const MulticastIterate& z, const RealVector& lambda, double rho,
                                 const MulticastInstance& inst);
void update_t(MulticastIterate& z, const RealVector& lambda, double rho, const MulticastInstance& inst);
void update_w(MulticastIterate& z, const RealVector& lambda, double rho, const MulticastInstance& inst);

class MulticastProblem final : public BlockProblem<MulticastIterate> {
 public:
  explicit MulticastProblem(const MulticastInstance& inst) : inst_(inst) {}

  std::size_t num_blocks() const override { return 2; }
  std::size_t constraint_dim() const override { return static_cast<std::size_t>(inst_.num_users); }
  RealVector constraint(const MulticastIterate& z) const override;
  double objective(const MulticastIterate& z) const override;
  /// Minimum user rate (bits) of the current unit-norm w scaled to P_BS.
  double report_objective(const MulticastIterate& z) const override;
  void update_block(std::size_t block, MulticastIterate& z, const RealVector& lambda, double rho) const override;

 private:
  const MulticastInstance& inst_;
};

/// Defaults: rho0 = 0.5 K, eps0 = 1e-12, eps_O = 1e-4, c = 0.6, eps shrink 0.6,
/// 100 inner sweeps, cyclic (t, w) order.
PddConfig default_config(const MulticastInstance& inst);

/// w0 complex Gaussian normalized, t0 = ratio (so h(z0) = 0).
MulticastIterate initial_iterate(const MulticastInstance& inst, std::uint64_t seed);

struct MulticastResult {
  ComplexVector w_unit;
  ComplexVector w_scaled;           // sqrt(P_BS) * w_unit
  std::vector<ComplexVector> beamformers;  // per group
  RealVector t;
  RealVector lambda;
  PddTrace trace;
  bool converged = false;
  double min_rate_bits = 0.0;
  double kkt_residual = 0.0;
  double feasibility_gap = 0.0;
  int iterations = 0;
};

MulticastResult solve(const MulticastInstance& inst, const PddConfig& config, const IterationCallback& cb = {});

/// min_k log2(1 + SINR_k).
double min_rate(const ComplexVector& w_scaled, const MulticastInstance& inst);

/// Real-embedded gradient of w^H A_k w / w^H B_k w.
RealVector ratio_gradient(const ComplexVector& w, const MulticastInstance& inst, int k);

/// min over (lambda on the simplex, lambda_0) of ||sum_k lambda_k f_k + lambda_0 w||.
double kkt_residual(const ComplexVector& w_unit, const MulticastInstance& inst);

/// Same objective evaluated at a given simplex weight vector.
double kkt_objective(const ComplexVector& w_unit, const MulticastInstance& inst, const RealVector& weights);

}  // namespace pdd::multicast
