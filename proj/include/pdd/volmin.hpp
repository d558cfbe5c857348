#pragma once

// Volume-minimization matrix factorization A ~ X S with the columns of S on
// the probability simplex and the volume of conv(X) measured by the smoothed
// log-det f_eps(X^T X) = sum_i log g_eps(sigma_i(X)^2).
//
// Splitting: X = Y, A = Y S, both dualized. Blocks are Y, S, X.

#include <cstdint>
#include <optional>
#include <vector>

#include "pdd/core.hpp"
#include "pdd/numerics.hpp"

namespace pdd::volmin {

struct VolMinInstance {
  RealMatrix a;  // N x L
  int k = 0;
  double eps = 1e-2;

  int n() const { return static_cast<int>(a.rows()); }
  int l() const { return static_cast<int>(a.cols()); }
};

VolMinInstance make_instance(RealMatrix a, int k, double eps = 1e-2);

struct GroundTruth {
  RealMatrix x;  // N x K
  RealMatrix s;  // K x L
  double gamma = 1.0;
  double snr_db = 0.0;  // +inf for noiseless
};

struct VolMinIterate {
  RealMatrix x, s, y;
};

struct VolMinDuals {
  RealMatrix p, q;
};

/// g_eps(x) = x for |x| >= eps, x^2 / (2 eps) + eps / 2 otherwise.
double g_eps(double x, double eps);
double g_eps_deriv(double x, double eps);

/// sum_i log g_eps(sigma_i(X)^2).
double f_eps(const RealMatrix& x, double eps);

std::size_t constraint_dim(const VolMinInstance& inst);
VolMinDuals unpack_duals(const RealVector& lambda, const VolMinInstance& inst);
RealVector pack_duals(const VolMinDuals& d);

/// (A - Y S, X - Y), each vectorized column-major.
RealVector constraint_h(const VolMinIterate& z, const VolMinInstance& inst);

double augmented_lagrangian(const VolMinIterate& z, const RealVector& lambda, double rho, const VolMinInstance& inst);

RealMatrix update_Y(const VolMinIterate& z, const VolMinDuals& d, double rho, const VolMinInstance& inst);

/// beta <= 0 selects 1.01 sigma_1(Y)^2 + 1e-12.
RealMatrix update_S(const VolMinIterate& z, const VolMinDuals& d, double rho, const VolMinInstance& inst,
                    double beta = 0.0);

/// 0.5 ||A + rho P - Y S||^2, the S-block objective.
double s_objective(const RealMatrix& s, const RealMatrix& y, const VolMinDuals& d, double rho,
                   const VolMinInstance& inst);
/// Its majorizer at S_tilde with curvature beta.
double s_majorizer(const RealMatrix& s, const RealMatrix& s_tilde, const RealMatrix& y, const VolMinDuals& d,
                   double rho, double beta, const VolMinInstance& inst);

/// Per-singular-value subproblem: minimize g_eps(sigma^2) / g_tilde + (sigma - sigma_bar)^2 / (2 rho).
double x_scalar_objective(double sigma, double sigma_bar, double g_tilde, double rho, double eps);
double solve_x_scalar(double sigma_bar, double g_tilde, double rho, double eps);

RealMatrix update_X(const VolMinIterate& z, const VolMinDuals& d, double rho, const VolMinInstance& inst);

/// f_eps(X^T X) + ||X - Y + rho Q||^2 / (2 rho), the X-block objective (up to constants).
double x_objective(const RealMatrix& x, const RealMatrix& y, const VolMinDuals& d, double rho,
                   const VolMinInstance& inst);

class VolMinProblem final : public BlockProblem<VolMinIterate> {
 public:
  explicit VolMinProblem(const VolMinInstance& inst) : inst_(inst) {}

  std::size_t num_blocks() const override { return 3; }
  std::size_t constraint_dim() const override { return volmin::constraint_dim(inst_); }
  RealVector constraint(const VolMinIterate& z) const override { return constraint_h(z, inst_); }
  double objective(const VolMinIterate& z) const override { return f_eps(z.x, inst_.eps); }
  void update_block(std::size_t block, VolMinIterate& z, const RealVector& lambda, double rho) const override;

  bool has_gradient() const override { return true; }
  /// [S | Y, X], column-major.
  RealVector flatten(const VolMinIterate& z) const override;
  RealVector al_gradient(const VolMinIterate& z, const RealVector& lambda, double rho) const override;
  std::size_t constrained_dim() const override {
    return static_cast<std::size_t>(inst_.k) * static_cast<std::size_t>(inst_.l());
  }
  RealVector project_constrained(const RealVector& x) const override;

  VolMinIterate unflatten(const RealVector& flat) const;

 private:
  const VolMinInstance& inst_;
};

/// rho0 = L / 100, 30 outer iterations, cyclic (Y, S, X).
PddConfig default_config(const VolMinInstance& inst);

/// X0 = K random data columns plus jitter, S0 = simplex-projected least squares, Y0 = X0.
VolMinIterate initial_iterate(const VolMinInstance& inst, std::uint64_t seed);

struct SolveOptions {
  int restarts = 3;
  bool prescale = false;
  /// Restarts are compared by f_eps among those whose final gap is at most
  /// max(feasible_gap, gap_slack * smallest gap).
  double feasible_gap = 1e-2;
  double gap_slack = 1.5;
};

struct VolMinResult {
  RealMatrix x;
  RealMatrix s;
  double f_eps = 0.0;
  double feasibility_gap = 0.0;
  double relative_error = 0.0;  // ||A - X S||_F / ||A||_F
  int restarts_used = 0;
  int best_restart = 0;
  int iterations = 0;
  bool converged = false;
  double prescale_factor = 1.0;
  PddTrace trace;  // of the selected restart
};

VolMinResult solve(const VolMinInstance& inst, const PddConfig& config, const SolveOptions& opts = {},
                   const IterationCallback& cb = {});

/// 10 log10 of the permutation-minimized normalized-column MSE, floored at -120 dB.
double mse_metric(const RealMatrix& x_hat, const RealMatrix& x_true);
double mse_linear(const RealMatrix& x_hat, const RealMatrix& x_true);

/// snr_db = +inf gives noiseless data.
std::pair<VolMinInstance, GroundTruth> gen_data(int n, int k, int l, double gamma, double snr_db, std::uint64_t seed,
                                                double eps = 1e-2);

}  // namespace pdd::volmin
