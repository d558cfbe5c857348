#pragma once

// Dense real/complex kernels shared by the solvers. Everything here is a pure
// function of its arguments.

#include <complex>
#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "pdd/error.hpp"

namespace pdd {

using Complex = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

}  // namespace pdd

namespace pdd::numerics {

/// Default tolerances. Kernels take a config so tests can tighten or relax.
struct NumericsConfig {
  double hermitian_tol = 1e-12;   // relative, max-abs of M - M^H
  double eig_residual = 1e-9;     // ||Cv - lv|| / ||C||
  double svd_residual = 1e-9;     // ||U S V^T - M|| / ||M||
  double sylvester_residual = 1e-8;
  double sylvester_min_rcond = 1e-14;
  double cubic_tol = 1e-12;
};

/// w -> (Re w, Im w).
RealVector real_embed_vec(const ComplexVector& w);

/// Inverse of real_embed_vec.
ComplexVector complex_from_embed(const RealVector& w_eq);

/// Hermitian M -> [Re M, -Im M; Im M, Re M], so that w^H M w = w_eq^T M_eq w_eq.
/// M is symmetrized by averaging with M^H; a deviation larger than
/// hermitian_tol * max(1, max|M_ij|) is rejected.
RealMatrix real_embed_psd(const ComplexMatrix& m, const NumericsConfig& cfg = {});

struct EigPair {
  RealVector vector;  // unit norm, first nonzero entry positive
  double value;
};

/// Eigenvector of the smallest eigenvalue of a symmetric matrix.
EigPair min_eigvec_sym(const RealMatrix& c, const NumericsConfig& cfg = {});

struct ThinSvd {
  RealMatrix u;       // rows x r
  RealVector sigma;   // r, descending, nonnegative
  RealMatrix v;       // cols x r
};

/// Thin SVD with r = min(rows, cols). Each column of U has its first nonzero
/// entry positive (V flipped accordingly).
ThinSvd thin_svd(const RealMatrix& m, const NumericsConfig& cfg = {});

/// Solves A F + F B = C by Kronecker vectorization
/// (I (x) A + B^T (x) I) vec(F) = vec(C).
ComplexMatrix solve_sylvester(const ComplexMatrix& a, const ComplexMatrix& b, const ComplexMatrix& c,
                              const NumericsConfig& cfg = {});
RealMatrix solve_sylvester(const RealMatrix& a, const RealMatrix& b, const RealMatrix& c,
                           const NumericsConfig& cfg = {});

/// Euclidean projection onto the Frobenius ball of radius r.
template <class Derived>
typename Derived::PlainObject project_ball(const Eigen::MatrixBase<Derived>& m, double radius) {
  if (!(radius >= 0.0)) throw InvalidInput("project_ball: negative radius");
  const double n = m.norm();
  if (n <= radius) return m;
  return (radius / n) * m;
}

/// Euclidean projection onto {s >= 0, 1^T s = 1} (sort and threshold).
RealVector project_simplex(const RealVector& v);

/// Column-wise simplex projection.
RealMatrix project_simplex_columns(const RealMatrix& m);

/// The nonnegative root of a s^3 + b s - d = 0 for a, b > 0, d >= 0.
double solve_monotone_cubic(double a, double b, double d, const NumericsConfig& cfg = {});

/// Max-abs entry; 0 for empty input.
inline double inf_norm(const RealVector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Seed for an independent random stream derived from a user seed (splitmix64
/// finalizer). Solver initializers use this so that an instance generated
/// from seed s and a solve started from seed s do not share draws.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace pdd::numerics
