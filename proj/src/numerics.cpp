#include "pdd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace pdd::numerics {

namespace {

// Flip columns of u (and v) so the first entry with magnitude above tol is positive.
void fix_column_signs(RealMatrix& u, RealMatrix* v) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    const double scale = u.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      if (std::abs(u(i, j)) > 1e-12 * scale) {
        if (u(i, j) < 0.0) {
          u.col(j) *= -1.0;
          if (v != nullptr) v->col(j) *= -1.0;
        }
        break;
      }
    }
  }
}

}  // namespace

RealVector real_embed_vec(const ComplexVector& w) {
  RealVector out(2 * w.size());
  out.head(w.size()) = w.real();
  out.tail(w.size()) = w.imag();
  return out;
}

ComplexVector complex_from_embed(const RealVector& w_eq) {
  if (w_eq.size() % 2 != 0) throw InvalidInput("complex_from_embed: odd length");
  const Eigen::Index n = w_eq.size() / 2;
  ComplexVector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = Complex(w_eq(i), w_eq(n + i));
  return w;
}

RealMatrix real_embed_psd(const ComplexMatrix& m, const NumericsConfig& cfg) {
  if (m.rows() != m.cols()) throw InvalidInput("real_embed_psd: matrix is not square");
  const double scale = std::max(1.0, m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff());
  const ComplexMatrix mh = m.adjoint();
  if (m.size() > 0 && (m - mh).cwiseAbs().maxCoeff() > cfg.hermitian_tol * scale) {
    throw InvalidInput("real_embed_psd: matrix is not Hermitian");
  }
  const ComplexMatrix herm = 0.5 * (m + mh);
  const Eigen::Index n = m.rows();
  RealMatrix out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = herm.real();
  out.topRightCorner(n, n) = -herm.imag();
  out.bottomLeftCorner(n, n) = herm.imag();
  out.bottomRightCorner(n, n) = herm.real();
  return out;
}

EigPair min_eigvec_sym(const RealMatrix& c, const NumericsConfig& cfg) {
  if (c.rows() != c.cols() || c.rows() == 0) throw InvalidInput("min_eigvec_sym: need a non-empty square matrix");
  const RealMatrix sym = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(sym);
  if (es.info() != Eigen::Success) throw NumericalFailure("min_eigvec_sym: eigensolver did not converge", -1.0);
  RealMatrix v = es.eigenvectors().col(0);
  fix_column_signs(v, nullptr);
  const double lambda = es.eigenvalues()(0);
  const double residual = (sym * v - lambda * v).norm();
  const double scale = std::max(sym.norm(), 1e-300);
  if (residual > cfg.eig_residual * scale && residual > 1e-300) {
    throw NumericalFailure("min_eigvec_sym: residual bound violated", residual);
  }
  return {v.col(0), lambda};
}

ThinSvd thin_svd(const RealMatrix& m, const NumericsConfig& cfg) {
  Eigen::JacobiSVD<RealMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ThinSvd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  fix_column_signs(out.u, &out.v);
  const double norm = m.norm();
  if (norm > 0.0) {
    const double residual = (out.u * out.sigma.asDiagonal() * out.v.transpose() - m).norm();
    if (residual > cfg.svd_residual * norm) throw NumericalFailure("thin_svd: reconstruction bound violated", residual);
  }
  return out;
}

namespace {

template <class Matrix>
Matrix sylvester_impl(const Matrix& a, const Matrix& b, const Matrix& c, const NumericsConfig& cfg) {
  using Scalar = typename Matrix::Scalar;
  if (a.rows() != a.cols() || b.rows() != b.cols()) throw InvalidInput("solve_sylvester: A and B must be square");
  if (c.rows() != a.rows() || c.cols() != b.rows()) throw InvalidInput("solve_sylvester: C has the wrong shape");
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  // column-major vec: vec(AF) = (I_m (x) A) vec F, vec(FB) = (B^T (x) I_n) vec F
  Matrix kron = Matrix::Zero(n * m, n * m);
  for (Eigen::Index j = 0; j < m; ++j) {
    kron.block(j * n, j * n, n, n) += a;
    for (Eigen::Index l = 0; l < m; ++l) {
      const Scalar blj = b(l, j);  // (B^T)(j, l)
      if (blj != Scalar(0)) kron.block(j * n, l * n, n, n).diagonal().array() += blj;
    }
  }
  Eigen::PartialPivLU<Matrix> lu(kron);
  const double rcond = lu.rcond();
  if (!(rcond > cfg.sylvester_min_rcond)) {
    throw NumericalFailure("solve_sylvester: Kronecker system is singular or ill-conditioned (rcond)", rcond);
  }
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rhs = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(c.data(), n * m);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = lu.solve(rhs);
  Matrix f = Eigen::Map<const Matrix>(x.data(), n, m);
  const double residual = (a * f + f * b - c).norm();
  const double bound = cfg.sylvester_residual * (a.norm() + b.norm()) * f.norm() + 1e-12;
  if (!(residual <= bound)) throw NumericalFailure("solve_sylvester: residual bound violated", residual);
  return f;
}

}  // namespace

ComplexMatrix solve_sylvester(const ComplexMatrix& a, const ComplexMatrix& b, const ComplexMatrix& c,
                              const NumericsConfig& cfg) {
  return sylvester_impl(a, b, c, cfg);
}

RealMatrix solve_sylvester(const RealMatrix& a, const RealMatrix& b, const RealMatrix& c, const NumericsConfig& cfg) {
  return sylvester_impl(a, b, c, cfg);
}

RealVector project_simplex(const RealVector& v) {
  if (v.size() == 0) throw InvalidInput("project_simplex: empty vector");
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumsum += sorted[j];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  RealVector s = (v.array() - theta).cwiseMax(0.0);
  // absorb rounding so the sum is exactly representable as 1 up to ulp
  const double total = s.sum();
  if (total > 0.0) s /= total;
  return s;
}

RealMatrix project_simplex_columns(const RealMatrix& m) {
  RealMatrix out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = project_simplex(m.col(j));
  return out;
}

double solve_monotone_cubic(double a, double b, double d, const NumericsConfig& cfg) {
  if (!(a > 0.0) || !(b > 0.0) || !(d >= 0.0) || !std::isfinite(a) || !std::isfinite(b) || !std::isfinite(d)) {
    throw InvalidInput("solve_monotone_cubic: need a > 0, b > 0, d >= 0");
  }
  if (d == 0.0) return 0.0;
  auto f = [&](double s) { return (a * s * s + b) * s - d; };
  // Both d/b and cbrt(d/a) bound the root from above; Newton from the right on a
  // convex increasing function decreases monotonically to the root.
  double s = std::min(d / b, std::cbrt(d / a));
  for (int it = 0; it < 200; ++it) {
    const double fs = f(s);
    if (fs <= 0.0) break;
    const double next = s - fs / (3.0 * a * s * s + b);
    if (!(next < s)) break;
    s = std::max(next, 0.0);
  }
  // polish in case the last step undershot
  double lo = 0.0;
  double hi = std::min(d / b, std::cbrt(d / a));
  if (f(s) <= 0.0) lo = s; else hi = s;
  const double tol = cfg.cubic_tol * std::max(1.0, d);
  for (int it = 0; it < 200 && std::abs(f(s)) > tol; ++it) {
    const double newton = s - f(s) / (3.0 * a * s * s + b);
    s = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
    if (f(s) <= 0.0) lo = s; else hi = s;
  }
  if (std::abs(f(s)) > tol) throw NumericalFailure("solve_monotone_cubic: residual bound violated", std::abs(f(s)));
  return s;
}

}  // namespace pdd::numerics
