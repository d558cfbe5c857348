#pragma once

#include <functional>
#include <random>

#include "pdd/numerics.hpp"

namespace testing {

using pdd::Complex;
using pdd::ComplexMatrix;
using pdd::ComplexVector;
using pdd::RealMatrix;
using pdd::RealVector;

inline RealMatrix gauss(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  RealMatrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

inline ComplexMatrix cgauss(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale * std::sqrt(0.5));
  ComplexMatrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = Complex(nd(rng), nd(rng));
  return m;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Central differences. For a quadratic any step is exact up to rounding.
inline RealVector fd_gradient(const std::function<double(const RealVector&)>& f, const RealVector& x,
                              double step = 1e-5) {
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

inline double rel_err(const RealVector& approx, const RealVector& exact) {
  return (approx - exact).norm() / std::max(exact.norm(), 1e-12);
}

}  // namespace testing
