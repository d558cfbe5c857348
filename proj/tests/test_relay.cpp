#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "pdd/relay.hpp"

using namespace testing;
using namespace pdd;
namespace rl = pdd::relay;

namespace {

rl::RelayInstance scalar_instance(Complex h, Complex g, double p) {
  return rl::build_instance(ComplexMatrix::Constant(1, 1, h), ComplexMatrix::Constant(1, 1, g), 1.0,
                            RealVector::Ones(1), p, p, RealVector::Ones(1));
}

rl::RelayIterate perturbed(const rl::RelayInstance& inst, std::mt19937_64& rng) {
  rl::RelayIterate z = rl::initial_iterate(inst, rng());
  for (ComplexMatrix* m : {&z.v, &z.f, &z.x, &z.vb, &z.fb, &z.xb}) *m += cgauss(m->rows(), m->cols(), rng, 0.5);
  std::tie(z.u, z.w) = rl::wmmse_weights(z.x, z.f, inst);
  return z;
}

RealVector random_duals(const rl::RelayInstance& inst, std::mt19937_64& rng) {
  return gauss(static_cast<Eigen::Index>(rl::constraint_dim(inst)), 1, rng, 0.5);
}

// Gradient of the block surrogate restricted to flat[start, start + len).
// The surrogate is quadratic in each block, so a unit step is exact.
RealVector block_gradient(const rl::RelayIterate& z, const rl::RelayDuals& d, double rho,
                          const rl::RelayInstance& inst, Eigen::Index start, Eigen::Index len) {
  const RealVector flat = rl::flatten(z);
  const auto f = [&](const RealVector& part) {
    RealVector x = flat;
    x.segment(start, len) = part;
    return rl::surrogate_objective(rl::unflatten(x, z), d, rho, inst);
  };
  return fd_gradient(f, flat.segment(start, len), 1.0);
}

// Sum rate of the scalar channel at magnitudes (|v|, |f|) with unit noise.
double scalar_rate(double v, double f, double h, double g) {
  const double s = g * g * f * f;
  return std::log1p(s * h * h * v * v / (s + 1.0));
}

}  // namespace

TEST_SUITE("relay") {
  TEST_CASE("instance validation") {
    CHECK_THROWS_AS(rl::build_instance(ComplexMatrix::Ones(1, 1), ComplexMatrix::Ones(1, 1), 0.0,
                                       RealVector::Ones(1), 1.0, 1.0, RealVector::Ones(1)),
                    InvalidInput);
    CHECK_THROWS_AS(rl::build_instance(ComplexMatrix::Ones(2, 1), ComplexMatrix::Ones(1, 1), 1.0,
                                       RealVector::Ones(1), 1.0, 1.0, RealVector::Ones(1)),
                    InvalidInput);
    const auto inst = rl::random_instance(4, 4, 4, 10.0, 1);
    CHECK(inst.p_s == doctest::Approx(10.0));
    CHECK(inst.p_r == doctest::Approx(10.0));
  }

  TEST_CASE("constraint residual") {
    const auto inst = rl::random_instance(2, 3, 2, 10.0, 2);
    const auto z0 = rl::initial_iterate(inst, 2);
    CHECK(rl::constraint_h(z0, inst).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(rl::constraint_h(z0, inst).size() == static_cast<Eigen::Index>(rl::constraint_dim(inst)));

    const auto s = scalar_instance(1.0, 1.0, 10.0);
    rl::RelayIterate z = rl::initial_iterate(s, 1);
    z.v.setZero();
    z.vb.setZero();
    z.f.setZero();
    z.fb.setZero();
    z.x.setOnes();
    z.xb.setOnes();
    const RealVector h = rl::constraint_h(z, s);
    CHECK(h.cwiseAbs().maxCoeff() == 1.0);
    CHECK(h.cwiseAbs().sum() == 1.0);
    CHECK(h(0) == 1.0);
  }

  TEST_CASE("penalty gradient of 0.5 ||h||^2 matches finite differences") {
    std::mt19937_64 rng(3);
    const auto inst = rl::random_instance(2, 2, 2, 10.0, 3);
    const auto z = perturbed(inst, rng);
    const RealVector zero = RealVector::Zero(static_cast<Eigen::Index>(rl::constraint_dim(inst)));
    const auto f = [&](const RealVector& x) { return 0.5 * rl::constraint_h(rl::unflatten(x, z), inst).squaredNorm(); };
    // the AL gradient at rho = 1, lambda = 0 minus the rate gradient is the penalty gradient
    const auto rate = [&](const RealVector& x) {
      const auto y = rl::unflatten(x, z);
      return -rl::sum_rate_x(y.x, y.f, inst);
    };
    const RealVector flat = rl::flatten(z);
    const RealVector g = rl::al_gradient(z, zero, 1.0, inst) - fd_gradient(rate, flat);
    CHECK(rel_err(fd_gradient(f, flat), g) < 1e-4);
  }

  TEST_CASE("WMMSE weights") {
    const auto s = scalar_instance(1.0, 1.0, 10.0);
    const auto [u, w] = rl::wmmse_weights(ComplexMatrix::Ones(1, 1), ComplexMatrix::Zero(1, 1), s);
    CHECK(std::abs(u(0) - Complex(0.5)) < 1e-15);
    CHECK(w(0) == doctest::Approx(2.0));

    const auto inst = rl::random_instance(3, 3, 2, 10.0, 4);
    const auto [u0, w0] = rl::wmmse_weights(ComplexMatrix::Zero(3, 2), ComplexMatrix::Identity(3, 3), inst);
    CHECK(u0.norm() == 0.0);
    CHECK((w0 - RealVector::Ones(2)).norm() == 0.0);

    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 10; ++rep) {
      const ComplexMatrix v = cgauss(3, 2, rng);
      const ComplexMatrix f = cgauss(3, 3, rng);
      const ComplexMatrix x = f * inst.h * v;
      const auto [uu, ww] = rl::wmmse_weights(x, f, inst);
      const RealVector gamma = rl::sinr(v, f, inst);
      for (int k = 0; k < inst.k; ++k) {
        CHECK(std::abs(std::log(ww(k)) - std::log1p(gamma(k))) < 1e-10);
        CHECK(ww(k) >= 1.0);
      }
    }
  }

  TEST_CASE("F update") {
    std::mt19937_64 rng(5);
    const auto inst = rl::random_instance(2, 3, 2, 10.0, 5);
    const double rho = 0.7;
    auto z = perturbed(inst, rng);
    const RealVector lambda = random_duals(inst, rng);
    const auto d = rl::unpack_duals(lambda, inst);

    // V = 0 decouples into a linear solve
    auto z0 = z;
    z0.v.setZero();
    const auto [gw, dw] = rl::weighted_matrices(z0.u, z0.w, inst);
    const ComplexMatrix expect = (2.0 * rho * gw + ComplexMatrix::Identity(3, 3))
                                     .lu()
                                     .solve(z0.fb - rho * d.zf / inst.sigma_r());
    CHECK((rl::update_F(z0, d, rho, inst) - expect).norm() < 1e-10);

    // block gradient vanishes at the output
    const Eigen::Index nb = 2 * (z.vb.size() + z.xb.size() + z.fb.size());
    const Eigen::Index start = nb + 2 * z.v.size();
    z.f = rl::update_F(z, d, rho, inst);
    CHECK(block_gradient(z, d, rho, inst, start, 2 * z.f.size()).cwiseAbs().maxCoeff() <= 1e-7);
  }

  TEST_CASE("F update at rho = 1e6 matches a Kronecker solve") {
    std::mt19937_64 rng(6);
    const auto inst = rl::random_instance(2, 2, 1, 10.0, 6);
    auto z = perturbed(inst, rng);
    z.u.setZero();  // G_w = 0
    const double rho = 1e6;
    const auto d = rl::unpack_duals(random_duals(inst, rng), inst);
    const double sr = inst.sigma_r();
    const ComplexMatrix hv = inst.h * z.v;
    const ComplexMatrix a = inst.sigma_r2 * ComplexMatrix::Identity(2, 2);
    const ComplexMatrix b = hv * hv.adjoint();
    const ComplexMatrix c = sr * (sr * z.fb - rho * d.zf) + (z.x + rho * d.z) * hv.adjoint();
    ComplexMatrix k = ComplexMatrix::Zero(4, 4);
    for (int j = 0; j < 2; ++j) {
      k.block(2 * j, 2 * j, 2, 2) += a;
      for (int i = 0; i < 2; ++i) k.block(2 * j, 2 * i, 2, 2) += b(i, j) * ComplexMatrix::Identity(2, 2);
    }
    const ComplexVector vec = k.fullPivLu().solve(c.reshaped());
    const ComplexMatrix f = rl::update_F(z, d, rho, inst);
    CHECK((f.reshaped() - vec).norm() / vec.norm() < 1e-9);
  }

  TEST_CASE("barred update") {
    std::mt19937_64 rng(7);
    const auto inst = rl::random_instance(2, 2, 2, 10.0, 7);
    auto z = perturbed(inst, rng);
    const RealVector zero = RealVector::Zero(static_cast<Eigen::Index>(rl::constraint_dim(inst)));
    const auto d0 = rl::unpack_duals(zero, inst);

    // interior: copies follow their pre-images
    z.v *= 0.1 / z.v.norm();
    z.x *= 0.1 / z.x.norm();
    z.f *= 0.1 / z.f.norm();
    auto b = rl::update_bars(z, d0, 1.0, inst);
    CHECK((b.vb - z.v).norm() < 1e-15);
    CHECK((b.xb - z.x).norm() < 1e-15);
    CHECK((b.fb - z.f).norm() < 1e-15);

    // twice the radius: halved
    z.v *= 2.0 * std::sqrt(inst.p_s) / z.v.norm();
    const double e = std::sqrt(z.x.squaredNorm() + inst.sigma_r2 * z.f.squaredNorm());
    z.x *= 2.0 * std::sqrt(inst.p_r) / e;
    z.f *= 2.0 * std::sqrt(inst.p_r) / e;
    b = rl::update_bars(z, d0, 1.0, inst);
    CHECK((b.vb - 0.5 * z.v).norm() < 1e-12);
    CHECK((b.xb - 0.5 * z.x).norm() < 1e-12);
    CHECK((b.fb - 0.5 * z.f).norm() < 1e-12);
  }

  TEST_CASE("barred update beats 1000 random feasible candidates") {
    std::mt19937_64 rng(8);
    const auto inst = rl::random_instance(2, 2, 2, 10.0, 8);
    auto z = perturbed(inst, rng);
    const auto d = rl::unpack_duals(random_duals(inst, rng), inst);
    const double rho = 0.5;
    const auto b = rl::update_bars(z, d, rho, inst);
    z.vb = b.vb;
    z.xb = b.xb;
    z.fb = b.fb;
    CHECK(z.vb.squaredNorm() <= inst.p_s + 1e-8);
    CHECK(z.xb.squaredNorm() + inst.sigma_r2 * z.fb.squaredNorm() <= inst.p_r + 1e-8);
    const double best = rl::surrogate_objective(z, d, rho, inst);
    for (int s = 0; s < 1000; ++s) {
      auto y = z;
      y.vb = cgauss(2, 2, rng);
      y.vb *= std::sqrt(inst.p_s) * uniform(rng, 0.0, 1.0) / y.vb.norm();
      y.xb = cgauss(2, 2, rng);
      y.fb = cgauss(2, 2, rng);
      const double scale =
          std::sqrt(inst.p_r) * uniform(rng, 0.0, 1.0) / std::sqrt(y.xb.squaredNorm() + inst.sigma_r2 * y.fb.squaredNorm());
      y.xb *= scale;
      y.fb *= scale;
      CHECK(best <= rl::surrogate_objective(y, d, rho, inst) + 1e-12);
    }
  }

  TEST_CASE("X and V updates") {
    std::mt19937_64 rng(9);
    const auto inst = rl::random_instance(3, 2, 2, 10.0, 9);
    const double rho = 0.8;
    auto z = perturbed(inst, rng);
    const auto d = rl::unpack_duals(random_duals(inst, rng), inst);

    auto zx = z;
    zx.u.setZero();
    const ComplexMatrix x_expect = 0.5 * ((zx.f * inst.h * zx.v - rho * d.z) + (zx.xb - rho * d.zx));
    CHECK((rl::update_X(zx, d, rho, inst) - x_expect).norm() < 1e-12);

    auto zv = z;
    zv.f.setZero();
    CHECK((rl::update_V(zv, d, rho, inst) - (zv.vb - rho * d.zv)).norm() < 1e-12);

    const Eigen::Index nb = 2 * (z.vb.size() + z.xb.size() + z.fb.size());
    const Eigen::Index nv = 2 * z.v.size(), nf = 2 * z.f.size(), nx = 2 * z.x.size();
    z.x = rl::update_X(z, d, rho, inst);
    CHECK(block_gradient(z, d, rho, inst, nb + nv + nf, nx).cwiseAbs().maxCoeff() <= 1e-8);
    z.v = rl::update_V(z, d, rho, inst);
    CHECK(block_gradient(z, d, rho, inst, nb, nv).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("inner step does not increase the augmented Lagrangian") {
    std::mt19937_64 rng(10);
    for (int rep = 0; rep < 50; ++rep) {
      const auto inst = rl::random_instance(2, 2, 2, 10.0, 100 + rep);
      const auto z = rl::initial_iterate(inst, rep);
      const RealVector lambda = random_duals(inst, rng);
      const double rho = uniform(rng, 0.2, 2.0);
      const double before = rl::augmented_lagrangian(z, lambda, rho, inst);
      const auto next = rl::bsum_inner_step(z, lambda, rho, inst);
      CHECK(rl::augmented_lagrangian(next, lambda, rho, inst) <= before + 1e-9 * (1.0 + std::abs(before)));
    }
  }

  TEST_CASE("WMMSE surrogate equals the rate after a refresh") {
    std::mt19937_64 rng(11);
    const auto inst = rl::random_instance(3, 3, 3, 10.0, 11);
    const auto z = perturbed(inst, rng);
    double lhs = 0.0;
    for (int k = 0; k < inst.k; ++k)
      lhs += inst.alpha(k) * (std::log(z.w(k)) - z.w(k) * rl::mse(z.u(k), z.x, z.f, inst, k) + 1.0);
    CHECK(lhs == doctest::Approx(rl::sum_rate_x(z.x, z.f, inst)).epsilon(1e-12));
  }

  TEST_CASE("zero precoders give zero rate") {
    const auto inst = rl::random_instance(2, 2, 2, 10.0, 12);
    CHECK(rl::sum_rate(ComplexMatrix::Zero(2, 2), ComplexMatrix::Zero(2, 2), inst) == 0.0);
  }

  TEST_CASE("repair meets both budgets") {
    std::mt19937_64 rng(13);
    const auto inst = rl::random_instance(2, 2, 2, 10.0, 13);
    ComplexMatrix v = cgauss(2, 2, rng, 5.0);
    ComplexMatrix f = cgauss(2, 2, rng, 5.0);
    rl::repair(v, f, inst);
    CHECK(v.squaredNorm() <= inst.p_s * (1.0 + 1e-12));
    const ComplexMatrix fhv = f * inst.h * v;
    CHECK(fhv.squaredNorm() + inst.sigma_r2 * f.squaredNorm() <= inst.p_r * (1.0 + 1e-12));
  }

  TEST_CASE("scalar channel is within 2% of the magnitude grid optimum") {
    const auto inst = scalar_instance(1.0, 1.0, 10.0);
    const double vmax = std::sqrt(inst.p_s);
    double best = 0.0;
    for (double v = 0.0; v <= vmax; v += 1e-2) {
      const double fmax = std::sqrt(inst.p_r / (v * v + inst.sigma_r2));
      for (double f = 0.0; f <= fmax; f += 1e-2) best = std::max(best, scalar_rate(v, f, 1.0, 1.0));
    }
    const auto r = rl::solve(inst, rl::default_config(inst));
    CHECK(r.sum_rate_nats >= 0.98 * best);
    CHECK(std::abs(scalar_rate(std::abs(r.v(0, 0)), std::abs(r.f(0, 0)), 1.0, 1.0) - r.sum_rate_nats) < 1e-10);
  }
}
