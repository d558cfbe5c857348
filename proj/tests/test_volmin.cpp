#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "pdd/volmin.hpp"

using namespace testing;
using namespace pdd;
namespace vm = pdd::volmin;

namespace {

RealMatrix random_simplex(int k, int l, std::mt19937_64& rng) {
  RealMatrix s = (gauss(k, l, rng).array().abs() + 1e-3).matrix();
  for (int j = 0; j < l; ++j) s.col(j) /= s.col(j).sum();
  return s;
}

struct Setup {
  vm::VolMinInstance inst;
  vm::VolMinIterate z;
  vm::VolMinDuals d;
};

Setup random_setup(int n, int k, int l, std::mt19937_64& rng) {
  Setup s{vm::make_instance(gauss(n, l, rng), k), {}, {}};
  s.z.x = gauss(n, k, rng);
  s.z.y = gauss(n, k, rng);
  s.z.s = random_simplex(k, l, rng);
  s.d.p = gauss(n, l, rng, 0.3);
  s.d.q = gauss(n, k, rng, 0.3);
  return s;
}

}  // namespace

TEST_SUITE("volmin") {
  TEST_CASE("g_eps") {
    const double eps = 1e-2;
    CHECK(vm::g_eps(eps, eps) == doctest::Approx(eps));
    CHECK(vm::g_eps(0.0, eps) == doctest::Approx(eps / 2.0));
    CHECK(vm::g_eps_deriv(eps, eps) == doctest::Approx(1.0));
    const double h = 1e-9;
    CHECK((vm::g_eps(eps, eps) - vm::g_eps(eps - h, eps)) / h == doctest::Approx(1.0).epsilon(1e-6));
    CHECK((vm::g_eps(eps + h, eps) - vm::g_eps(eps, eps)) / h == doctest::Approx(1.0).epsilon(1e-6));
    for (double x = 0.0; x < 3.0 * eps; x += eps / 7.0) {
      const double fd = (vm::g_eps(x + 1e-8, eps) - vm::g_eps(x - 1e-8, eps)) / 2e-8;
      CHECK(std::abs(fd - vm::g_eps_deriv(x, eps)) < 1e-6);
      CHECK(vm::g_eps(x, eps) >= eps / 2.0);
    }
  }

  TEST_CASE("f_eps equals log det away from the smoothing region") {
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 10; ++rep) {
      RealMatrix x = gauss(6, 3, rng);
      auto svd = numerics::thin_svd(x);
      if (svd.sigma.minCoeff() < 0.2) continue;
      CHECK(std::abs(vm::f_eps(x, 1e-2) - std::log((x.transpose() * x).determinant())) < 1e-10);
    }
  }

  TEST_CASE("f_eps is finite for rank-deficient X") {
    CHECK(vm::f_eps(RealMatrix::Zero(4, 2), 1e-2) == doctest::Approx(2.0 * std::log(5e-3)));
    RealMatrix x = RealMatrix::Zero(4, 2);
    x(0, 0) = 1.0;
    CHECK(std::isfinite(vm::f_eps(x, 1e-2)));
  }

  TEST_CASE("Y update") {
    std::mt19937_64 rng(2);
    const double rho = 0.4;
    auto s = random_setup(5, 3, 20, rng);

    auto z0 = s.z;
    z0.s.setZero();
    CHECK((vm::update_Y(z0, s.d, rho, s.inst) - (z0.x + rho * s.d.q)).norm() < 1e-12);

    const RealMatrix y = vm::update_Y(s.z, s.d, rho, s.inst);
    const RealMatrix grad =
        -((s.inst.a + rho * s.d.p - y * s.z.s) * s.z.s.transpose() + (s.z.x + rho * s.d.q - y)) / rho;
    CHECK(grad.cwiseAbs().maxCoeff() <= 1e-9);

    const RealMatrix m = RealMatrix::Identity(3, 3) + s.z.s * s.z.s.transpose();
    const RealMatrix rhs = (s.inst.a + rho * s.d.p) * s.z.s.transpose() + s.z.x + rho * s.d.q;
    const RealMatrix oracle = m.fullPivLu().solve(rhs.transpose()).transpose();
    CHECK((y - oracle).norm() / oracle.norm() < 1e-10);
  }

  TEST_CASE("S update") {
    std::mt19937_64 rng(3);
    auto s = random_setup(4, 3, 10, rng);
    auto z0 = s.z;
    z0.y.setZero();
    CHECK((vm::update_S(z0, s.d, 0.5, s.inst) - z0.s).norm() < 1e-12);

    for (int call = 0; call < 100; ++call) {
      auto t = random_setup(4, 3, 10, rng);
      const double rho = uniform(rng, 0.1, 2.0);
      const RealMatrix next = vm::update_S(t.z, t.d, rho, t.inst);
      CHECK(vm::s_objective(next, t.z.y, t.d, rho, t.inst) <=
            vm::s_objective(t.z.s, t.z.y, t.d, rho, t.inst) + 1e-12);
      CHECK(next.minCoeff() >= 0.0);
      CHECK((next.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("repeated S updates reach the grid optimum for one column") {
    std::mt19937_64 rng(4);
    auto s = random_setup(3, 2, 1, rng);
    const double rho = 0.5;
    for (int it = 0; it < 2000; ++it) s.z.s = vm::update_S(s.z, s.d, rho, s.inst);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 10000; ++i) {
      RealMatrix c(2, 1);
      c << i * 1e-4, 1.0 - i * 1e-4;
      best = std::min(best, vm::s_objective(c, s.z.y, s.d, rho, s.inst));
    }
    const double got = vm::s_objective(s.z.s, s.z.y, s.d, rho, s.inst);
    CHECK(got <= best + 1e-9);
    CHECK(best - got <= 1e-6 * (1.0 + best));
  }

  TEST_CASE("per-singular-value X subproblem") {
    const double eps = 1e-2;
    const double rho = 0.3;
    for (double g : {0.01, 0.5, 3.0}) CHECK(vm::solve_x_scalar(0.0, g, rho, eps) == 0.0);

    for (double sbar : {0.0, 0.05, 0.1, 0.3, 1.0, 4.0}) {
      for (double g : {0.005, 0.2, 2.0}) {
        const double sigma = vm::solve_x_scalar(sbar, g, rho, eps);
        double best = std::numeric_limits<double>::infinity();
        for (double x = 0.0; x <= sbar + 3.0 * std::sqrt(eps); x += 1e-3)
          best = std::min(best, vm::x_scalar_objective(x, sbar, g, rho, eps));
        CHECK(vm::x_scalar_objective(sigma, sbar, g, rho, eps) <= best + 1e-9);
      }
    }

    const double g = 2.0, sbar = 4.0;
    REQUIRE(g * sbar / (2.0 * rho + g) >= std::sqrt(eps));
    CHECK(vm::solve_x_scalar(sbar, g, rho, eps) == doctest::Approx(g * sbar / (2.0 * rho + g)));
  }

  TEST_CASE("X update does not increase its objective") {
    std::mt19937_64 rng(5);
    for (int call = 0; call < 100; ++call) {
      auto s = random_setup(5, 3, 4, rng);
      s.z.x *= uniform(rng, 0.01, 2.0);
      const double rho = uniform(rng, 0.05, 2.0);
      const RealMatrix next = vm::update_X(s.z, s.d, rho, s.inst);
      CHECK(vm::x_objective(next, s.z.y, s.d, rho, s.inst) <=
            vm::x_objective(s.z.x, s.z.y, s.d, rho, s.inst) + 1e-9);
    }
  }

  TEST_CASE("MSE metric") {
    std::mt19937_64 rng(6);
    const RealMatrix x = (gauss(5, 3, rng).array().abs() + 0.1).matrix();
    CHECK(vm::mse_metric(x, x) == -120.0);
    RealMatrix p(5, 3);
    p << 2.0 * x.col(2), 0.5 * x.col(0), 7.0 * x.col(1);
    CHECK(vm::mse_linear(p, x) < 1e-28);

    const RealMatrix y = gauss(5, 3, rng);
    std::vector<int> perm{0, 1, 2};
    double best = std::numeric_limits<double>::infinity();
    do {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += (x.col(k).normalized() - y.col(perm[k]).normalized()).squaredNorm();
      best = std::min(best, acc / 3.0);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(vm::mse_linear(y, x) == doctest::Approx(best).epsilon(1e-12));
    CHECK(vm::mse_metric(y, x) == doctest::Approx(10.0 * std::log10(best)));

    RealMatrix bad = x;
    bad.col(1).setZero();
    CHECK_THROWS_AS(vm::mse_metric(bad, x), InvalidInput);
  }

  TEST_CASE("synthetic data") {
    const auto [inst, truth] = vm::gen_data(6, 3, 500, 0.8, std::numeric_limits<double>::infinity(), 7);
    CHECK(truth.s.minCoeff() >= 0.0);
    CHECK(truth.s.maxCoeff() <= 0.8);
    CHECK((truth.s.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((inst.a - truth.x * truth.s).norm() == 0.0);
    CHECK(truth.x.minCoeff() >= 0.0);
    CHECK(truth.x.maxCoeff() <= 1.0);

    const auto [noisy, nt] = vm::gen_data(10, 3, 2000, 0.8, 40.0, 8);
    const RealMatrix clean = nt.x * nt.s;
    const double snr = 10.0 * std::log10(clean.squaredNorm() / (noisy.a - clean).squaredNorm());
    CHECK(std::abs(snr - 40.0) <= 0.5);

    CHECK_THROWS_AS(vm::gen_data(6, 3, 10, 0.2, 40.0, 1), InvalidInput);
  }

  TEST_CASE("noiseless identifiable instance is recovered") {
    const auto [inst, truth] = vm::gen_data(10, 3, 200, 0.8, std::numeric_limits<double>::infinity(), 1);
    const auto r = vm::solve(inst, vm::default_config(inst));
    CHECK(vm::mse_metric(r.x, truth.x) <= -30.0);
    CHECK(r.relative_error <= 1e-2);
    CHECK(r.s.minCoeff() >= 0.0);
  }
}
