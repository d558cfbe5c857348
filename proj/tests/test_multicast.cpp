#include <cmath>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "helpers.hpp"
#include "pdd/multicast.hpp"

using namespace testing;
using namespace pdd;
namespace mc = pdd::multicast;

namespace {

double ratio(const ComplexVector& w, const mc::MulticastInstance& inst, int k) {
  return w.dot(inst.a[k] * w).real() / w.dot(inst.b[k] * w).real();
}

double gen_eig_optimum(const mc::MulticastInstance& inst) {
  Eigen::GeneralizedSelfAdjointEigenSolver<ComplexMatrix> ges(inst.a[0], inst.b[0]);
  return std::log2(1.0 + ges.eigenvalues().maxCoeff());
}

}  // namespace

TEST_SUITE("multicast") {
  TEST_CASE("scalar instance") {
    const auto inst = mc::build_instance(1, {{0}}, {ComplexVector::Ones(1)}, RealVector::Ones(1), 1.0);
    CHECK(std::abs(inst.a[0](0, 0) - Complex(1.0)) == 0.0);
    CHECK(std::abs(inst.b[0](0, 0) - Complex(1.0)) == 0.0);
    CHECK(mc::sinr(ComplexVector::Ones(1), inst)(0) == doctest::Approx(1.0));
  }

  TEST_CASE("A_k lives in its group's diagonal block") {
    const auto inst = mc::random_instance(3, 3, 2, 10.0, 1);
    for (int k = 0; k < inst.num_users; ++k) {
      const int g = inst.group_of[k];
      ComplexMatrix outside = inst.a[k];
      outside.block(3 * g, 3 * g, 3, 3).setZero();
      CHECK(outside.norm() == 0.0);
      CHECK(inst.a[k].block(3 * g, 3 * g, 3, 3).norm() > 0.0);
    }
  }

  TEST_CASE("generator follows the simulation protocol") {
    const auto inst = mc::random_instance(8, 4, 2, 10.0, 7);
    CHECK(inst.num_users == 8);
    CHECK(inst.num_groups() == 4);
    CHECK(inst.p_bs == doctest::Approx(10.0));
    CHECK((inst.sigma2 - RealVector::Ones(8)).norm() == 0.0);
  }

  TEST_CASE("invalid instances are rejected") {
    CHECK_THROWS_AS(mc::build_instance(2, {{0}}, {ComplexVector::Ones(2), ComplexVector::Ones(2)},
                                       RealVector::Ones(2), 1.0),
                    InvalidInput);
    CHECK_THROWS_AS(mc::build_instance(2, {{0}}, {ComplexVector::Ones(2)}, RealVector::Zero(1), 1.0), InvalidInput);
    CHECK_THROWS_AS(mc::build_instance(2, {{0}}, {ComplexVector::Ones(3)}, RealVector::Ones(1), 1.0), InvalidInput);
  }

  TEST_CASE("Rayleigh ratio equals the SINR of the scaled beamformers") {
    std::mt19937_64 rng(2);
    const auto inst = mc::random_instance(4, 2, 3, 10.0, 2);
    for (int rep = 0; rep < 10; ++rep) {
      ComplexVector w = cgauss(inst.dim(), 1, rng);
      w.normalize();
      const ComplexVector ws = std::sqrt(inst.p_bs) * w;
      for (int k = 0; k < inst.num_users; ++k) {
        // direct SINR: |h^H w_i|^2 over interference plus noise
        double sig = 0.0, intf = 0.0;
        for (int g = 0; g < inst.num_groups(); ++g) {
          const double p = std::norm(inst.channels[k].dot(ws.segment(4 * g, 4)));
          (g == inst.group_of[k] ? sig : intf) += p;
        }
        CHECK(std::abs(ratio(w, inst, k) - sig / (intf + inst.sigma2(k))) < 1e-10);
      }
    }
  }

  TEST_CASE("constraint residual") {
    std::mt19937_64 rng(3);
    const auto inst = mc::random_instance(4, 2, 2, 10.0, 3);
    ComplexVector w = cgauss(inst.dim(), 1, rng);
    w.normalize();
    RealVector t(inst.num_users);
    for (int k = 0; k < inst.num_users; ++k) t(k) = std::sqrt(ratio(w, inst, k));
    CHECK(mc::constraint_h(w, t, inst).cwiseAbs().maxCoeff() < 1e-14);

    // a user with a zero channel and t = 0
    std::vector<ComplexVector> ch{ComplexVector::Zero(2), ComplexVector::Ones(2)};
    const auto z = mc::build_instance(2, {{0}, {1}}, ch, RealVector::Ones(2), 1.0);
    CHECK(mc::constraint_h(ComplexVector::Ones(4).normalized(), RealVector::Zero(2), z)(0) == 0.0);
  }

  TEST_CASE("penalty gradient of 0.5 ||h||^2 matches finite differences") {
    std::mt19937_64 rng(4);
    const auto inst = mc::random_instance(3, 2, 2, 10.0, 4);
    const int n = inst.dim();
    for (int rep = 0; rep < 5; ++rep) {
      mc::MulticastIterate z{cgauss(n, 1, rng), RealVector::Constant(inst.num_users, uniform(rng, 0.3, 2.0))};
      RealVector flat(2 * n + inst.num_users);
      flat << numerics::real_embed_vec(z.w), z.t;
      const auto f = [&](const RealVector& x) {
        return 0.5 * mc::constraint_h(numerics::complex_from_embed(x.head(2 * n)), x.tail(inst.num_users), inst)
                         .head(inst.num_users)
                         .squaredNorm();
      };
      const RealVector g = mc::penalty_gradient(z, RealVector::Zero(inst.num_users), 1.0, inst);
      CHECK(rel_err(fd_gradient(f, flat), g) < 1e-4);
    }
  }

  TEST_CASE("t-subproblem examples") {
    auto one = mc::solve_t_subproblem(RealVector::Ones(1), RealVector::Ones(1));
    CHECK(one.s == doctest::Approx(1.5));
    CHECK(one.t(0) == doctest::Approx(1.5));
    CHECK(one.t(0) - std::pow(one.t(0) - 1.0, 2) == doctest::Approx(1.25));

    RealVector b(2);
    b << 5, 1;
    auto two = mc::solve_t_subproblem(RealVector::Ones(2), b);
    CHECK(two.s == doctest::Approx(1.5));
    CHECK(two.t(0) == doctest::Approx(5.0));
    CHECK(two.t(1) == doctest::Approx(1.5));

    for (double bb : {-3.0, 0.2, 4.0}) {
      const int k = 4;
      const double a = 0.7;
      auto eq = mc::solve_t_subproblem(RealVector::Constant(k, a), RealVector::Constant(k, bb));
      const double expect = std::max(bb + 1.0 / (2.0 * k * a), 0.0);
      CHECK(eq.s == doctest::Approx(expect));
      CHECK((eq.t - RealVector::Constant(k, expect)).norm() < 1e-12);
    }
  }

  TEST_CASE("t-subproblem matches a 1-D grid over s") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
      const RealVector a = (gauss(3, 1, rng).array().abs() + 0.1).matrix();
      const RealVector b = gauss(3, 1, rng);
      const auto sol = mc::solve_t_subproblem(a, b);
      auto phi = [&](double s) {
        const RealVector t = b.cwiseMax(s).cwiseMax(0.0);
        return t.minCoeff() - (a.array() * (t - b).array().square()).sum();
      };
      double best = -1e300;
      for (double s = 0.0; s <= 10.0; s += 1e-4) best = std::max(best, phi(s));
      CHECK(phi(sol.s) >= best - 1e-9);
    }
  }

  TEST_CASE("surrogate is exact when lambda = 0 and t = 0") {
    std::mt19937_64 rng(6);
    const auto inst = mc::random_instance(3, 2, 2, 10.0, 6);
    const ComplexVector wt = cgauss(inst.dim(), 1, rng).normalized();
    const RealVector zero = RealVector::Zero(inst.num_users);
    const auto sur = mc::build_surrogate_C(wt, zero, zero, 0.7, inst);
    RealMatrix sum = RealMatrix::Zero(2 * inst.dim(), 2 * inst.dim());
    for (const auto& a : inst.a_eq) sum += a;
    CHECK((sur.c - sum).norm() < 1e-12);
    for (int s = 0; s < 20; ++s) {
      const ComplexVector w = cgauss(inst.dim(), 1, rng).normalized();
      const RealVector we = numerics::real_embed_vec(w);
      CHECK(we.dot(sur.c * we) + sur.constant == doctest::Approx(mc::theta(w, zero, zero, 0.7, inst)));
    }
  }

  TEST_CASE("surrogate upper-bounds theta on the sphere and touches it at the expansion point") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 10; ++rep) {
      const auto inst = mc::random_instance(4, 2, 2, 10.0, 100 + rep);
      const ComplexVector wt = cgauss(inst.dim(), 1, rng).normalized();
      RealVector t(inst.num_users);
      for (int k = 0; k < inst.num_users; ++k) t(k) = std::sqrt(ratio(wt, inst, k)) * uniform(rng, 0.5, 1.5);
      const RealVector lambda = gauss(inst.num_users, 1, rng, 2.0);
      const double rho = uniform(rng, 0.1, 3.0);
      const auto sur = mc::build_surrogate_C(wt, t, lambda, rho, inst);
      auto u = [&](const ComplexVector& w) {
        const RealVector we = numerics::real_embed_vec(w);
        return we.dot(sur.c * we) + sur.constant;
      };
      CHECK(std::abs(u(wt) - mc::theta(wt, t, lambda, rho, inst)) < 1e-8);
      for (int s = 0; s < 200; ++s) {
        const ComplexVector w = cgauss(inst.dim(), 1, rng).normalized();
        CHECK(u(w) - mc::theta(w, t, lambda, rho, inst) >= -1e-8);
      }
    }
  }

  TEST_CASE("BSUM step does not increase the augmented Lagrangian") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 100; ++rep) {
      const auto inst = mc::random_instance(4, 2, 2, 10.0, 200 + rep);
      const auto z = mc::initial_iterate(inst, rep);
      const RealVector lambda = gauss(inst.num_users, 1, rng);
      const double rho = uniform(rng, 0.2, 3.0);
      const double before = mc::augmented_lagrangian(z, lambda, rho, inst);
      const double after = mc::augmented_lagrangian(mc::bsum_inner_step(z, lambda, rho, inst), lambda, rho, inst);
      CHECK(after <= before + 1e-9 * (1.0 + std::abs(before)));
    }
  }

  TEST_CASE("BSUM fixed point is preserved up to phase") {
    const auto inst = mc::random_instance(3, 2, 1, 10.0, 9);
    auto z = mc::initial_iterate(inst, 9);
    const RealVector lambda = RealVector::Constant(inst.num_users, 0.1);
    for (int s = 0; s < 3000; ++s) z = mc::bsum_inner_step(z, lambda, 1.0, inst);
    const auto next = mc::bsum_inner_step(z, lambda, 1.0, inst);
    CHECK(std::abs(next.w.dot(z.w)) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK((next.t - z.t).norm() < 1e-6);
  }

  TEST_CASE("strong penalty pins t to the ratio") {
    std::mt19937_64 rng(10);
    const auto inst = mc::random_instance(4, 2, 2, 10.0, 10);
    mc::MulticastIterate z{cgauss(inst.dim(), 1, rng).normalized(), RealVector::Ones(inst.num_users)};
    const RealVector zero = RealVector::Zero(inst.num_users);
    mc::update_t(z, zero, 1e-6, inst);
    for (int k = 0; k < inst.num_users; ++k) {
      const double target = mc::a_norm(z.w, inst, k) / mc::b_norm(z.w, inst, k);
      CHECK(std::abs(z.t(k) - target) < 1e-4 * (1.0 + target));
    }
  }

  TEST_CASE("single user reaches the generalized-eigenvalue optimum") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto inst = mc::random_instance(4, 1, 1, 10.0, seed);
      const auto r = mc::solve(inst, mc::default_config(inst));
      CHECK(r.min_rate_bits >= 0.99 * gen_eig_optimum(inst));
      CHECK(r.kkt_residual <= 1e-3);
    }
  }

  TEST_CASE("default config reaches the feasibility tolerance on (4,2,1)") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto inst = mc::random_instance(4, 2, 1, 10.0, seed);
      const auto r = mc::solve(inst, mc::default_config(inst));
      CHECK(r.converged);
      CHECK(r.feasibility_gap <= 1e-4);
      double power = 0.0;
      for (const auto& b : r.beamformers) power += b.squaredNorm();
      CHECK(std::abs(power - inst.p_bs) <= 1e-8);
    }
  }

  TEST_CASE("KKT residual") {
    const auto inst = mc::random_instance(4, 1, 1, 10.0, 3);
    Eigen::GeneralizedSelfAdjointEigenSolver<ComplexMatrix> ges(inst.a[0], inst.b[0]);
    const ComplexVector w = ges.eigenvectors().col(inst.dim() - 1).normalized();
    CHECK(mc::kkt_residual(w, inst) <= 1e-6);
    std::mt19937_64 rng(11);
    CHECK(mc::kkt_residual(cgauss(inst.dim(), 1, rng).normalized(), inst) >= 0.0);
  }

  TEST_CASE("KKT residual with two users matches a grid over the 1-simplex") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 5; ++rep) {
      const auto inst = mc::random_instance(3, 1, 2, 10.0, 300 + rep);
      const ComplexVector w = cgauss(inst.dim(), 1, rng).normalized();
      const double res = mc::kkt_residual(w, inst);
      double best = 1e300, slope = 0.0;
      for (int i = 0; i <= 1000; ++i) {
        RealVector lam(2);
        lam << i * 1e-3, 1.0 - i * 1e-3;
        best = std::min(best, mc::kkt_objective(w, inst, lam));
      }
      RealVector e0(2), e1(2);
      e0 << 1, 0;
      e1 << 0, 1;
      slope = mc::kkt_objective(w, inst, e0) + mc::kkt_objective(w, inst, e1);
      CHECK(res <= best + 1e-9);
      CHECK(best - res <= 1e-3 * slope);
    }
  }
}
