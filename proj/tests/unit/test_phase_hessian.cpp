#include "gtrace/orbits.hpp"
#include "gtrace/phase_hessian.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gtrace;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

PeriodicOrbit mode_one(const HamiltonianSystem& sys, double E, int k) {
  EnergyShell shell(sys, E, 0.5);
  const auto prim = find_periodic_orbit(shell, vec({std::sqrt(E), 0.0, 0.0, 0.0}), kPi);
  return k == 1 ? prim : repetition(sys, prim, k);
}

}  // namespace

TEST(PhaseHessian, IdentityOnModeOneOrbit) {
  const auto sys = make_builtin("ho2d_aniso");
  for (int k : {1, -1, 2}) {
    const auto orb = mode_one(sys, 1.0, k);
    const auto r = phase_hessian_at_orbit(sys.gradient(orb.alpha0), orb.F, orb.det_P_minus_I);
    EXPECT_LT(r.symmetry_defect, 1e-8) << k;
    EXPECT_EQ(r.null_dimension, 1) << k;
    EXPECT_LT(r.null_residual, 1e-6) << k;
    EXPECT_LT(r.null_alignment, 1e-6) << k;
    EXPECT_LT(r.identity_residual, 1e-6) << k;
    EXPECT_LT(r.restricted_vs_projected, 1e-8) << k;
  }
}

TEST(PhaseHessian, ScaledSystemKeepsRatio) {
  const auto sys = make_builtin("ho2d_aniso");
  const auto o1 = mode_one(sys, 1.0, 1);
  const auto r1 = phase_hessian_at_orbit(sys.gradient(o1.alpha0), o1.F, o1.det_P_minus_I);
  const double c = 2.5;
  const auto sc = sys.scaled(c);
  EnergyShell shell(sc, c, 0.5);
  const auto o2 = find_periodic_orbit(shell, vec({1.0, 0.0, 0.0, 0.0}), kPi / c);
  EXPECT_NEAR(o2.T_star, kPi / c, 1e-9);
  const auto r2 = phase_hessian_at_orbit(sc.gradient(o2.alpha0), o2.F, o2.det_P_minus_I);
  EXPECT_LT(std::abs(r2.det_projected / r2.det_predicted - r1.det_projected / r1.det_predicted), 1e-8);
  EXPECT_GT(std::abs(r2.det_projected - r1.det_projected), 1e-3);
}

TEST(PhaseHessian, MatchesFiniteDifferenceHessianOfPhase) {
  // finite differences of Phi_E(t, y, p, q) at a point of the mode-one orbit
  const auto sys = make_builtin("ho2d_aniso");
  const double E = 1.0;
  const auto orb = mode_one(sys, E, 1);
  const int n = 2;
  IntegrationOptions io;
  auto phi = [&](const Vec& x) {
    const double t = x(0);
    const Vec y = x.segment(1, n);
    Vec alpha(2 * n);
    alpha << x.segment(1 + 2 * n, n), x.segment(1 + n, n);  // (q, p) from the (p, q) ordering
    const auto res = integrate_with_jacobi(sys, alpha, t, io);
    const Vec at = res.trajectory.final_state();
    return phase_function(E, t, y, alpha, at, res.trajectory.action_S(res.trajectory.size() - 1),
                          res.flow.M(res.flow.size() - 1));
  };
  Vec x0(1 + 3 * n);
  x0 << orb.T_star, orb.alpha0.head(n), orb.alpha0.tail(n), orb.alpha0.head(n);
  const auto r = phase_hessian_at_orbit(sys.gradient(orb.alpha0), orb.F, orb.det_P_minus_I);
  const double h = 1e-4;
  const int m = 1 + 3 * n;
  CMat fd(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      cplx acc = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          Vec x = x0;
          x(i) += si * h;
          x(j) += sj * h;
          acc += double(si * sj) * phi(x);
        }
      }
      fd(i, j) = acc / (4.0 * h * h);
    }
  }
  EXPECT_LT((fd - r.hessian).cwiseAbs().maxCoeff(), 1e-5 * r.hessian.cwiseAbs().maxCoeff());
}

TEST(PhaseHessian, ImaginaryPartIdentityAndSign) {
  const auto sys = make_builtin("ho2d_aniso");
  const double E = 1.0;
  const auto orb = mode_one(sys, E, 1);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> N(0.0, 0.3);
  std::uniform_real_distribution<double> Ut(0.0, 2.0 * kPi);
  int violations = 0;
  double worst = 0.0;
  for (int s = 0; s < 200; ++s) {
    Vec alpha = orb.alpha0;
    for (int i = 0; i < 4; ++i) alpha(i) += N(rng);
    const Vec y = alpha.head(2) + Vec::NullaryExpr(2, [&]() { return N(rng); });
    const double t = Ut(rng);
    const auto res = integrate_with_jacobi(sys, alpha, t);
    const std::size_t last = res.flow.size() - 1;
    const Vec at = res.trajectory.final_state();
    const cplx val = phase_function(E, t, y, alpha, at, res.trajectory.action_S(last), res.flow.M(last));
    const CVec w = (y - at.head(2)).cast<cplx>();
    const double rhs = 0.5 * ((y - alpha.head(2)).squaredNorm() + res.flow.U(last).partialPivLu().solve(w).squaredNorm());
    worst = std::max(worst, std::abs(val.imag() - rhs) / std::max(1.0, rhs));
    if (val.imag() < 0.0) ++violations;
  }
  EXPECT_EQ(violations, 0);
  EXPECT_LT(worst, 1e-8);
}

TEST(PhaseHessian, HarmonicOneDimensionalIdentity) {
  const auto sys = make_builtin("ho1d");
  EnergyShell shell(sys, 1.0, 0.5);
  const auto orb = find_periodic_orbit(shell, vec({1.0, 0.0}), kPi);
  const auto r = phase_hessian_at_orbit(sys.gradient(orb.alpha0), orb.F, orb.det_P_minus_I);
  EXPECT_EQ(r.null_dimension, 1);
  EXPECT_LT(r.identity_residual, 1e-8);
}
