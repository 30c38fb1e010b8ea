#include "gtrace/orbits.hpp"

#include <gtest/gtest.h>

using namespace gtrace;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

const double kOmega = kGoldenRatio;

EnergyShell ho2d_shell(double E = 1.0) { return {make_builtin("ho2d_aniso"), E, 0.5}; }

}  // namespace

TEST(Orbits, HarmonicPrimitiveOrbit) {
  const double E = 1.3;
  EnergyShell shell(make_builtin("ho1d"), E, 0.5);
  const auto orb = find_periodic_orbit(shell, vec({0.9, 0.6}), 3.0);
  EXPECT_NEAR(orb.T_star, kPi, 1e-9);
  EXPECT_NEAR(orb.S, kPi * E, 1e-8);
  EXPECT_NEAR(orb.E, E, 1e-10);
  EXPECT_EQ(orb.maslov, 2);
  EXPECT_EQ(orb.poincare_eigs.size(), 0);
  EXPECT_EQ(orb.det_I_minus_P, 1.0);
  EXPECT_LE(orb.closure_residual, 1e-8);
  EXPECT_LE(orb.monodromy_defect, 1e-8);
}

TEST(Orbits, ExactSeedConvergesImmediately) {
  EnergyShell shell(make_builtin("ho1d"), 1.0, 0.5);
  const auto orb = find_periodic_orbit(shell, vec({1.0, 0.0}), kPi);
  EXPECT_LE(orb.newton_iterations, 2);
}

TEST(Orbits, HarmonicRepetitionsAreAdditive) {
  const double E = 1.0;
  EnergyShell shell(make_builtin("ho1d"), E, 0.5);
  const auto prim = find_periodic_orbit(shell, vec({1.0, 0.0}), kPi);
  for (int k : {-3, -2, -1, 1, 2, 3}) {
    const auto o = repetition(shell.system, prim, k);
    EXPECT_EQ(o.maslov, 2 * k) << k;
    EXPECT_NEAR(o.S, k * kPi * E, 1e-8) << k;
    EXPECT_NEAR(o.T(), k * kPi, 1e-12);
  }
}

TEST(Orbits, PeriodDoubledGuessReducesToPrimitive) {
  EnergyShell shell(make_builtin("ho1d"), 1.0, 0.5);
  const auto orb = find_periodic_orbit(shell, vec({1.0, 0.0}), 2.0 * kPi);
  EXPECT_NEAR(orb.T_star, kPi, 1e-9);
}

TEST(Orbits, AnisotropicModeOneMonodromy) {
  auto shell = ho2d_shell();
  const auto orb = find_periodic_orbit(shell, vec({1.0, 0.0, 0.0, 0.0}), 3.0);
  EXPECT_NEAR(orb.T_star, kPi, 1e-9);
  const double expect = 4.0 * std::pow(std::sin(kOmega * kPi), 2);
  EXPECT_NEAR(orb.det_I_minus_P / expect, 1.0, 1e-6);
  EXPECT_NEAR(orb.det_I_minus_P, orb.det_I_minus_P_eigs, 1e-8);
  ASSERT_EQ(orb.poincare_eigs.size(), 2);
  cplx prod = 1.0;
  for (Eigen::Index i = 0; i < 2; ++i) {
    EXPECT_NEAR(std::abs(orb.poincare_eigs(i)), 1.0, 1e-6);
    // rotation by 2 omega pi
    EXPECT_NEAR(std::abs(std::cos(std::arg(orb.poincare_eigs(i))) - std::cos(2.0 * kOmega * kPi)), 0.0, 1e-6);
    prod *= orb.poincare_eigs(i);
  }
  EXPECT_NEAR(std::abs(prod - 1.0), 0.0, 1e-6);
  EXPECT_TRUE(orb.nondegenerate);
  EXPECT_EQ(orb.sigma_prime, 0);
  EXPECT_LE(((orb.F - Mat::Identity(4, 4)) * orb.z1).norm(), 1e-6);
  EXPECT_LE(((orb.F - Mat::Identity(4, 4)) * orb.z2 - orb.beta * orb.z1).norm(), 1e-6);
}

TEST(Orbits, ReversedTraversalInvertsSpectrum) {
  auto shell = ho2d_shell();
  const auto prim = find_periodic_orbit(shell, vec({1.0, 0.0, 0.0, 0.0}), kPi);
  const auto back = repetition(shell.system, prim, -1);
  EXPECT_NEAR(back.det_I_minus_P, prim.det_I_minus_P, 1e-8);
  EXPECT_NEAR(back.S, -prim.S, 1e-9);
  EXPECT_LT((back.F * prim.F - Mat::Identity(4, 4)).norm(), 1e-8);
  for (Eigen::Index i = 0; i < 2; ++i) {
    const cplx inv = 1.0 / prim.poincare_eigs(i);
    double best = 1e9;
    for (Eigen::Index j = 0; j < 2; ++j) best = std::min(best, std::abs(back.poincare_eigs(j) - inv));
    EXPECT_LT(best, 1e-6);
  }
  EXPECT_EQ(back.maslov, -prim.maslov);
}

TEST(Orbits, SpectrumIndependentOfBasePoint) {
  auto shell = ho2d_shell();
  const auto prim = find_periodic_orbit(shell, vec({1.0, 0.0, 0.0, 0.0}), kPi);
  const Vec shifted = integrate(shell.system, prim.alpha0, 0.7).final_state();
  const auto other = build_orbit(shell.system, shifted, prim.T_star, 1);
  EXPECT_NEAR(other.det_I_minus_P, prim.det_I_minus_P, 1e-6);
  for (Eigen::Index i = 0; i < 2; ++i) {
    double best = 1e9;
    for (Eigen::Index j = 0; j < 2; ++j) best = std::min(best, std::abs(other.poincare_eigs(j) - prim.poincare_eigs(i)));
    EXPECT_LT(best, 1e-6);
  }
}

TEST(Orbits, MaslovPhaseIsFourthRootAndRoutesAgree) {
  auto shell = ho2d_shell();
  const auto prim = find_periodic_orbit(shell, vec({1.0, 0.0, 0.0, 0.0}), kPi);
  for (int k : {-2, -1, 1, 2}) {
    const auto o = repetition(shell.system, prim, k);
    EXPECT_LT(std::abs(o.maslov_phase - std::pow(kI, ((o.maslov % 4) + 4) % 4)), 1e-6);
    EXPECT_LT(std::abs(o.maslov_phase - o.maslov_phase_scalar), 1e-6) << k;
  }
}

TEST(Orbits, FourthRootAndLift) {
  EXPECT_EQ(fourth_root_index(cplx(-1, 1e-9)), 2);
  EXPECT_EQ(fourth_root_index(cplx(0, -2)), 3);
  EXPECT_THROW(fourth_root_index(std::polar(1.0, 0.3)), BranchError);
  EXPECT_EQ(lift_mod4(2, 2.0), 2);
  EXPECT_EQ(lift_mod4(2, -2.0), -2);
  EXPECT_EQ(lift_mod4(3, 5.164), 7);
  EXPECT_EQ(lift_mod4(0, 0.0), 0);
  EXPECT_EQ(lift_mod4(0, 2.0), 4);   // tie: away from zero
  EXPECT_EQ(lift_mod4(0, -2.0), -4);
}

TEST(Orbits, EnumerateHarmonic) {
  EnergyShell shell(make_builtin("ho1d"), 1.0, 0.5);
  const auto res = enumerate_orbits(shell, 3.5, {{vec({1.0, 0.0}), 3.0}, {vec({0.0, 1.0}), 3.2}});
  ASSERT_EQ(res.primitives.size(), 1u);
  ASSERT_EQ(res.orbits.size(), 2u);
  EXPECT_EQ(res.orbits[0].k, 1);
  EXPECT_EQ(res.orbits[1].k, -1);
}

TEST(Orbits, EnumerateAnisotropic) {
  auto shell = ho2d_shell();
  const auto res = enumerate_orbits(shell, 4.0,
                                    {{vec({1.0, 0.0, 0.0, 0.0}), kPi}, {vec({0.0, 1.0 / kOmega, 0.0, 0.0}), 2.0}});
  ASSERT_EQ(res.primitives.size(), 2u);
  EXPECT_NEAR(res.primitives[0].T_star, kPi / kOmega, 1e-9);
  EXPECT_NEAR(res.primitives[1].T_star, kPi, 1e-9);
  std::vector<int> ks;
  for (const auto& o : res.orbits) {
    EXPECT_LE(std::abs(o.T()), 4.0);
    ks.push_back(o.k);
  }
  EXPECT_EQ(ks, (std::vector<int>{1, -1, 2, -2, 1, -1}));
}

TEST(Orbits, EnumerateEmpty) {
  EnergyShell shell(make_builtin("ho1d"), 1.0, 0.5);
  const auto res = enumerate_orbits(shell, 1.0, {{vec({1.0, 0.0}), kPi}});
  EXPECT_TRUE(res.orbits.empty());
  const auto none = enumerate_orbits(shell, 3.5, {});
  EXPECT_TRUE(none.orbits.empty());
  EXPECT_FALSE(none.warnings.empty());
}

TEST(Orbits, RecurrenceScanFindsHarmonicOrbit) {
  EnergyShell shell(make_builtin("ho1d"), 1.0, 0.5);
  RecurrenceScan scan;
  scan.enabled = true;
  scan.samples = 3;
  const auto res = enumerate_orbits(shell, 3.5, {}, {}, scan);
  ASSERT_EQ(res.primitives.size(), 1u);
  EXPECT_NEAR(res.primitives[0].T_star, kPi, 1e-9);
}

TEST(Orbits, QuarticActionDerivativeIsPeriod) {
  const auto sys = make_builtin("quartic1d");
  const double E = 1.0, h = 1e-4;
  auto orbit_at = [&](double e) {
    EnergyShell shell(sys, e, 0.5);
    return find_periodic_orbit(shell, vec({std::pow(e, 0.25), 0.0}), 2.0);
  };
  const auto o = orbit_at(E);
  const double dS = (orbit_at(E + h).S - orbit_at(E - h).S) / (2.0 * h);
  EXPECT_NEAR(dS / o.T_star, 1.0, 1e-6);
  EXPECT_EQ(o.maslov, 2);
}

TEST(Orbits, NewtonFailureIsReported) {
  EnergyShell shell(make_builtin("ho1d"), 1.0, 0.5);
  OrbitOptions o;
  o.max_iter = 0;
  EXPECT_THROW(find_periodic_orbit(shell, vec({3.0, 0.4}), 1.0, o), ConvergenceError);
  EXPECT_THROW(find_periodic_orbit(shell, vec({0.0, 0.0}), 1.0), Error);
}
