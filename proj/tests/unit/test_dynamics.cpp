#include "gtrace/dynamics.hpp"

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

}  // namespace

TEST(Integrate, HarmonicReturnsAfterPeriod) {
  const auto ho = make_builtin("ho1d");
  const double E = 1.7;
  const Vec a0 = vec({std::sqrt(E), 0.0});
  const auto tr = integrate(ho, a0, kPi);
  EXPECT_LT((tr.final_state() - a0).norm(), 1e-9);
  EXPECT_NEAR(tr.action_pq.back(), kPi * E, 1e-9);
  EXPECT_NEAR(tr.action_S(tr.size() - 1), 0.0, 1e-9);
}

TEST(Integrate, ZeroTime) {
  const auto sys = make_builtin("quartic1d");
  const auto r = integrate_with_jacobi(sys, vec({0.3, 0.4}), 0.0);
  ASSERT_EQ(r.trajectory.size(), 1u);
  EXPECT_EQ(r.trajectory.action_S(0), 0.0);
  EXPECT_EQ(r.trajectory.action_delta(0), 0.0);
  EXPECT_EQ(r.flow.F[0], Mat::Identity(2, 2));
  EXPECT_EQ(r.flow.arg_detU[0], 0.0);
  EXPECT_LT((r.flow.M(0) - kI * CMat::Identity(1, 1)).norm(), 1e-15);
}

TEST(Integrate, HarmonicClosedFormFlow) {
  const auto ho = make_builtin("ho1d");
  IntegrationOptions o;
  o.report_dt = 0.05;
  const auto r = integrate_with_jacobi(ho, vec({0.8, -0.2}), 2.0 * kPi, o);
  for (std::size_t i = 0; i < r.flow.size(); ++i) {
    const double t = r.trajectory.times[i];
    Mat F(2, 2);
    F << std::cos(2 * t), std::sin(2 * t), -std::sin(2 * t), std::cos(2 * t);
    EXPECT_LT((r.flow.F[i] - F).norm(), 1e-9);
    EXPECT_NEAR(r.flow.arg_detU[i], 2.0 * t, 1e-9);
    EXPECT_LT(std::abs(r.flow.M(i)(0, 0) - kI), 1e-9);
  }
  EXPECT_NEAR(r.trajectory.times.back(), 2.0 * kPi, 1e-15);
}

TEST(Integrate, ActionIdentityAndDelta) {
  const auto sys = make_builtin("quartic1d", {{"a", 0.5}});
  const Vec a0 = vec({0.4, 0.9});
  IntegrationOptions o;
  o.report_dt = 0.1;
  const auto tr = integrate(sys, a0, 1.3, o);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    EXPECT_NEAR(tr.action_pq[i], tr.action_S(i) + tr.times[i] * tr.energy, 1e-9);
  }
  EXPECT_EQ(tr.action_delta(0), 0.0);
}

TEST(Integrate, FlowPropertyAndReversibility) {
  for (const std::string name : {"quartic1d", "henon_heiles_bounded"}) {
    const auto sys = make_builtin(name);
    const int d = 2 * sys.dim();
    Vec a0 = Vec::Constant(d, 0.3);
    a0(0) = 0.5;
    const Vec ab = integrate(sys, a0, 1.1).final_state();
    const Vec a1 = integrate(sys, integrate(sys, a0, 0.4).final_state(), 0.7).final_state();
    EXPECT_LT((ab - a1).norm(), 1e-7) << name;
    const Vec back = integrate(sys, ab, -1.1).final_state();
    EXPECT_LT((back - a0).norm(), 1e-7) << name;
  }
}

TEST(Integrate, SymplecticDeterminantAndWidthMatrix) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (const std::string name : {"quartic1d", "ho2d_aniso", "henon_heiles_bounded"}) {
    const auto sys = make_builtin(name);
    const int d = 2 * sys.dim();
    for (int trial = 0; trial < 5; ++trial) {
      Vec a0(d);
      for (int i = 0; i < d; ++i) a0(i) = 0.6 * U(rng);
      IntegrationOptions o;
      o.report_dt = 0.05;
      const auto r = integrate_with_jacobi(sys, a0, 1.0 + trial, o);
      for (std::size_t i = 0; i < r.flow.size(); ++i) {
        EXPECT_LE(symplectic_defect(r.flow.F[i]), 1e-8);
        EXPECT_NEAR(r.flow.F[i].determinant(), 1.0, 1e-8);
        EXPECT_GT(min_eig_im_M(r.flow.M(i)), 0.0);
        const CMat M = r.flow.M(i);
        EXPECT_LT((M - M.transpose()).norm(), 1e-8);
        const cplx u = r.flow.detU(i);
        EXPECT_LT(std::abs(std::polar(1.0, r.flow.arg_detU[i]) - u / std::abs(u)), 1e-8);
      }
    }
  }
}

TEST(Integrate, BranchIndependentOfReportingGrid) {
  const auto sys = make_builtin("henon_heiles_bounded");
  const Vec a0 = vec({0.5, -0.3, 0.4, 0.6});
  IntegrationOptions coarse, fine;
  fine.report_dt = 0.01;
  fine.initial_step = 1e-4;
  const double a = integrate_with_jacobi(sys, a0, 7.0, coarse).flow.arg_detU.back();
  const double b = integrate_with_jacobi(sys, a0, 7.0, fine).flow.arg_detU.back();
  EXPECT_NEAR(a, b, 1e-7);
}

TEST(Integrate, DefectDecreasesUnderTighterTolerance) {
  const auto sys = make_builtin("quartic1d");
  IntegrationOptions loose;
  loose.rtol = loose.atol = 1e-7;
  loose.tol_E = 1e-5;
  IntegrationOptions tight;
  const Vec a0 = vec({1.0, 0.5});
  const auto rl = integrate_with_jacobi(sys, a0, 5.0, loose);
  const auto rt = integrate_with_jacobi(sys, a0, 5.0, tight);
  EXPECT_LT(symplectic_defect(rt.flow.F.back()), symplectic_defect(rl.flow.F.back()));
  EXPECT_LT(rt.trajectory.max_energy_drift, rl.trajectory.max_energy_drift + 1e-15);
}

TEST(Integrate, EnergyDriftFailure) {
  const auto sys = make_builtin("quartic1d");
  IntegrationOptions o;
  o.rtol = o.atol = 1e-3;
  o.tol_E = 1e-14;
  EXPECT_THROW(integrate(sys, vec({1.0, 1.0}), 10.0, o), IntegrationError);
}

TEST(Integrate, ObservableIntegral) {
  const auto ho = make_builtin("ho1d");
  IntegrationOptions o;
  o.observable = [](const Vec& q) { return q(0) * q(0); };
  const double E = 2.0;
  const auto tr = integrate(ho, vec({std::sqrt(E), 0}), kPi, o);
  // virial: time average of q^2 is E/2
  EXPECT_NEAR(tr.observable.back(), kPi * E / 2.0, 1e-9);
}

TEST(Integrate, RejectsBadInput) {
  const auto ho = make_builtin("ho1d");
  EXPECT_THROW(integrate(ho, vec({1, 0, 0}), 1.0), Error);
  EXPECT_THROW(integrate(ho, vec({NAN, 0}), 1.0), Error);
}
