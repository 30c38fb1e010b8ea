#include "gtrace/hamiltonians.hpp"

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

TEST(Symplectic, JSquaredIsMinusIdentity) {
  for (int n : {1, 2, 3}) {
    const Mat J = symplectic_matrix(n);
    EXPECT_LT((J * J + Mat::Identity(2 * n, 2 * n)).norm(), 1e-15);
  }
}

TEST(Symplectic, FormMatchesMatrixOnBasisVectors) {
  const int n = 2;
  const Mat J = symplectic_matrix(n);
  for (int i = 0; i < 2 * n; ++i) {
    for (int j = 0; j < 2 * n; ++j) {
      const Vec a = Vec::Unit(2 * n, i), b = Vec::Unit(2 * n, j);
      EXPECT_DOUBLE_EQ(symplectic_form(a, b), a.dot(-J * b));
    }
  }
  // sigma((q,p),(q',p')) = p.q' - p'.q
  EXPECT_DOUBLE_EQ(symplectic_form(vec({0, 1}), vec({1, 0})), 1.0);
}

TEST(Symplectic, DefectExamples) {
  EXPECT_EQ(symplectic_defect(Mat::Identity(2, 2)), 0.0);
  EXPECT_EQ(symplectic_defect(symplectic_matrix(2)), 0.0);
  EXPECT_DOUBLE_EQ(symplectic_defect(2.0 * Mat::Identity(2, 2)), 3.0);
  EXPECT_THROW(symplectic_defect(Mat::Identity(3, 3)), Error);
}

TEST(PhaseSpacePoint, Invariants) {
  EXPECT_THROW(PhaseSpacePoint(vec({1, 2}), vec({1})), Error);
  EXPECT_THROW(PhaseSpacePoint(Vec(0), Vec(0)), Error);
  EXPECT_THROW(PhaseSpacePoint(vec({NAN}), vec({1})), Error);
  const PhaseSpacePoint a(vec({1, 2}), vec({3, 4}));
  EXPECT_EQ(a.dim(), 2);
  EXPECT_EQ(a.vector(), vec({1, 2, 3, 4}));
}

TEST(Builtins, DirectSubstitution) {
  const auto ho = make_builtin("ho1d");
  EXPECT_DOUBLE_EQ(ho.energy(vec({1, 0})), 1.0);
  EXPECT_EQ(ho.gradient(vec({1, 0})), vec({2, 0}));

  const auto ho2 = make_builtin("ho2d_aniso", {{"omega", 1.6180339887}});
  EXPECT_DOUBLE_EQ(ho2.energy(vec({1, 0, 0, 0})), 1.0);

  const auto qu = make_builtin("quartic1d");
  EXPECT_DOUBLE_EQ(qu.energy(vec({1, 1})), 2.0);
  Mat expect(2, 2);
  expect << 12, 0, 0, 2;
  EXPECT_EQ(qu.hessian(vec({1, 1})), expect);
}

TEST(Builtins, InvalidParameters) {
  EXPECT_THROW(make_builtin("nope"), Error);
  EXPECT_THROW(make_builtin("ho2d_aniso", {{"omega", 0.0}}), Error);
  EXPECT_THROW(make_builtin("ho2d_aniso", {{"omega", -1.0}}), Error);
  EXPECT_THROW(make_builtin("henon_heiles_bounded", {{"mu", 0.0}}), Error);
  EXPECT_THROW(make_builtin("ho1d", {{"a", 1.0}}), Error);
}

TEST(Builtins, AnalyticDerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (const std::string name : {"ho1d", "quartic1d", "ho2d_aniso", "henon_heiles_bounded"}) {
    const auto sys = make_builtin(name);
    const int d = 2 * sys.dim();
    for (int trial = 0; trial < 100; ++trial) {
      Vec z(d);
      for (int i = 0; i < d; ++i) z(i) = U(rng);
      const auto fdg = finite_difference_derivatives([&](const Vec& x) { return sys.energy(x); }, z, 1e-5);
      const auto fdh = finite_difference_derivatives([&](const Vec& x) { return sys.energy(x); }, z, 1e-3);
      const Vec g = sys.gradient(z);
      const Mat h = sys.hessian(z);
      EXPECT_LE((fdg.grad - g).norm(), 1e-5 * std::max(1.0, g.norm())) << name;
      EXPECT_LE((fdh.hess - h).norm(), 1e-5 * std::max(1.0, h.norm())) << name;
      EXPECT_LE((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, h.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Builtins, HarmonicHessianIsConstant) {
  const auto sys = make_builtin("ho2d_aniso");
  const Mat h0 = sys.hessian(Vec::Zero(4));
  EXPECT_EQ(sys.hessian(vec({0.3, -1, 2, 0.1})), h0);
}

TEST(FiniteDifferences, Oracles) {
  const auto ho = make_builtin("ho1d");
  const auto r = finite_difference_derivatives([&](const Vec& z) { return ho.energy(z); }, vec({1, 0}), 1e-5);
  EXPECT_NEAR(r.grad(0), 2.0, 1e-8);
  EXPECT_NEAR(r.grad(1), 0.0, 1e-8);

  const auto c = finite_difference_derivatives([](const Vec&) { return 3.0; }, vec({1, 2}), 1e-5);
  EXPECT_EQ(c.grad.norm(), 0.0);
  EXPECT_EQ(c.hess.norm(), 0.0);

  Mat S(2, 2);
  S << 2.0, 0.5, 0.5, -1.0;
  const auto qf = finite_difference_derivatives([&](const Vec& z) { return 0.5 * z.dot(S * z); }, vec({0.2, -0.4}), 1e-3);
  EXPECT_LT((qf.hess - S).norm(), 1e-9);

  EXPECT_THROW(finite_difference_derivatives([](const Vec&) { return NAN; }, vec({0, 0}), 1e-5), Error);
  EXPECT_THROW(finite_difference_derivatives([](const Vec&) { return 1.0; }, vec({0, 0}), 0.0), Error);
}

TEST(HamiltonianSystem, FromEnergyUsesFiniteDifferences) {
  const auto sys = HamiltonianSystem::from_energy(
      1, [](const Vec& z) { return z(1) * z(1) + std::cos(z(0)); }, {"cosine", {}});
  const Vec z = vec({0.7, 0.3});
  EXPECT_NEAR(sys.gradient(z)(0), -std::sin(0.7), 1e-8);
  EXPECT_NEAR(sys.hessian(z)(0, 0), -std::cos(0.7), 1e-6);
  EXPECT_FALSE(sys.is_mechanical());
}

TEST(HamiltonianSystem, ScaledSystem) {
  const auto sys = make_builtin("quartic1d").scaled(2.5);
  EXPECT_DOUBLE_EQ(sys.energy(vec({1, 1})), 5.0);
  EXPECT_DOUBLE_EQ(sys.descriptor().params.at("scale"), 2.5);
}
