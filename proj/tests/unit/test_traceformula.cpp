#include "gtrace/traceformula.hpp"

#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>

using namespace gtrace;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

std::vector<PeriodicOrbit> ho1d_orbits(double E, double T) {
  const EnergyShell sh(make_builtin("ho1d"), E, 0.5);
  return enumerate_orbits(sh, T, {{vec({std::sqrt(E), 0.0}), 3.0}}).orbits;
}

// Poisson-summed bump train: sum over all integers k of g((E - hbar(2k+1))/hbar)
double poisson_train(const SpectralWindow& w, double E, double hbar) {
  double acc = 0.0;
  for (int k = -400; k <= 400; ++k) acc += w.g((E - hbar * (2 * k + 1)) / hbar);
  return acc;
}

}  // namespace

TEST(Liouville, HarmonicPeriodAndObservable) {
  const auto sys = make_builtin("ho1d");
  EXPECT_NEAR(liouville_integral(sys, 1.0), kPi, 1e-10);
  EXPECT_NEAR(liouville_integral(sys, 2.3), kPi, 1e-10);
  // virial: time average of q^2 over the orbit is E/2
  EXPECT_NEAR(liouville_integral(sys, 1.0, [](const Vec& q) { return q(0) * q(0); }), kPi / 2.0, 1e-10);
  EXPECT_EQ(liouville_integral(sys, 1.0, [](const Vec&) { return 0.0; }), 0.0);
}

TEST(Liouville, QuarticEqualsOrbitPeriod) {
  const auto sys = make_builtin("quartic1d");
  const EnergyShell sh(sys, 1.0, 0.5);
  const auto orb = find_periodic_orbit(sh, vec({1.0, 0.0}), 2.5);
  EXPECT_NEAR(liouville_integral(sys, 1.0), orb.T_star, 1e-8 * orb.T_star);
}

TEST(Liouville, AnisotropicEllipse) {
  const auto sys = make_builtin("ho2d_aniso");
  const double om = kGoldenRatio;
  for (double E : {0.5, 1.0}) {
    EXPECT_NEAR(liouville_integral(sys, E), kPi * kPi * E / om, 1e-8 * E);
    const double q1sq = liouville_integral(sys, E, [](const Vec& q) { return q(0) * q(0); });
    EXPECT_NEAR(q1sq, kPi * kPi * E * E / (4.0 * om), 1e-8);
  }
}

TEST(Weyl, PrefactorsAndScaling) {
  const SpectralWindow w(3.5, 1.0, 0.5);
  EXPECT_NEAR(weyl_term(make_builtin("ho1d"), w, 0.05, 1.0), 0.5, 1e-10);
  EXPECT_NEAR(weyl_term(make_builtin("ho1d"), w, 0.02, 1.0), 0.5, 1e-10);
  const auto ho2 = make_builtin("ho2d_aniso");
  const double a = weyl_term(ho2, w, 0.05, 1.0), b = weyl_term(ho2, w, 0.1, 1.0);
  EXPECT_NEAR(a / b, 2.0, 1e-12);
  EXPECT_NEAR(a, kPi * kPi / kGoldenRatio / (4.0 * kPi * kPi * 0.05), 1e-8);
  EXPECT_EQ(weyl_term(ho2, w, 0.05, 1.0, [](const Vec&) { return 0.0; }), 0.0);
}

TEST(OrbitTerm, HarmonicPrimitive) {
  const double E = 1.0, hbar = 0.05;
  const SpectralWindow w(3.5, E, 0.5);
  const auto orbits = ho1d_orbits(E, 3.5);
  ASSERT_EQ(orbits.size(), 2u);
  const auto& o = orbits[0];
  ASSERT_EQ(o.k, 1);
  const cplx expect = w.ghat(kPi) / (2.0 * kPi) * std::polar(1.0, kPi * E / hbar + kPi) * kPi;
  EXPECT_LT(std::abs(orbit_term(o, w, hbar) - expect), 1e-8);
  EXPECT_LT(std::abs(orbit_term(orbits[1], w, hbar) - std::conj(expect)), 1e-8);
  const SpectralWindow narrow(3.0, E, 0.5);
  EXPECT_EQ(orbit_term(o, narrow, hbar), 0.0);
}

TEST(OrbitTerm, DegenerateRejectedAndAnisotropicDeterminant) {
  PeriodicOrbit bad;
  bad.nondegenerate = false;
  EXPECT_THROW(orbit_term(bad, SpectralWindow(3.5, 1.0, 0.5), 0.05), DegenerateOrbitError);

  const double om = kGoldenRatio;
  const auto sys = make_builtin("ho2d_aniso");
  const EnergyShell sh(sys, 1.0, 0.5);
  const auto orb = find_periodic_orbit(sh, vec({1.0, 0.0, 0.0, 0.0}), kPi);
  const auto d = term_data(orb);
  EXPECT_NEAR(1.0 / std::sqrt(d.det_I_minus_P), 1.0 / (2.0 * std::abs(std::sin(om * kPi))), 1e-7);
  EXPECT_NEAR(detail::det_I_minus_Pk(orb.poincare_eigs, 2), repetition(sys, orb, 2).det_I_minus_P, 1e-7);
  EXPECT_NEAR(detail::det_I_minus_Pk(orb.poincare_eigs, -1), repetition(sys, orb, -1).det_I_minus_P, 1e-7);
}

TEST(Semiclassical, HarmonicIsPoissonExact) {
  for (double hbar : {0.05, 0.02}) {
    const SpectralWindow w(3.5, 1.0, 0.5);
    const EnergyShell sh(make_builtin("ho1d"), 1.0, 0.5);
    const auto grid = linspace(0.8, 1.2, 41);
    const auto r = semiclassical_rho(sh, w, ho1d_orbits(1.0, 3.5), hbar, grid);
    EXPECT_TRUE(r.warnings.empty());
    EXPECT_LT(r.imag_residue, 1e-10);
    for (std::size_t e = 0; e < grid.size(); ++e) EXPECT_NEAR(r.rho_total[e], poisson_train(w, grid[e], hbar), 1e-8);
  }
}

TEST(Semiclassical, AssemblyIdentityAndPureWeyl) {
  const double hbar = 0.05;
  const SpectralWindow w(7.0, 1.0, 0.5);
  const EnergyShell sh(make_builtin("ho1d"), 1.0, 0.5);
  const auto grid = linspace(0.9, 1.1, 21);
  const auto r = semiclassical_rho(sh, w, ho1d_orbits(1.0, 7.0), hbar, grid);
  ASSERT_EQ(r.terms.size(), 4u);
  for (std::size_t e = 0; e < grid.size(); ++e) {
    double s = r.weyl[e];
    for (const auto& t : r.terms)
      if (t.k > 0) s += 2.0 * t.values[e].real();
    EXPECT_NEAR(r.rho_total[e], s, 1e-12);
  }
  const auto bare = semiclassical_rho(sh, w, {}, hbar, grid);
  for (std::size_t e = 0; e < grid.size(); ++e) EXPECT_DOUBLE_EQ(bare.rho_total[e], bare.weyl[e]);
}

TEST(Semiclassical, BohrSommerfeldPeaks) {
  const double hbar = 0.05;
  const EnergyShell sh(make_builtin("ho1d"), 1.0, 0.5);
  const auto grid = linspace(0.75, 1.25, 401);
  for (double T : {3.5, 7.0}) {
    const SpectralWindow w(T, 1.0, 0.5);
    const auto r = semiclassical_rho(sh, w, ho1d_orbits(1.0, T), hbar, grid);
    const auto peaks = peak_positions(grid, r.rho_total);
    ASSERT_EQ(peaks.size(), 4u) << T;
    for (std::size_t i = 0; i < peaks.size(); ++i) EXPECT_NEAR(peaks[i], 0.85 + 0.1 * i, 1e-3) << T;
  }
}

TEST(Semiclassical, MissingPartnerAndContinuation) {
  const double hbar = 0.05;
  const SpectralWindow w(3.5, 1.0, 0.5);
  const EnergyShell sh(make_builtin("ho1d"), 1.0, 0.5);
  const auto grid = linspace(0.9, 1.1, 11);
  auto orbits = ho1d_orbits(1.0, 3.5);
  const auto full = semiclassical_rho(sh, w, orbits, hbar, grid);
  TraceOptions fo;
  fo.continuation = EnergyContinuation::first_order;
  const auto lin = semiclassical_rho(sh, w, orbits, hbar, grid, nullptr, fo);
  for (std::size_t e = 0; e < grid.size(); ++e) EXPECT_NEAR(full.rho_total[e], lin.rho_total[e], 1e-9);
  orbits.pop_back();
  const auto half = semiclassical_rho(sh, w, orbits, hbar, grid);
  EXPECT_GT(half.imag_residue, 1e-3);
  EXPECT_FALSE(half.warnings.empty());
}

TEST(Semiclassical, QuarticActionDerivative) {
  const auto sys = make_builtin("quartic1d");
  const EnergyShell sh(sys, 1.0, 0.5);
  const SpectralWindow w(3.5, 1.0, 0.5);
  const auto en = enumerate_orbits(sh, 3.5, {{vec({1.0, 0.0}), 2.5}});
  ASSERT_EQ(en.primitives.size(), 1u);
  const auto r = semiclassical_rho(sh, w, en.orbits, 0.05, linspace(0.8, 1.2, 81));
  EXPECT_LT(r.dSdE_defect, 1e-4);
  EXPECT_LT(r.imag_residue, 1e-10);
}

TEST(Semiclassical, CoverageWarning) {
  const SpectralWindow w(3.5, 1.0, 0.5);
  const EnergyShell sh(make_builtin("ho1d"), 1.0, 0.5);
  TraceOptions o;
  o.coverage_scan.enabled = true;
  o.coverage_scan.samples = 2;
  const auto r = semiclassical_rho(sh, w, {}, 0.05, {1.0}, nullptr, o);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings.back().find("absent"), std::string::npos);
  const auto ok = semiclassical_rho(sh, w, ho1d_orbits(1.0, 3.5), 0.05, {1.0}, nullptr, o);
  EXPECT_TRUE(ok.warnings.empty());
}

TEST(Coherent, HarmonicHusimiWeights) {
  // for quadratic H the leading overlap is exact, so the route reproduces
  // sum_k w_k g((E - E_k)/hbar) with w_k = int chi(2 hbar u)^2 u^k e^{-u}/k! du
  const double hbar = 0.05;
  const SpectralWindow w(3.5, 1.0, 0.5);
  const auto grid = linspace(0.9, 1.1, 9);
  const auto r = rho_via_coherent_states(make_builtin("ho1d"), w, hbar, grid);
  EXPECT_LT(r.imag_residue, 1e-8);
  std::vector<double> wk(60);
  for (int k = 0; k < 60; ++k) {
    double acc = 0.0;
    const double umax = 1.5 / (2.0 * hbar);
    const int m = 20000;
    for (int i = 1; i < m; ++i) {
      const double u = umax * i / m;
      acc += std::pow(w.chi(2.0 * hbar * u), 2) * boost::math::gamma_p_derivative(k + 1.0, u);
    }
    wk[k] = acc * umax / m;
  }
  std::vector<double> oracle(grid.size(), 0.0);
  for (std::size_t e = 0; e < grid.size(); ++e)
    for (int k = 0; k < 60; ++k) oracle[e] += wk[k] * w.g((grid[e] - hbar * (2 * k + 1)) / hbar);
  EXPECT_LT(relative_linf(grid, r.rho, oracle), 5e-3);
}

TEST(Peaks, ParabolicRefinement) {
  const auto x = linspace(0.0, 1.0, 51);
  std::vector<double> y;
  for (double v : x) y.push_back(-std::pow(v - 0.4137, 2));
  for (auto& v : y) v += 1.0;
  const auto p = peak_positions(x, y);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NEAR(p[0], 0.4137, 1e-12);
  EXPECT_NEAR(relative_linf(x, y, y), 0.0, 0.0);
}
