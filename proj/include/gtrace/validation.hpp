// The invariant suite shared by `gtrace validate` and the acceptance binary.
#pragma once

#include "gtrace/core.hpp"
#include "gtrace/dynamics.hpp"
#include "gtrace/hamiltonians.hpp"
#include "gtrace/io.hpp"
#include "gtrace/orbits.hpp"
#include "gtrace/oscillatory.hpp"
#include "gtrace/quantum_oracle.hpp"
#include "gtrace/symplectic.hpp"
#include "gtrace/traceformula.hpp"
#include "gtrace/wavepackets.hpp"
#include "gtrace/window.hpp"

#include <chrono>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace gtrace {

struct ValidationContext {
  unsigned seed = 0;
  int maslov_shift = 0;  // added to the primitive sigma of every ho1d orbit (mutation testing)
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  json metrics = json::object();
};

namespace detail {

inline std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

/// ho1d orbits up to period T, with sigma_k = k (sigma_1 + shift) for the mutation test.
inline std::vector<PeriodicOrbit> ho1d_orbits(double E, double T, int maslov_shift) {
  const EnergyShell sh(make_builtin("ho1d"), E, 0.5);
  auto orbits = enumerate_orbits(sh, T, {{vec2(std::sqrt(E), 0.0), 3.0}}).orbits;
  for (auto& o : orbits) o.maslov += maslov_shift * o.k;
  return orbits;
}

/// Largest |a_i - b_i| over peaks paired in order; infinity when the counts differ.
inline double peak_offset(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace detail

/// 1. F^T J F = J along 100 random shell trajectories per system up to t = 7, energy drift.
inline CheckResult check_symplecticity(const ValidationContext& ctx) {
  CheckResult r{"symplecticity"};
  const double t_end = 7.0;  // 2 T_max with T_max = 3.5
  double worst_defect = 0.0, worst_drift = 0.0;
  int runs = 0;
  std::mt19937_64 rng(ctx.seed);
  for (const char* name : {"ho1d", "quartic1d", "ho2d_aniso"}) {
    const EnergyShell shell(make_builtin(name), 1.0, 0.5);
    IntegrationOptions io;
    io.report_dt = 0.25;
    for (int s = 0; s < 100; ++s) {
      const auto z0 = detail::random_shell_point(shell, rng);
      if (!z0) throw Error("symplecticity: no shell point for " + std::string(name));
      const auto fr = integrate_with_jacobi(shell.system, *z0, t_end, io);
      for (const auto& F : fr.flow.F) worst_defect = std::max(worst_defect, symplectic_defect(F));
      worst_drift = std::max(worst_drift, fr.trajectory.max_energy_drift);
      ++runs;
    }
  }
  r.passed = worst_defect <= 1e-8 && worst_drift <= 1e-9;
  r.detail = std::to_string(runs) + " trajectories, max |F^T J F - J| = " + detail::fmt(worst_defect) +
             ", max energy drift = " + detail::fmt(worst_drift);
  r.metrics = {{"trajectories", runs}, {"max_symplectic_defect", worst_defect}, {"max_energy_drift", worst_drift}};
  return r;
}

/// 2. ho2d_aniso mode-1 orbit: |det(I - P)| = 4 sin^2(omega pi), Poincare spectrum on the unit circle.
inline CheckResult check_monodromy(const ValidationContext&) {
  CheckResult r{"monodromy"};
  const auto sys = make_builtin("ho2d_aniso");
  const double omega = sys.descriptor().params.at("omega");
  const EnergyShell shell(sys, 1.0, 0.5);
  Vec seed = Vec::Zero(4);
  seed(0) = 1.0;
  const auto orb = find_periodic_orbit(shell, seed, 3.0);
  const double expect = 4.0 * std::pow(std::sin(omega * kPi), 2);
  const double rel = std::abs(orb.det_I_minus_P - expect) / expect;
  double circle = 0.0;
  for (Eigen::Index i = 0; i < orb.poincare_eigs.size(); ++i) {
    circle = std::max(circle, std::abs(std::abs(orb.poincare_eigs(i)) - 1.0));
  }
  r.passed = rel <= 1e-6 && circle <= 1e-6 && orb.nondegenerate;
  r.detail = "|det(I-P)| = " + detail::fmt(orb.det_I_minus_P, 12) + " vs 4 sin^2(omega pi) = " +
             detail::fmt(expect, 12) + " (rel " + detail::fmt(rel) + "), max ||lambda| - 1| = " + detail::fmt(circle);
  r.metrics = {{"det_I_minus_P", orb.det_I_minus_P}, {"analytic", expect}, {"relative_error", rel},
               {"unit_circle_defect", circle}};
  return r;
}

/// 3. ho1d sigma = 2k exactly; Bohr-Sommerfeld peaks sit at hbar(2m+1), and a sigma shift
///    of 2 moves them by hbar.
inline CheckResult check_maslov(const ValidationContext& ctx) {
  CheckResult r{"maslov"};
  const double E = 1.0, hbar = 0.05, T = 3.5;
  bool integers = true;
  {
    const EnergyShell sh(make_builtin("ho1d"), E, 0.5);
    const auto prim = find_periodic_orbit(sh, detail::vec2(1.0, 0.0), kPi);
    for (int k : {-3, -2, -1, 1, 2, 3}) integers = integers && repetition(sh.system, prim, k).maslov == 2 * k;
  }
  const SpectralWindow w(T, E, 0.5);
  const auto grid = linspace(0.75, 1.25, 401);
  std::vector<double> levels;
  for (int m = 0; hbar * (2 * m + 1) < 1.25; ++m) {
    const double Em = hbar * (2 * m + 1);
    if (Em > 0.76 && Em < 1.24) levels.push_back(Em);
  }
  auto peaks_for = [&](int shift) {
    const EnergyShell sh(make_builtin("ho1d"), E, 0.5);
    return peak_positions(grid, semiclassical_rho(sh, w, detail::ho1d_orbits(E, T, shift), hbar, grid).rho_total);
  };
  const auto peaks = peaks_for(ctx.maslov_shift);
  const double offset = detail::peak_offset(peaks, levels);

  // meta-test: the mutated sigma must move every peak by hbar
  const auto moved = peaks_for(ctx.maslov_shift + 2);
  double move = 0.0;
  bool detected = !moved.empty();
  for (double x : moved) {
    double best = std::numeric_limits<double>::infinity();
    for (double y : peaks) best = std::min(best, std::abs(std::abs(x - y) - hbar));
    move = std::max(move, best);
  }
  detected = detected && move <= hbar / 20.0;

  r.passed = integers && offset <= hbar / 20.0 && detected;
  r.detail = std::string("sigma_k = 2k ") + (integers ? "exact" : "VIOLATED") + "; peak offset from hbar(2m+1) = " +
             detail::fmt(offset) + " (limit " + detail::fmt(hbar / 20.0) + "); sigma+2 shifts peaks by hbar: " +
             (detected ? "detected" : "NOT detected");
  if (ctx.maslov_shift != 0) r.detail += " [maslov shift " + std::to_string(ctx.maslov_shift) + " injected]";
  r.metrics = {{"sigma_integers", integers}, {"peak_offset", offset}, {"mutation_detected", detected},
               {"maslov_shift", ctx.maslov_shift}};
  return r;
}

/// 4. ho1d grid eigenvalues hbar(2k+1), k <= 20; quartic1d eigenvalues stable under doubling.
inline CheckResult check_quantum_oracle(const ValidationContext&) {
  CheckResult r{"quantum_oracle"};
  const double hbar = 0.05;
  const auto gh = GridHamiltonian::build(make_builtin("ho1d"), 4.0, 512, hbar, 1.0, 0.5);
  double worst_ho = 0.0;
  for (int k = 0; k <= 20; ++k) {
    const double exact = hbar * (2 * k + 1);
    worst_ho = std::max(worst_ho, std::abs(gh.spectrum()[k].E - exact) / exact);
  }
  const auto sys = make_builtin("quartic1d");
  const auto a = GridHamiltonian::build(sys, 2.0, 256, hbar, 1.0, 0.5).eigensolve_window(1.0, 0.5);
  const auto b = GridHamiltonian::build(sys, 2.0, 512, hbar, 1.0, 0.5).eigensolve_window(1.0, 0.5);
  double worst_q = a.size() == b.size() && !a.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < std::min(a.size(), b.size()); ++j) {
    worst_q = std::max(worst_q, std::abs(a[j].E - b[j].E) / std::abs(b[j].E));
  }
  r.passed = worst_ho <= 1e-8 && worst_q <= 1e-8;
  r.detail = "ho1d max rel error (k<=20) = " + detail::fmt(worst_ho) + "; quartic1d N 256->512 max rel change = " +
             detail::fmt(worst_q) + " over " + std::to_string(b.size()) + " levels";
  r.metrics = {{"ho1d_max_rel_error", worst_ho}, {"quartic_doubling_change", worst_q}, {"quartic_levels", b.size()}};
  return r;
}

/// 5. Trace formula vs exact rho on ho1d at hbar = 0.05 and 0.02, T = 3.5.
inline CheckResult check_trace_formula(const ValidationContext& ctx) {
  CheckResult r{"trace_formula"};
  const auto t0 = std::chrono::steady_clock::now();
  const double E = 1.0, dE = 0.5, T = 3.5;
  const auto sys = make_builtin("ho1d");
  const EnergyShell sh(sys, E, dE);
  const SpectralWindow w(T, E, dE);
  const auto orbits = detail::ho1d_orbits(E, T, ctx.maslov_shift);
  bool ok = true;
  std::vector<double> linf;
  json per = json::array();
  for (double hbar : {0.05, 0.02}) {
    const auto grid = linspace(E - dE / 2, E + dE / 2, static_cast<int>(std::lround(dE / (hbar / 40.0))) + 1);
    const auto sc = semiclassical_rho(sh, w, orbits, hbar, grid);
    const auto ex = exact_rho(GridHamiltonian::build(sys, 2.0, 1024, hbar, E, dE), w, grid);
    const double off = detail::peak_offset(peak_positions(grid, sc.rho_total), peak_positions(grid, ex.rho));
    const double l = relative_linf(grid, sc.rho_total, ex.rho);
    linf.push_back(l);
    ok = ok && off <= hbar / 20.0;
    r.detail += "hbar=" + detail::fmt(hbar) + ": peak offset " + detail::fmt(off) + " (limit " +
                detail::fmt(hbar / 20.0) + "), rel Linf " + detail::fmt(100 * l) + "%; ";
    per.push_back({{"hbar", hbar}, {"peak_offset", off}, {"relative_linf", l}, {"points", grid.size()}});
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ok = ok && linf[0] <= 0.10 && linf[1] < linf[0] && secs < 300.0;
  r.detail += "Linf decreasing: " + std::string(linf[1] < linf[0] ? "yes" : "no");
  r.passed = ok;
  r.metrics = {{"runs", per}};
  return r;
}

/// 6. Coherent-state phase-space route vs exact rho on ho1d, hbar = 0.02.
inline CheckResult check_coherent_route(const ValidationContext&) {
  CheckResult r{"coherent_route"};
  const auto t0 = std::chrono::steady_clock::now();
  const double hbar = 0.02, E = 1.0, dE = 0.9;
  const auto sys = make_builtin("ho1d");
  const SpectralWindow w(3.5, E, dE);
  const auto grid = linspace(0.9, 1.1, 41);
  const auto cr = rho_via_coherent_states(sys, w, hbar, grid);
  const auto ex = exact_rho(GridHamiltonian::build(sys, 2.0, 1024, hbar, E, dE), w, grid);
  const double l = relative_linf(grid, cr.rho, ex.rho);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.passed = l <= 0.05 && secs < 600.0;
  r.detail = "rel Linf = " + detail::fmt(100 * l) + "% (limit 5%), " + std::to_string(cr.alpha_points) +
             " alpha nodes per axis, " + std::to_string(cr.t_points) + " t nodes, last refinement change " +
             detail::fmt(cr.last_change);
  r.metrics = {{"relative_linf", l}, {"alpha_points", cr.alpha_points}, {"t_points", cr.t_points},
               {"last_change", cr.last_change}, {"dE", dE}};
  return r;
}

/// 7. Leading-order packet error ~ hbar^{1/2} on quartic1d; exact on ho1d.
inline CheckResult check_propagation_law(const ValidationContext&) {
  CheckResult r{"propagation_law"};
  const std::vector<double> hs{2e-2, 1e-2, 5e-3, 2.5e-3};
  const Vec alpha = detail::vec2(0.5, 0.0);
  std::vector<double> eq, eh;
  for (double h : hs) {
    eq.push_back(packet_error(make_builtin("quartic1d"), alpha, 1.0, h).error);
    eh.push_back(packet_error(make_builtin("ho1d"), alpha, 1.0, h).error);
  }
  const double slope = loglog_slope(hs, eq);
  const double ho = *std::max_element(eh.begin(), eh.end());
  r.passed = slope >= 0.4 && slope <= 0.6 && ho <= 1e-6;
  r.detail = "quartic1d slope = " + detail::fmt(slope) + " (errors";
  for (double e : eq) r.detail += " " + detail::fmt(e);
  r.detail += "); ho1d max error = " + detail::fmt(ho);
  r.metrics = {{"hbar", hs}, {"quartic_errors", eq}, {"slope", slope}, {"ho1d_errors", eh}};
  return r;
}

/// 8. Stationary-phase residual fits on the Fresnel and circle-manifold problems.
inline CheckResult check_stationary_phase(const ValidationContext&) {
  CheckResult r{"stationary_phase"};
  bool ok = true;
  json per = json::array();
  for (const auto& pb : {fresnel_problem(), circle_problem()}) {
    const auto rep = verify_expansion(pb);
    const bool good = rep.accepted && rep.modulus_mismatch <= 0.02;
    ok = ok && good;
    r.detail += pb.name + ": exponent " + detail::fmt(rep.exponent) + ", modulus mismatch at 1e3 " +
                detail::fmt(rep.modulus_mismatch) + "; ";
    per.push_back({{"problem", pb.name}, {"exponent", rep.exponent}, {"modulus_mismatch", rep.modulus_mismatch},
                   {"residuals", rep.residuals}});
  }
  r.passed = ok;
  r.metrics = {{"problems", per}};
  return r;
}

/// 9. Hessian determinant identity and Im Phi >= 0 on the ho2d_aniso mode-1 orbit, k = +-1.
inline CheckResult check_hessian_identity(const ValidationContext& ctx) {
  CheckResult r{"hessian_identity"};
  const auto sys = make_builtin("ho2d_aniso");
  const EnergyShell shell(sys, 1.0, 0.5);
  Vec seed = Vec::Zero(4);
  seed(0) = 1.0;
  const auto prim = find_periodic_orbit(shell, seed, 3.0);
  bool ok = true;
  json per = json::array();
  for (int k : {1, -1}) {
    HessianCheckOptions o;
    o.samples = 1000;
    o.seed = ctx.seed;
    o.tol = 1e-6;
    try {
      const auto rep = hessian_identity_check(sys, k == 1 ? prim : repetition(sys, prim, k), o);
      const bool good = rep.hessian.identity_residual <= 1e-6 && rep.im_violations == 0 && rep.im_samples == 1000;
      ok = ok && good;
      r.detail += "k=" + std::to_string(k) + ": residual " + detail::fmt(rep.hessian.identity_residual) + ", Im<0 in " +
                  std::to_string(rep.im_violations) + "/" + std::to_string(rep.im_samples) + "; ";
      per.push_back({{"k", k}, {"identity_residual", rep.hessian.identity_residual},
                     {"im_violations", rep.im_violations}, {"im_samples", rep.im_samples}});
    } catch (const IdentityError& e) {
      ok = false;
      r.detail += "k=" + std::to_string(k) + ": " + e.what() + "; ";
    }
  }
  r.passed = ok;
  r.metrics = {{"traversals", per}};
  return r;
}

struct NamedCheck {
  std::string name;
  std::string summary;
  std::function<CheckResult(const ValidationContext&)> run;
};

inline const std::vector<NamedCheck>& validation_suite() {
  static const std::vector<NamedCheck> suite{
      {"symplecticity", "F^T J F = J and energy conservation on random shell points", check_symplecticity},
      {"monodromy", "ho2d_aniso mode-1 Poincare determinant and spectrum", check_monodromy},
      {"maslov", "ho1d Maslov integers and Bohr-Sommerfeld peak positions", check_maslov},
      {"quantum_oracle", "grid eigenvalues vs analytic and under grid doubling", check_quantum_oracle},
      {"trace_formula", "semiclassical vs exact density of states on ho1d", check_trace_formula},
      {"coherent_route", "coherent-state phase-space integral vs exact on ho1d", check_coherent_route},
      {"propagation_law", "hbar^(1/2) packet error law and harmonic control", check_propagation_law},
      {"stationary_phase", "stationary-phase residual exponent and modulus", check_stationary_phase},
      {"hessian_identity", "phase Hessian determinant identity at a periodic orbit", check_hessian_identity},
  };
  return suite;
}

/// Runs one check, timing it and turning exceptions into failures.
inline CheckResult run_check(const NamedCheck& c, const ValidationContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r;
  try {
    r = c.run(ctx);
  } catch (const std::exception& e) {
    r.name = c.name;
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  while (!r.detail.empty() && (r.detail.back() == ' ' || r.detail.back() == ';')) r.detail.pop_back();
  return r;
}

inline json to_json(const CheckResult& r) {
  return {{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}, {"metrics", r.metrics}};
}

}  // namespace gtrace
