// Semiclassical side of the trace formula (Weyl term plus periodic-orbit terms)
// and the coherent-state phase-space route.
//
// rho_A(E) ~ (2 pi)^{-n} hbar^{1-n} ghat(0) int_{Sigma_E} A dsigma_E
//          + (2 pi)^{-1} sum_gamma ghat(T_gamma) e^{i(S_gamma/hbar + sigma_gamma pi/2)}
//                                  |det(I - P_gamma)|^{-1/2} int_0^{T*_gamma} A ds
#pragma once

#include "gtrace/core.hpp"
#include "gtrace/hamiltonians.hpp"
#include "gtrace/orbits.hpp"
#include "gtrace/wavepackets.hpp"
#include "gtrace/window.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace gtrace {

using Observable = std::function<double(const Vec& q)>;

namespace detail {

/// Smallest r > 0 with V(center + r u) = E, found by doubling then TOMS 748.
inline double radial_crossing(const std::function<double(const Vec&)>& V, const Vec& center, const Vec& u, double E) {
  if (!(V(center) < E)) throw Error("radial_crossing: center is not inside {V < E}");
  double lo = 0.0, hi = 0.25;
  int guard = 0;
  while (V(center + hi * u) < E) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 60) throw Error("radial_crossing: {V < E} is unbounded along a ray");
  }
  auto f = [&](double r) { return V(center + r * u) - E; };
  boost::uintmax_t it = 200;
  const auto br = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), it);
  return 0.5 * (br.first + br.second);
}

}  // namespace detail

/// int_{Sigma_E} A dsigma_E, dsigma_E = dSigma_E / |grad H|, for H = |p|^2 + V(q) with
/// n in {1, 2}. Integrating out p leaves c_n int_{V<E} A(q) (E - V)^{n/2 - 1} dq with
/// c_1 = 1, c_2 = pi. The region {V < E} must be star-shaped about q = 0.
inline double liouville_integral(const HamiltonianSystem& sys, double E, const Observable& A = nullptr,
                                 double rel_tol = 1e-3) {
  if (!sys.potential()) throw Error("liouville_integral: system must be of the form |p|^2 + V(q)");
  const auto& V = sys.potential()->value;
  const int n = sys.dim();
  auto a = [&](const Vec& q) { return A ? A(q) : 1.0; };
  const Vec origin = Vec::Zero(n);
  if (!(V(origin) < E)) throw Error("liouville_integral: shell energy must exceed V(0)");

  if (n == 1) {
    const double b = detail::radial_crossing(V, origin, Vec::Ones(1), E);
    const double a0 = -detail::radial_crossing(V, origin, -Vec::Ones(1), E);
    const double c = 0.5 * (a0 + b), h = 0.5 * (b - a0);
    // q = c + h sin(theta) removes the inverse square-root endpoint singularities
    auto f = [&](double th) {
      const Vec q = Vec::Constant(1, c + h * std::sin(th));
      const double gap = E - V(q);
      if (gap <= 0.0) return 0.0;
      return a(q) * h * std::cos(th) / std::sqrt(gap);
    };
    double err = 0.0;
    const double val =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -0.5 * kPi, 0.5 * kPi, 12, 1e-12, &err);
    if (err > rel_tol * std::max(std::abs(val), 1e-300)) {
      throw ConvergenceError("liouville_integral: quadrature not converged (relative spread " +
                             std::to_string(err / std::abs(val)) + ")");
    }
    return val;
  }
  if (n == 2) {
    // polar coordinates: trapezoid in theta (periodic), Gauss-Legendre in r
    using GL = boost::math::quadrature::gauss<double, 30>;
    auto sweep = [&](int m) {
      double acc = 0.0;
      for (int j = 0; j < m; ++j) {
        const double th = 2.0 * kPi * j / m;
        Vec u(2);
        u << std::cos(th), std::sin(th);
        const double R = detail::radial_crossing(V, origin, u, E);
        acc += GL::integrate([&](double r) { return a(r * u) * r; }, 0.0, R);
      }
      return acc * 2.0 * kPi / m * kPi;
    };
    int m = 64;
    double prev = sweep(m), cur = prev;
    double change = 1.0;
    for (; m <= 16384; m *= 2) {
      cur = sweep(2 * m);
      change = std::abs(cur - prev) / std::max(std::abs(cur), 1e-300);
      if (change < 1e-10) break;
      prev = cur;
    }
    if (change > rel_tol) {
      throw ConvergenceError("liouville_integral: quadrature not converged (relative spread " +
                             std::to_string(change) + ")");
    }
    return cur;
  }
  throw Error("liouville_integral: only n = 1, 2 are supported");
}

/// (2 pi)^{-n} hbar^{1-n} ghat(0) int A dsigma_E.
inline double weyl_term(const HamiltonianSystem& sys, const SpectralWindow& w, double hbar, double E,
                        const Observable& A = nullptr) {
  if (!(hbar > 0.0)) throw ConfigError("hbar", "must be positive");
  const int n = sys.dim();
  return std::pow(2.0 * kPi, -n) * std::pow(hbar, 1 - n) * w.ghat(0.0) * liouville_integral(sys, E, A);
}

/// Orbit data entering one term; everything except sigma follows the energy.
struct OrbitTermData {
  double T = 0.0;          // k T_star
  double S = 0.0;          // k S_star
  int maslov = 0;
  double det_I_minus_P = 1.0;
  double observable = 0.0;  // int_0^{T_star} A ds
};

inline OrbitTermData term_data(const PeriodicOrbit& o) {
  if (!o.nondegenerate) throw DegenerateOrbitError("orbit_term: degenerate orbit passed in");
  return {o.T(), o.S, o.maslov, o.det_I_minus_P, o.observable_primitive};
}

/// (2 pi)^{-1} ghat(T) e^{i(S/hbar + sigma pi/2)} |det(I - P)|^{-1/2} int_0^{T*} A ds.
inline cplx orbit_term(const OrbitTermData& d, const SpectralWindow& w, double hbar) {
  const double gh = w.ghat(d.T);
  if (gh == 0.0) return 0.0;
  return gh / (2.0 * kPi) * std::polar(1.0, d.S / hbar + 0.5 * kPi * d.maslov) / std::sqrt(d.det_I_minus_P) *
         d.observable;
}

inline cplx orbit_term(const PeriodicOrbit& o, const SpectralWindow& w, double hbar) {
  return orbit_term(term_data(o), w, hbar);
}

struct OrbitTermSeries {
  int k = 1;
  double T_star = 0.0;  // at the reference energy
  int maslov = 0;
  std::vector<cplx> values;
};

struct DensityOfStates {
  std::vector<double> E_grid;
  std::vector<double> rho_total;
  std::vector<double> weyl;
  std::vector<OrbitTermSeries> terms;
  double hbar = 0.0;
  double T = 0.0;
  double imag_residue = 0.0;  // max |Im sum| / max |rho|
  double dSdE_defect = 0.0;   // max |dS/dE - T| / T along the continuation
  std::vector<std::string> warnings;
};

enum class EnergyContinuation { newton, first_order };

struct TraceOptions {
  OrbitOptions orbit;
  EnergyContinuation continuation = EnergyContinuation::newton;
  double dSdE_tol = 1e-4;
  RecurrenceScan coverage_scan;  // enabled -> warn about primitives missing from the list
};

namespace detail {

struct FamilyAtE {
  double T_star, S_star, observable;
  CVec poincare_eigs;
};

/// |det(I - P^k)| from the primitive Poincare spectrum.
inline double det_I_minus_Pk(const CVec& eigs, int k) {
  cplx prod = 1.0;
  for (Eigen::Index i = 0; i < eigs.size(); ++i) prod *= 1.0 - std::pow(eigs(i), std::abs(k));
  return std::abs(prod);
}

}  // namespace detail

/// Weyl term plus all orbit terms on E_grid. Orbit families are continued in E by
/// Newton warm starts (or to first order via dS/dE = T); Maslov indices are kept
/// from the supplied orbit list.
inline DensityOfStates semiclassical_rho(const EnergyShell& shell, const SpectralWindow& w,
                                         const std::vector<PeriodicOrbit>& orbits, double hbar,
                                         const std::vector<double>& E_grid, const Observable& A = nullptr,
                                         const TraceOptions& opts = {}) {
  if (!(hbar > 0.0)) throw ConfigError("hbar", "must be positive");
  if (E_grid.empty()) throw ConfigError("E_grid", "must not be empty");
  const auto& sys = shell.system;
  DensityOfStates out;
  out.E_grid = E_grid;
  out.hbar = hbar;
  out.T = w.T();
  const std::size_t m = E_grid.size();

  for (double E : E_grid) {
    if (w.chi(E) < 1.0) {
      out.warnings.push_back("E_grid leaves the region where chi = 1");
      break;
    }
  }

  // group orbits into families by their primitive
  struct Family {
    PeriodicOrbit ref;
    std::vector<std::size_t> members;
  };
  std::vector<Family> fams;
  for (std::size_t i = 0; i < orbits.size(); ++i) {
    const auto& o = orbits[i];
    if (!o.nondegenerate) throw DegenerateOrbitError("semiclassical_rho: degenerate orbit in the list");
    if (std::abs(o.T()) > w.T()) continue;
    bool found = false;
    for (auto& f : fams) {
      if (f.ref.T_star == o.T_star && f.ref.alpha0 == o.alpha0) {
        f.members.push_back(i);
        found = true;
        break;
      }
    }
    if (!found) fams.push_back({o, {i}});
  }

  OrbitOptions oo = opts.orbit;
  oo.observable = A;
  std::vector<std::vector<detail::FamilyAtE>> data(fams.size(), std::vector<detail::FamilyAtE>(m));
  std::vector<std::size_t> order(m);
  for (std::size_t j = 0; j < m; ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return E_grid[a] < E_grid[b]; });

  for (std::size_t f = 0; f < fams.size(); ++f) {
    // primitive at the reference energy, with the observable integral
    const PeriodicOrbit base = build_orbit(sys, fams[f].ref.alpha0, fams[f].ref.T_star, 1, oo);
    const double E0 = base.E;
    if (opts.continuation == EnergyContinuation::first_order) {
      for (std::size_t j = 0; j < m; ++j) {
        data[f][j] = {base.T_star, base.S + base.T_star * (E_grid[j] - E0), base.observable_primitive,
                      base.poincare_eigs};
      }
      continue;
    }
    // walk outward from the grid point nearest E0 in both directions
    std::size_t start = 0;
    for (std::size_t r = 0; r < m; ++r) {
      if (std::abs(E_grid[order[r]] - E0) < std::abs(E_grid[order[start]] - E0)) start = r;
    }
    auto solve_at = [&](std::size_t r, const PeriodicOrbit& seed) {
      const double E = E_grid[order[r]];
      const EnergyShell sh(sys, E, shell.dE);
      PeriodicOrbit o = find_periodic_orbit(sh, seed.alpha0, seed.T_star, oo);
      if (std::abs(o.T_star - seed.T_star) > 0.25 * seed.T_star) {
        throw ConvergenceError("semiclassical_rho: orbit continuation jumped to another family at E = " +
                               std::to_string(E));
      }
      data[f][order[r]] = {o.T_star, o.S, o.observable_primitive, o.poincare_eigs};
      return o;
    };
    PeriodicOrbit cur = base;
    for (std::size_t r = start; r < m; ++r) cur = solve_at(r, cur);
    cur = base;
    for (std::size_t r = start; r-- > 0;) cur = solve_at(r, cur);

    for (std::size_t r = 1; r + 1 < m; ++r) {
      const auto &lo = data[f][order[r - 1]], &hi = data[f][order[r + 1]], &mid = data[f][order[r]];
      const double dE = E_grid[order[r + 1]] - E_grid[order[r - 1]];
      if (dE <= 0.0) continue;
      const double slope = (hi.S_star - lo.S_star) / dE;
      out.dSdE_defect = std::max(out.dSdE_defect, std::abs(slope - mid.T_star) / mid.T_star);
    }
  }
  if (out.dSdE_defect > opts.dSdE_tol) {
    out.warnings.push_back("dS/dE differs from T by " + std::to_string(out.dSdE_defect) +
                           " (relative) along the continuation");
  }

  out.weyl.resize(m);
  std::vector<cplx> total(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    out.weyl[j] = weyl_term(sys, w, hbar, E_grid[j], A);
    total[j] = out.weyl[j];
  }
  for (std::size_t f = 0; f < fams.size(); ++f) {
    for (std::size_t idx : fams[f].members) {
      const auto& o = orbits[idx];
      OrbitTermSeries s;
      s.k = o.k;
      s.T_star = o.T_star;
      s.maslov = o.maslov;
      s.values.resize(m);
      for (std::size_t j = 0; j < m; ++j) {
        const auto& d = data[f][j];
        OrbitTermData td;
        td.T = o.k * d.T_star;
        td.S = o.k * d.S_star;
        td.maslov = o.maslov;
        td.det_I_minus_P = o.n == 1 ? 1.0 : detail::det_I_minus_Pk(d.poincare_eigs, o.k);
        td.observable = d.observable;
        s.values[j] = orbit_term(td, w, hbar);
        total[j] += s.values[j];
      }
      out.terms.push_back(std::move(s));
    }
  }

  out.rho_total.resize(m);
  double scale = 0.0, im = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    out.rho_total[j] = total[j].real();
    scale = std::max(scale, std::abs(total[j].real()));
    im = std::max(im, std::abs(total[j].imag()));
  }
  out.imag_residue = im / std::max(scale, 1e-300);
  if (out.imag_residue > 1e-10) {
    out.warnings.push_back("assembled sum is not real (relative imaginary residue " + std::to_string(out.imag_residue) +
                           "); the orbit list is probably missing time-reversed partners");
  }

  if (opts.coverage_scan.enabled) {
    std::vector<PeriodicOrbit> prims;
    for (const auto& f : fams) prims.push_back(f.ref);
    const auto scan = enumerate_orbits(shell, w.T(), {}, opts.orbit, opts.coverage_scan);
    for (const auto& p : scan.primitives) {
      bool known = false;
      for (const auto& q : prims) {
        if (detail::same_orbit(sys, q, p, opts.orbit.integration)) {
          known = true;
          break;
        }
      }
      if (!known) {
        out.warnings.push_back("recurrence scan found a primitive orbit with T* = " + std::to_string(p.T_star) +
                               " <= T that is absent from the orbit list");
      }
    }
  }
  return out;
}

struct CoherentOptions {
  double rel_tol = 1e-3;    // stop when halving the alpha spacing changes rho by less than this
  int initial_points = 32;  // alpha nodes per axis on the first pass
  int max_halvings = 4;
  double dt = 0.0;          // t spacing; 0 -> pi hbar / (4 (E + dE))
  IntegrationOptions integration = [] {
    IntegrationOptions o;
    o.rtol = o.atol = 1e-10;
    o.tol_E = 1e-7;
    return o;
  }();
};

struct CoherentRho {
  std::vector<double> E_grid;
  std::vector<double> rho;
  double imag_residue = 0.0;
  double last_change = 0.0;     // relative L-infinity change under the final halving
  double t_monitor = 0.0;       // relative change when every second t node is dropped
  int alpha_points = 0;         // per axis in the final pass
  int t_points = 0;
  std::vector<std::string> warnings;
};

/// (2 pi)^{-n-1} hbar^{-n} int int ghat(t) e^{iEt/hbar} chi(H(alpha))^2 <phi_alpha, U(t) phi_alpha> dalpha dt
/// with the leading-order overlap e^{i(delta - sigma(alpha, alpha_t)/2)/hbar} m0(alpha, t). n = 1,
/// H = p^2 + V; uniform trapezoid rules in alpha and t (the integrand vanishes with all
/// derivatives at the edges of both boxes).
inline CoherentRho rho_via_coherent_states(const HamiltonianSystem& sys, const SpectralWindow& w, double hbar,
                                           const std::vector<double>& E_grid, const CoherentOptions& opts = {}) {
  if (sys.dim() != 1) throw Error("rho_via_coherent_states: only n = 1 is supported");
  if (!sys.potential()) throw Error("rho_via_coherent_states: system must be of the form p^2 + V(q)");
  if (!(hbar > 0.0)) throw ConfigError("hbar", "must be positive");
  if (E_grid.empty()) throw ConfigError("E_grid", "must not be empty");
  CoherentRho out;
  out.E_grid = E_grid;
  const std::size_t ne = E_grid.size();

  const double Emax = w.E() + w.dE();
  const auto& V = sys.potential()->value;
  const double qhi = detail::radial_crossing(V, Vec::Zero(1), Vec::Ones(1), Emax);
  const double qlo = -detail::radial_crossing(V, Vec::Zero(1), -Vec::Ones(1), Emax);
  const double pmax = std::sqrt(Emax - std::min(0.0, V(Vec::Zero(1))) + 1e-12);

  const double T = w.T();
  const double dt_target = opts.dt > 0.0 ? opts.dt : kPi * hbar / (4.0 * std::max(Emax, 1e-12));
  const int J = std::max(4, static_cast<int>(std::ceil(T / dt_target)));
  const double dt = T / J;
  out.t_points = 2 * J + 1;

  // K[j] accumulates chi^2 x overlap at t = (j - J) dt over all evaluated alpha nodes
  std::vector<cplx> K(2 * J + 1, 0.0);
  IntegrationOptions io = opts.integration;
  io.report_dt = dt;
  io.observable = nullptr;

  auto add_node = [&](double q, double p) {
    Vec a(2);
    a << q, p;
    const double c = w.chi(sys.energy(a));
    if (c == 0.0) return;
    const double c2 = c * c;
    for (int dir : {1, -1}) {
      const auto fr = integrate_with_jacobi(sys, a, dir * T, io);
      const auto& tr = fr.trajectory;
      if (static_cast<int>(tr.size()) != J + 1) throw Error("rho_via_coherent_states: unexpected report grid");
      for (int i = (dir == 1 ? 0 : 1); i <= J; ++i) {
        const int j = J + dir * i;
        if (w.ghat(tr.times[i]) == 0.0) continue;
        const cplx ov = leading_overlap(a, tr.states[i], tr.action_delta(i), fr.flow.M(i), fr.flow.detU_inv_sqrt(i), hbar);
        K[j] += c2 * ov;
      }
    }
  };

  auto assemble = [&](double hq, double hp, int stride) {
    std::vector<cplx> r(ne, 0.0);
    const double pref = std::pow(2.0 * kPi, -2.0) / hbar * hq * hp;
    for (std::size_t e = 0; e < ne; ++e) {
      cplx acc = 0.0;
      for (int j = 0; j <= 2 * J; j += stride) {
        const double t = (j - J) * dt;
        acc += w.ghat(t) * std::polar(1.0, E_grid[e] * t / hbar) * K[j];
      }
      r[e] = pref * acc * (dt * stride);
    }
    return r;
  };

  int m = std::max(4, opts.initial_points);
  const double Lq = qhi - qlo, Lp = 2.0 * pmax;
  for (int i = 0; i <= m; ++i)
    for (int k = 0; k <= m; ++k) add_node(qlo + Lq * i / m, -pmax + Lp * k / m);
  std::vector<cplx> prev = assemble(Lq / m, Lp / m, 1);
  bool converged = false;
  for (int h = 0; h < opts.max_halvings; ++h) {
    const int m2 = 2 * m;
    for (int i = 0; i <= m2; ++i)
      for (int k = 0; k <= m2; ++k)
        if (i % 2 == 1 || k % 2 == 1) add_node(qlo + Lq * i / m2, -pmax + Lp * k / m2);
    const auto cur = assemble(Lq / m2, Lp / m2, 1);
    double num = 0.0, den = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      num = std::max(num, std::abs(cur[e] - prev[e]));
      den = std::max(den, std::abs(cur[e].real()));
    }
    out.last_change = num / std::max(den, 1e-300);
    prev = cur;
    m = m2;
    if (out.last_change < opts.rel_tol) {
      converged = true;
      break;
    }
  }
  out.alpha_points = m + 1;
  if (!converged) {
    throw ConvergenceError("rho_via_coherent_states: alpha quadrature not converged (relative change " +
                           std::to_string(out.last_change) + " after " + std::to_string(opts.max_halvings) +
                           " halvings)");
  }

  out.rho.resize(ne);
  double scale = 0.0, im = 0.0;
  for (std::size_t e = 0; e < ne; ++e) {
    out.rho[e] = prev[e].real();
    scale = std::max(scale, std::abs(prev[e].real()));
    im = std::max(im, std::abs(prev[e].imag()));
  }
  out.imag_residue = im / std::max(scale, 1e-300);
  if (J % 2 == 0) {
    const auto coarse = assemble(Lq / m, Lp / m, 2);
    double num = 0.0;
    for (std::size_t e = 0; e < ne; ++e) num = std::max(num, std::abs(coarse[e] - prev[e]));
    out.t_monitor = num / std::max(scale, 1e-300);
    if (out.t_monitor > opts.rel_tol) {
      out.warnings.push_back("t quadrature: dropping every second node changes rho by " +
                             std::to_string(out.t_monitor) + " (relative)");
    }
  }
  return out;
}

/// Local maxima of samples above rel_height * max, refined by a parabola through three points.
inline std::vector<double> peak_positions(const std::vector<double>& x, const std::vector<double>& y,
                                          double rel_height = 0.5) {
  std::vector<double> out;
  if (x.size() != y.size()) throw Error("peak_positions: size mismatch");
  if (x.size() < 3) return out;
  const double ymax = *std::max_element(y.begin(), y.end());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] >= rel_height * ymax) {
      const double den = y[i - 1] - 2.0 * y[i] + y[i + 1];
      const double off = den != 0.0 ? 0.5 * (y[i - 1] - y[i + 1]) / den : 0.0;
      out.push_back(x[i] + off * (x[i + 1] - x[i]));
    }
  }
  return out;
}

/// max |a - b| / max |b| over the samples whose x lies in [lo, hi].
inline double relative_linf(const std::vector<double>& x, const std::vector<double>& a, const std::vector<double>& b,
                            double lo = -1e300, double hi = 1e300) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lo || x[i] > hi) continue;
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / std::max(den, 1e-300);
}

}  // namespace gtrace
