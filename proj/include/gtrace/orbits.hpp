// Periodic orbits on an energy shell: shooting, monodromy, Poincare map,
// action and Maslov index.
#pragma once

#include "gtrace/core.hpp"
#include "gtrace/dynamics.hpp"
#include "gtrace/hamiltonians.hpp"
#include "gtrace/phase_hessian.hpp"
#include "gtrace/symplectic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace gtrace {

struct EnergyShell {
  HamiltonianSystem system;
  double E;
  double dE;

  EnergyShell(HamiltonianSystem sys, double energy, double half_width)
      : system(std::move(sys)), E(energy), dE(half_width) {
    if (!std::isfinite(E)) throw Error("EnergyShell: non-finite energy");
    if (!(dE > 0.0)) throw Error("EnergyShell: dE must be positive");
  }

  /// Throws when grad H vanishes at a point of the shell (E not a regular value there).
  void check_regular(const Vec& alpha) const {
    if (!(system.gradient(alpha).norm() > 1e-10)) {
      throw Error("EnergyShell: grad H vanishes on the shell");
    }
  }
};

struct OrbitOptions {
  IntegrationOptions integration;
  double tol = 1e-10;            // Newton residual, relative to max(1, |alpha|)
  int max_iter = 40;
  double degeneracy_tol = 1e-6;  // |lambda - 1| below this marks a degenerate orbit
  int max_divisor = 8;           // primitivity check divisors 2..max_divisor
  double primitivity_tol = 1e-6;
  std::function<double(const Vec& q)> observable;  // A(q) for the orbit integral
};

struct PeriodicOrbit {
  int n = 0;
  double E = 0.0;
  Vec alpha0;
  double T_star = 0.0;
  int k = 1;
  double S = 0.0;                  // oint p.dq over |k| traversals, signed with k
  double observable_primitive = 0.0;  // int_0^{T_star} A(alpha_s) ds
  Mat F;                           // monodromy F(T_gamma)
  Vec z1, z2;
  double beta = 0.0;               // (F - I) z2 = beta z1
  Mat V_basis;                     // orthonormal basis of V (2n x (2n-2))
  Mat P;                           // Poincare map in that basis
  CVec poincare_eigs;
  double det_I_minus_P = 1.0;      // |det(I - P)| from the restricted matrix
  double det_I_minus_P_eigs = 1.0; // |prod(1 - lambda)|
  double det_P_minus_I = 1.0;      // signed det(P - I)
  int sigma_prime = 0;
  bool nondegenerate = true;
  double arg_detU = 0.0;           // continuous arg det U over [0, T_gamma]
  cplx maslov_phase = 1.0;         // e^{i sigma pi / 2}
  cplx maslov_phase_scalar = 1.0;  // same phase via the scalar principal-branch route
  int maslov = 0;
  double closure_residual = 0.0;   // |phi_{T_star}(alpha0) - alpha0|
  double monodromy_defect = 0.0;
  int newton_iterations = 0;

  double T() const { return k * T_star; }
};

/// Resolves a unit complex number to i^m, m in {0,1,2,3}; throws if not within tol.
inline int fourth_root_index(cplx phase, double tol = 1e-6) {
  const cplx u = phase / std::abs(phase);
  const long m = std::lround(2.0 * std::arg(u) / kPi);
  const int r = static_cast<int>(((m % 4) + 4) % 4);
  const cplx ir = std::pow(kI, r);
  if (std::abs(u - ir) > tol) {
    throw BranchError("Maslov phase " + std::to_string(std::arg(u)) + " is not a fourth root of unity");
  }
  return r;
}

/// Integer congruent to r mod 4 closest to `target` (ties away from zero).
inline int lift_mod4(int r, double target) {
  const double base = std::floor((target - r) / 4.0);
  int best = 0;
  double best_d = 1e300;
  for (int j = -1; j <= 2; ++j) {
    const int cand = static_cast<int>(r + 4 * (base + j));
    const double dist = std::abs(cand - target);
    if (dist < best_d - 1e-12 || (std::abs(dist - best_d) <= 1e-12 && std::abs(cand) > std::abs(best))) {
      best = cand;
      best_d = dist;
    }
  }
  return best;
}

namespace detail {

inline Mat orthonormal_complement(const Vec& v) {
  Eigen::HouseholderQR<Mat> qr(v.normalized());
  return Mat(qr.householderQ()).rightCols(v.size() - 1);
}

}  // namespace detail

/// Fills z1, z2, V, P, spectrum and determinants from the monodromy.
inline void poincare_map(const HamiltonianSystem& sys, PeriodicOrbit& orb, double degeneracy_tol = 1e-6) {
  const int n = orb.n;
  const int d = 2 * n;
  const Vec g = sys.gradient(orb.alpha0);
  const Vec Hq = g.head(n), Hp = g.tail(n);
  Vec z1(d);
  z1 << Hp, -Hq;
  z1 /= std::sqrt(2.0 * Hp.squaredNorm() + Hq.squaredNorm());
  orb.z1 = z1;

  const Mat FI = orb.F - Mat::Identity(d, d);
  const Mat Q = detail::orthonormal_complement(z1);
  Mat K(d, d);
  K << FI * Q, -z1;
  Eigen::JacobiSVD<Mat> svd(K, Eigen::ComputeFullV);
  Vec sol = svd.matrixV().col(d - 1);
  Vec z2 = Q * sol.head(d - 1);
  double beta = sol(d - 1);
  const double nz = z2.norm();
  if (!(nz > 1e-12)) throw DegenerateOrbitError("poincare_map: no generalized eigenvector z2 found");
  z2 /= nz;
  beta /= nz;
  orb.z2 = z2;
  orb.beta = beta;

  const double s12 = symplectic_form(z1, z2);
  if (std::abs(s12) < 1e-8) {
    throw DegenerateOrbitError(
        "poincare_map: eigenvalue-1 space is not two dimensional (sigma(z1, z2) = 0); degenerate "
        "families are outside the nondegenerate setting");
  }

  const Mat J = symplectic_matrix(n);
  if (n == 1) {
    orb.V_basis = Mat(2, 0);
    orb.P = Mat(0, 0);
    orb.poincare_eigs = CVec(0);
    orb.det_I_minus_P = orb.det_I_minus_P_eigs = orb.det_P_minus_I = 1.0;
    orb.sigma_prime = 0;
    orb.nondegenerate = true;
    return;
  }
  Mat Cons(2, d);
  Cons.row(0) = (-J * z1).transpose();
  Cons.row(1) = (-J * z2).transpose();
  Eigen::JacobiSVD<Mat> csvd(Cons, Eigen::ComputeFullV);
  const Mat W = csvd.matrixV().rightCols(d - 2);
  orb.V_basis = W;
  orb.P = W.transpose() * orb.F * W;
  Eigen::EigenSolver<Mat> es(orb.P);
  orb.poincare_eigs = es.eigenvalues();
  const Mat IP = Mat::Identity(d - 2, d - 2) - orb.P;
  orb.det_P_minus_I = (orb.P - Mat::Identity(d - 2, d - 2)).determinant();
  orb.det_I_minus_P = std::abs(IP.determinant());
  cplx prod = 1.0;
  orb.sigma_prime = 0;
  orb.nondegenerate = true;
  for (Eigen::Index i = 0; i < orb.poincare_eigs.size(); ++i) {
    const cplx lam = orb.poincare_eigs(i);
    prod *= (1.0 - lam);
    if (std::abs(lam - 1.0) < degeneracy_tol) orb.nondegenerate = false;
    if (std::abs(lam.imag()) <= 1e-9 * std::max(1.0, std::abs(lam)) && lam.real() > 1.0) ++orb.sigma_prime;
  }
  orb.det_I_minus_P_eigs = std::abs(prod);
}

/// Maslov phase from the normal determinant of Phi_E'' and the tracked branch of
/// det U; sigma is the integer with e^{i sigma pi/2} equal to that phase that lies
/// closest to arg det U / pi.
inline void maslov_index(const HamiltonianSystem& sys, PeriodicOrbit& orb) {
  if (!orb.nondegenerate) throw DegenerateOrbitError("maslov_index: orbit is degenerate");
  const int n = orb.n;
  const Vec g = sys.gradient(orb.alpha0);
  const Vec Hq = g.head(n), Hp = g.tail(n);
  const Blocks b = split_blocks(orb.F);
  const CMat H = assemble_phase_hessian(Hq, Hp, b, width_matrix(orb.F));
  const cplx branch = std::polar(1.0, -0.5 * orb.arg_detU);  // phase of (det U)_c^{-1/2}
  const cplx f = normal_inv_sqrt_det(H, critical_tangent(Hq, Hp)) * branch;
  orb.maslov_phase = f / std::abs(f);

  const CMat U = b.A.cast<cplx>() + kI * b.B.cast<cplx>();
  const double sgn = (n % 2 == 1) ? 1.0 : -1.0;  // (-1)^{1-n}
  const cplx inner = sgn * orb.det_P_minus_I / (0.5 * U).determinant();
  const cplx fs = branch / std::sqrt(inner);
  orb.maslov_phase_scalar = fs / std::abs(fs);

  const int r = fourth_root_index(orb.maslov_phase);
  orb.maslov = lift_mod4(r, orb.arg_detU / kPi);
}

/// Integrates |k| traversals of the orbit through alpha0 (time-reversed for k < 0)
/// and assembles all orbit data.
inline PeriodicOrbit build_orbit(const HamiltonianSystem& sys, const Vec& alpha0, double T_star, int k,
                                 const OrbitOptions& opts = {}) {
  if (k == 0) throw Error("build_orbit: repetition index must be nonzero");
  if (!(T_star > 0.0)) throw Error("build_orbit: primitive period must be positive");
  PeriodicOrbit orb;
  orb.n = sys.dim();
  orb.E = sys.energy(alpha0);
  orb.alpha0 = alpha0;
  orb.T_star = T_star;
  orb.k = k;
  IntegrationOptions io = opts.integration;
  io.report_dt = 0.0;
  io.observable = opts.observable;
  const auto res = integrate_with_jacobi(sys, alpha0, k * T_star, io);
  orb.F = res.flow.F.back();
  orb.arg_detU = res.flow.arg_detU.back();
  orb.S = res.trajectory.action_pq.back();
  orb.observable_primitive = opts.observable ? res.trajectory.observable.back() / k : T_star;
  orb.closure_residual = (res.trajectory.final_state() - alpha0).norm();
  orb.monodromy_defect = symplectic_defect(orb.F);
  poincare_map(sys, orb, opts.degeneracy_tol);
  if (orb.nondegenerate) maslov_index(sys, orb);
  return orb;
}

/// Newton shooting for a closed orbit on H = E through the section
/// {f_s . (alpha - seed) = 0}, f_s the flow direction at the seed; the period is
/// an unknown. Returns the primitive orbit (k = 1).
inline PeriodicOrbit find_periodic_orbit(const EnergyShell& shell, const Vec& seed, double T_guess,
                                         const OrbitOptions& opts = {}) {
  const HamiltonianSystem& sys = shell.system;
  const int n = sys.dim();
  const int d = 2 * n;
  if (seed.size() != d) throw Error("find_periodic_orbit: seed has wrong dimension");
  if (!(T_guess > 0.0)) throw Error("find_periodic_orbit: T_guess must be positive");
  const Vec fs = sys.vector_field(seed);
  if (!(fs.norm() > 1e-12)) throw Error("find_periodic_orbit: section not transversal (flow vanishes at seed)");
  const Vec fs_n = fs.normalized();

  IntegrationOptions io = opts.integration;
  io.report_dt = 0.0;
  io.observable = nullptr;

  Vec x = seed;
  double T = T_guess;
  auto residual = [&](const Vec& a, double t, Vec& r, Mat* Jac) {
    Vec end;
    if (Jac) {
      const auto res = integrate_with_jacobi(sys, a, t, io);
      end = res.trajectory.final_state();
      Jac->setZero(d + 2, d + 1);
      Jac->topLeftCorner(d, d) = res.flow.F.back() - Mat::Identity(d, d);
      Jac->block(0, d, d, 1) = sys.vector_field(end);
      Jac->block(d, 0, 1, d) = sys.gradient(a).transpose();
      Jac->block(d + 1, 0, 1, d) = fs_n.transpose();
    } else {
      end = integrate(sys, a, t, io).final_state();
    }
    r.resize(d + 2);
    r.head(d) = end - a;
    r(d) = sys.energy(a) - shell.E;
    r(d + 1) = fs_n.dot(a - seed);
  };

  Vec r;
  Mat Jac;
  int it = 0;
  bool converged = false;
  for (; it <= opts.max_iter; ++it) {
    residual(x, T, r, &Jac);
    const double scale = std::max(1.0, x.norm());
    if (r.norm() <= opts.tol * scale) {
      converged = true;
      break;
    }
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(Jac);
    const Vec step = cod.solve(-r);
    double lam = 1.0;
    const double r0 = r.norm();
    bool improved = false;
    for (int ls = 0; ls < 12; ++ls) {
      const Vec xt = x + lam * step.head(d);
      const double Tt = T + lam * step(d);
      if (Tt > 0.0 && xt.allFinite()) {
        Vec rt;
        try {
          residual(xt, Tt, rt, nullptr);
          if (rt.norm() < r0 || rt.norm() <= opts.tol * std::max(1.0, xt.norm())) {
            x = xt;
            T = Tt;
            improved = true;
            break;
          }
        } catch (const IntegrationError&) {
        }
      }
      lam *= 0.5;
    }
    if (!improved) break;
  }
  if (!converged) {
    throw ConvergenceError("find_periodic_orbit: Newton did not converge (residual " + std::to_string(r.norm()) +
                           " after " + std::to_string(it) + " iterations)");
  }

  // reduce to the primitive period
  double T_star = T;
  const double scale = std::max(1.0, x.norm());
  for (int m = opts.max_divisor; m >= 2; --m) {
    const Vec end = integrate(sys, x, T / m, io).final_state();
    if ((end - x).norm() <= opts.primitivity_tol * scale) {
      T_star = T / m;
      break;
    }
  }
  PeriodicOrbit orb = build_orbit(sys, x, T_star, 1, opts);
  orb.newton_iterations = it;
  return orb;
}

/// The orbit with repetition index k built from a primitive one.
inline PeriodicOrbit repetition(const HamiltonianSystem& sys, const PeriodicOrbit& primitive, int k,
                                const OrbitOptions& opts = {}) {
  PeriodicOrbit o = build_orbit(sys, primitive.alpha0, primitive.T_star, k, opts);
  o.newton_iterations = primitive.newton_iterations;
  return o;
}

struct OrbitSeed {
  Vec alpha;
  double T_guess;
};

struct RecurrenceScan {
  bool enabled = false;
  int samples = 32;
  double report_dt = 0.01;
  double threshold = 0.05;  // relative closest-return distance accepted as a seed
  unsigned seed = 0;
};

struct EnumerationResult {
  std::vector<PeriodicOrbit> primitives;
  std::vector<PeriodicOrbit> orbits;  // all repetitions, both signs, |T| <= T_max
  int failed_seeds = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline bool same_orbit(const HamiltonianSystem& sys, const PeriodicOrbit& a, const PeriodicOrbit& b,
                       const IntegrationOptions& io) {
  if (std::abs(a.T_star - b.T_star) > 1e-6 * a.T_star) return false;
  if (std::abs(a.S - b.S) > 1e-6 * std::max(1.0, std::abs(a.S))) return false;
  IntegrationOptions o = io;
  o.report_dt = a.T_star / 400.0;
  o.observable = nullptr;
  const auto tr = integrate(sys, a.alpha0, a.T_star, o);
  double best = 1e300, spacing = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    best = std::min(best, (tr.states[i] - b.alpha0).norm());
    if (i > 0) spacing = std::max(spacing, (tr.states[i] - tr.states[i - 1]).norm());
  }
  return best <= spacing + 1e-6 * std::max(1.0, a.alpha0.norm());
}

/// Random shell point for mechanical systems: q with V(q) < E, |p|^2 = E - V(q).
inline std::optional<Vec> random_shell_point(const EnergyShell& shell, std::mt19937_64& rng) {
  const auto& sys = shell.system;
  if (!sys.potential()) return std::nullopt;
  const int n = sys.dim();
  std::normal_distribution<double> N01(0.0, 1.0);
  std::uniform_real_distribution<double> U01(0.0, 1.0);
  const double R = std::sqrt(std::max(shell.E, 1e-12)) * 2.0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Vec q(n), p(n);
    for (int i = 0; i < n; ++i) q(i) = (2.0 * U01(rng) - 1.0) * R;
    const double V = sys.potential()->value(q);
    if (V >= shell.E) continue;
    for (int i = 0; i < n; ++i) p(i) = N01(rng);
    p *= std::sqrt(shell.E - V) / p.norm();
    Vec z(2 * n);
    z << q, p;
    return z;
  }
  return std::nullopt;
}

}  // namespace detail

/// Finds primitive orbits from the seeds (and an optional recurrence scan), removes
/// duplicates, and expands repetitions k = +-1, +-2, ... with |k| T_star <= T_max.
inline EnumerationResult enumerate_orbits(const EnergyShell& shell, double T_max, const std::vector<OrbitSeed>& seeds,
                                          const OrbitOptions& opts = {}, const RecurrenceScan& scan = {}) {
  if (!(T_max > 0.0)) throw Error("enumerate_orbits: T_max must be positive");
  const auto& sys = shell.system;
  EnumerationResult out;
  std::vector<OrbitSeed> all = seeds;

  if (scan.enabled) {
    std::mt19937_64 rng(scan.seed);
    IntegrationOptions io = opts.integration;
    io.report_dt = scan.report_dt;
    io.observable = nullptr;
    for (int s = 0; s < scan.samples; ++s) {
      const auto z0 = detail::random_shell_point(shell, rng);
      if (!z0) {
        out.warnings.push_back("recurrence scan needs a mechanical system; skipped");
        break;
      }
      const auto tr = integrate(sys, *z0, T_max, io);
      std::vector<double> dist(tr.size());
      for (std::size_t i = 0; i < tr.size(); ++i) dist[i] = (tr.states[i] - *z0).norm();
      const double scale = std::max(1.0, z0->norm());
      for (std::size_t i = 2; i + 1 < tr.size(); ++i) {
        if (dist[i] < dist[i - 1] && dist[i] <= dist[i + 1] && dist[i] < scan.threshold * scale) {
          all.push_back({*z0, tr.times[i]});
          break;  // the first close return gives the shortest candidate period
        }
      }
    }
  }

  for (const auto& sd : all) {
    PeriodicOrbit orb;
    try {
      orb = find_periodic_orbit(shell, sd.alpha, sd.T_guess, opts);
    } catch (const Error&) {
      ++out.failed_seeds;
      continue;
    }
    bool dup = false;
    for (const auto& p : out.primitives) {
      if (detail::same_orbit(sys, p, orb, opts.integration)) {
        dup = true;
        break;
      }
    }
    if (!dup) out.primitives.push_back(std::move(orb));
  }
  if (out.failed_seeds > 0) {
    out.warnings.push_back(std::to_string(out.failed_seeds) + " seed(s) did not converge to a periodic orbit");
  }
  if (all.empty()) out.warnings.push_back("no seeds given and recurrence scan disabled: orbit table is empty");

  std::sort(out.primitives.begin(), out.primitives.end(),
            [](const PeriodicOrbit& a, const PeriodicOrbit& b) { return a.T_star < b.T_star; });
  for (const auto& p : out.primitives) {
    const int kmax = static_cast<int>(std::floor(T_max / p.T_star * (1.0 + 1e-12)));
    for (int k = 1; k <= kmax; ++k) {
      for (int s : {1, -1}) {
        if (k == 1 && s == 1) {
          out.orbits.push_back(p);
        } else {
          out.orbits.push_back(repetition(sys, p, s * k, opts));
        }
      }
    }
  }
  return out;
}

}  // namespace gtrace
