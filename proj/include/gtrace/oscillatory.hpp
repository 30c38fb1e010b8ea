// Numerical check of stationary phase with a critical manifold,
//   J(omega) = int e^{i omega f(x)} a(x) dx ~ (2 pi / omega)^{(d-k)/2} sum_j c_j omega^{-j},
//   c_0 = e^{i omega f(m_0)} int_M [det(f''(m)|N_m / i)]_*^{-1/2} a dV_M,
// and of the phase-Hessian identity at a periodic orbit.
#pragma once

#include "gtrace/core.hpp"
#include "gtrace/orbits.hpp"
#include "gtrace/phase_hessian.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace gtrace {

/// Parametrization of the critical manifold M = {Im f = 0, f' = 0}; k = 0 is a point.
struct ManifoldChart {
  int k = 0;
  Vec lo, hi;                            // parameter box (empty for k = 0)
  std::function<Vec(const Vec& u)> map;  // parameters -> point of R^d
};

struct OscillatoryProblem {
  std::string name;
  int d = 1;
  std::function<cplx(const Vec&)> f;
  std::function<CMat(const Vec&)> f_hessian;  // optional; central differences otherwise
  std::function<double(const Vec&)> a;
  Vec box_lo, box_hi;  // supp a lies inside
  ManifoldChart manifold;
  std::vector<double> omega_list;
};

namespace detail {

/// Adaptive Gauss-Kronrod over a box, nested one axis at a time.
inline cplx nested_gk(const std::function<cplx(const Vec&)>& F, const Vec& lo, const Vec& hi, double tol,
                      int max_depth, double& worst_rel_err) {
  const Eigen::Index d = lo.size();
  Vec x(d);
  std::function<cplx(Eigen::Index)> level = [&](Eigen::Index axis) -> cplx {
    double err = 0.0, l1 = 0.0;
    auto g = [&](double s) {
      x(axis) = s;
      return axis + 1 == d ? F(x) : level(axis + 1);
    };
    const cplx v =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, lo(axis), hi(axis), max_depth, tol, &err, &l1);
    worst_rel_err = std::max(worst_rel_err, err / std::max(l1, 1e-300));
    return v;
  };
  if (d == 0) return F(x);
  return level(0);
}

inline CMat fd_hessian(const std::function<cplx(const Vec&)>& f, const Vec& x) {
  const Eigen::Index d = x.size();
  const double h = 1e-4 * std::max(1.0, x.norm());
  CMat H(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      Vec pp = x, pm = x, mp = x, mm = x;
      pp(i) += h, pp(j) += h;
      pm(i) += h, pm(j) -= h;
      mp(i) -= h, mp(j) += h;
      mm(i) -= h, mm(j) -= h;
      H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return H;
}

inline Mat chart_jacobian(const ManifoldChart& c, const Vec& u) {
  const Vec x0 = c.map(u);
  Mat Jc(x0.size(), c.k);
  for (int i = 0; i < c.k; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(u(i)));
    Vec up = u, um = u;
    up(i) += h;
    um(i) -= h;
    Jc.col(i) = (c.map(up) - c.map(um)) / (2.0 * h);
  }
  return Jc;
}

}  // namespace detail

struct QuadratureOptions {
  double rel_tol = 1e-6;
  int max_depth = 18;
};

/// J(omega) by adaptive quadrature; throws when the error estimate stays above rel_tol.
inline cplx quadrature_J(const OscillatoryProblem& pb, double omega, const QuadratureOptions& opts = {}) {
  if (!(omega > 0.0)) throw ConfigError("omega", "must be positive");
  if (pb.box_lo.size() != pb.d || pb.box_hi.size() != pb.d) throw ConfigError("box", "dimension mismatch");
  double worst = 0.0;
  auto F = [&](const Vec& x) -> cplx {
    const double av = pb.a(x);
    if (av == 0.0) return 0.0;
    return std::exp(kI * omega * pb.f(x)) * av;
  };
  const cplx J = detail::nested_gk(F, pb.box_lo, pb.box_hi, 0.1 * opts.rel_tol, opts.max_depth, worst);
  if (worst > opts.rel_tol) {
    throw ConvergenceError("quadrature_J(" + pb.name + "): refinement budget exceeded at omega = " +
                           std::to_string(omega) + " (relative error estimate " + std::to_string(worst) + ")");
  }
  return J;
}

/// [det(f''(m)|N / i)]_*^{-1/2} at a manifold point with tangent basis Tm (d x k).
inline cplx normal_factor(const CMat& hess, const Mat& Tm) {
  const Eigen::Index d = hess.rows();
  Mat Nb;
  if (Tm.cols() == 0) {
    Nb = Mat::Identity(d, d);
  } else {
    Eigen::HouseholderQR<Mat> qr(Tm);
    Nb = Mat(qr.householderQ()).rightCols(d - Tm.cols());
  }
  const CMat R = Nb.transpose().cast<cplx>() * hess * Nb.cast<cplx>() / kI;
  Eigen::ComplexEigenSolver<CMat> es(R);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const cplx l = es.eigenvalues()(i);
    if (l.real() < -1e-10 * std::max(1.0, std::abs(l))) {
      throw BranchError("leading_coefficient_c0: eigenvalue of f''|N / i with negative real part (Im f >= 0 violated)");
    }
    if (std::abs(l) < 1e-8) throw BranchError("leading_coefficient_c0: f''|N is degenerate on the manifold");
  }
  return inv_sqrt_det_star(R);
}

inline cplx leading_coefficient_c0(const OscillatoryProblem& pb, double omega, const QuadratureOptions& opts = {}) {
  const auto& ch = pb.manifold;
  if (!ch.map) throw ConfigError("manifold", "chart is required");
  auto hess = [&](const Vec& x) { return pb.f_hessian ? pb.f_hessian(x) : detail::fd_hessian(pb.f, x); };
  const Vec m0 = ch.map(ch.k == 0 ? Vec(0) : Vec(ch.lo));
  const cplx phase = std::exp(kI * omega * pb.f(m0));
  auto integrand = [&](const Vec& u) -> cplx {
    const Vec x = ch.map(u);
    const double av = pb.a(x);
    if (av == 0.0) return 0.0;
    const Mat Jc = detail::chart_jacobian(ch, u);
    const double vol = ch.k == 0 ? 1.0 : std::sqrt((Jc.transpose() * Jc).determinant());
    return normal_factor(hess(x), Jc) * av * vol;
  };
  if (ch.k == 0) return phase * integrand(Vec(0));
  double worst = 0.0;
  const cplx I = detail::nested_gk(integrand, ch.lo, ch.hi, 1e-10, opts.max_depth, worst);
  if (worst > opts.rel_tol) throw ConvergenceError("leading_coefficient_c0: chart quadrature not converged");
  return phase * I;
}

struct ExpansionReport {
  std::string name;
  std::vector<double> omegas;
  std::vector<cplx> J;
  std::vector<cplx> c0;
  std::vector<double> residuals;  // |J (omega / 2 pi)^{(d-k)/2} - c0|
  double exponent = 0.0;          // minus the fitted log-log slope
  bool accepted = false;          // exponent in [0.7, 1.3]
  double modulus_mismatch = 0.0;  // ||J (omega/2pi)^{(d-k)/2}| - |c0|| / |c0| at the largest omega
};

inline ExpansionReport verify_expansion(const OscillatoryProblem& pb, const QuadratureOptions& opts = {}) {
  if (pb.omega_list.size() < 2) throw ConfigError("omega_list", "need at least two frequencies for a fit");
  const auto [mn, mx] = std::minmax_element(pb.omega_list.begin(), pb.omega_list.end());
  if (*mx < 10.0 * *mn * (1.0 - 1e-12)) throw ConfigError("omega_list", "must span at least one decade");
  ExpansionReport r;
  r.name = pb.name;
  r.omegas = pb.omega_list;
  std::sort(r.omegas.begin(), r.omegas.end());
  const double half = 0.5 * (pb.d - pb.manifold.k);
  for (double w : r.omegas) {
    const cplx J = quadrature_J(pb, w, opts);
    const cplx c = leading_coefficient_c0(pb, w, opts);
    r.J.push_back(J);
    r.c0.push_back(c);
    r.residuals.push_back(std::abs(J * std::pow(w / (2.0 * kPi), half) - c));
  }
  for (std::size_t i = 1; i < r.residuals.size(); ++i) {
    if (!(r.residuals[i] < r.residuals[i - 1])) {
      throw ConvergenceError("verify_expansion(" + pb.name + "): residuals are not monotone in omega");
    }
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(r.omegas.size());
  for (std::size_t i = 0; i < r.omegas.size(); ++i) {
    const double x = std::log(r.omegas[i]), y = std::log(r.residuals[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  r.exponent = -(m * sxy - sx * sy) / (m * sxx - sx * sx);
  r.accepted = r.exponent >= 0.7 && r.exponent <= 1.3;
  const double wl = r.omegas.back();
  const double cl = std::abs(r.c0.back());
  if (cl > 0.0) r.modulus_mismatch = std::abs(std::abs(r.J.back() * std::pow(wl / (2.0 * kPi), half)) - cl) / cl;
  return r;
}

// ---- test problems ----

/// exp(1 - 1/(1 - s^2)) on |s| < 1: smooth, compactly supported, value 1 at 0.
inline double unit_bump(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

inline std::vector<double> log_omegas(double lo, double hi, int count) {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = lo * std::pow(hi / lo, count == 1 ? 0.0 : double(i) / (count - 1));
  return out;
}

/// d = 1, f = x^2/2, a = unit bump: c0 = e^{i pi/4}.
inline OscillatoryProblem fresnel_problem() {
  OscillatoryProblem p;
  p.name = "fresnel";
  p.d = 1;
  p.f = [](const Vec& x) { return cplx(0.5 * x(0) * x(0)); };
  p.f_hessian = [](const Vec&) { return CMat::Identity(1, 1); };
  p.a = [](const Vec& x) { return unit_bump(x(0)); };
  p.box_lo = Vec::Constant(1, -1.0);
  p.box_hi = Vec::Constant(1, 1.0);
  p.manifold.k = 0;
  p.manifold.map = [](const Vec&) { return Vec::Zero(1); };
  p.omega_list = log_omegas(100.0, 1000.0, 6);
  return p;
}

/// d = 2, f = (|x|^2 - 1)^2, radial a supported in 1/2 < |x| < 3/2; M is the unit
/// circle with f''|N = 8, so c0 = 8^{-1/2} e^{i pi/4} int_{|x|=1} a dl.
inline OscillatoryProblem circle_problem() {
  OscillatoryProblem p;
  p.name = "circle";
  p.d = 2;
  p.f = [](const Vec& x) {
    const double r2 = x.squaredNorm();
    return cplx((r2 - 1.0) * (r2 - 1.0));
  };
  p.f_hessian = [](const Vec& x) {
    const double r2 = x.squaredNorm();
    const Mat H = 4.0 * (r2 - 1.0) * Mat::Identity(2, 2) + 8.0 * x * x.transpose();
    return CMat(H.cast<cplx>());
  };
  p.a = [](const Vec& x) { return unit_bump(2.0 * (x.norm() - 1.0)); };
  p.box_lo = Vec::Constant(2, -1.5);
  p.box_hi = Vec::Constant(2, 1.5);
  p.manifold.k = 1;
  p.manifold.lo = Vec::Constant(1, 0.0);
  p.manifold.hi = Vec::Constant(1, 2.0 * kPi);
  p.manifold.map = [](const Vec& u) {
    Vec x(2);
    x << std::cos(u(0)), std::sin(u(0));
    return x;
  };
  p.omega_list = log_omegas(100.0, 1000.0, 6);
  return p;
}

/// Odd amplitude with a cubic phase: c0 = 0 and the residual is |c1|/omega.
inline OscillatoryProblem odd_amplitude_problem() {
  OscillatoryProblem p = fresnel_problem();
  p.name = "odd_amplitude";
  p.f = [](const Vec& x) { return cplx(0.5 * x(0) * x(0) + x(0) * x(0) * x(0) / 6.0); };
  p.f_hessian = [](const Vec& x) { return CMat::Constant(1, 1, 1.0 + x(0)); };
  p.a = [](const Vec& x) { return x(0) * unit_bump(x(0)); };
  return p;
}

// ---- phase-Hessian identity at an orbit ----

struct HessianIdentityReport {
  PhaseHessianReport hessian;
  int k = 0;
  int im_samples = 0;
  int im_violations = 0;          // samples with Im Phi < 0
  double im_identity_worst = 0.0;  // max |2 Im Phi - |y-q|^2 - |U^{-1}(y-q_t)|^2| / max(1, rhs)
};

struct HessianCheckOptions {
  double tol = 1e-6;
  int samples = 1000;
  double spread = 0.3;
  unsigned seed = 0;
  IntegrationOptions integration;
};

/// Assembles Phi_E'' at the orbit, checks the null space and the determinant identity,
/// and samples Im Phi_E >= 0 near the orbit. Throws on any failure.
inline HessianIdentityReport hessian_identity_check(const HamiltonianSystem& sys, const PeriodicOrbit& orb,
                                                    const HessianCheckOptions& opts = {}) {
  if (sys.dim() != orb.n) throw Error("hessian_identity_check: system and orbit dimensions differ");
  if (!orb.nondegenerate) throw DegenerateOrbitError("hessian_identity_check: orbit is degenerate");
  HessianIdentityReport r;
  r.k = orb.k;
  r.hessian = phase_hessian_at_orbit(sys.gradient(orb.alpha0), orb.F, orb.det_P_minus_I);
  const auto& h = r.hessian;
  if (h.null_dimension != 1) {
    throw DegenerateOrbitError("hessian_identity_check: null space of Phi'' has dimension " +
                               std::to_string(h.null_dimension) + " (expected 1)");
  }
  if (h.null_residual > opts.tol || h.null_alignment > opts.tol) {
    throw IdentityError("hessian_identity_check: null vector is not (0, H_p, -H_q, H_p)");
  }
  if (h.identity_residual > opts.tol) {
    throw IdentityError("hessian_identity_check: determinant identity violated (relative residual " +
                        std::to_string(h.identity_residual) + ")");
  }

  const int n = orb.n;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> N(0.0, opts.spread);
  std::uniform_real_distribution<double> U01(0.0, 1.0);
  const double Tg = orb.T();
  const double t_lo = std::min(0.0, Tg) - 1.0, t_hi = std::max(0.0, Tg) + 1.0;
  IntegrationOptions io = opts.integration;
  io.report_dt = 0.0;
  io.observable = nullptr;
  for (int s = 0; s < opts.samples; ++s) {
    Vec alpha = integrate(sys, orb.alpha0, U01(rng) * orb.T_star, io).final_state();
    for (int i = 0; i < 2 * n; ++i) alpha(i) += N(rng);
    Vec y = alpha.head(n);
    for (int i = 0; i < n; ++i) y(i) += N(rng);
    const double t = t_lo + (t_hi - t_lo) * U01(rng);
    const auto res = integrate_with_jacobi(sys, alpha, t, io);
    const std::size_t last = res.flow.size() - 1;
    const Vec at = res.trajectory.final_state();
    const cplx phi = phase_function(orb.E, t, y, alpha, at, res.trajectory.action_S(last), res.flow.M(last));
    const CVec w = (y - at.head(n)).cast<cplx>();
    const double rhs = (y - alpha.head(n)).squaredNorm() + res.flow.U(last).partialPivLu().solve(w).squaredNorm();
    r.im_identity_worst = std::max(r.im_identity_worst, std::abs(2.0 * phi.imag() - rhs) / std::max(1.0, rhs));
    if (phi.imag() < 0.0) ++r.im_violations;
    ++r.im_samples;
  }
  if (r.im_violations > 0) {
    throw IdentityError("hessian_identity_check: Im Phi_E < 0 at " + std::to_string(r.im_violations) + " samples");
  }
  return r;
}

}  // namespace gtrace
