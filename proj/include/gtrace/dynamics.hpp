// Hamilton's equations with the linearized (Jacobi) flow and action integrals.
//
// State layout for the adaptive integrator:
//   [ z (2n) | F column-major (4n^2, optional) | int p.qdot ds | int A(q_s) ds ]
// Backward time is handled by integrating the sign-flipped vector field in
// s = |t|, so the controller always sees a positive step.
#pragma once

#include "gtrace/core.hpp"
#include "gtrace/hamiltonians.hpp"
#include "gtrace/symplectic.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gtrace {

struct IntegrationOptions {
  double rtol = 1e-12;
  double atol = 1e-12;
  double tol_E = 1e-9;        // energy-drift budget relative to max(1, |H0|)
  double report_dt = 0.0;     // spacing of the reporting grid; <= 0 reports only the endpoints
  double initial_step = 1e-3;
  double min_step = 1e-13;
  long max_steps = 5'000'000;
  std::function<double(const Vec& q)> observable;  // A(q); integrated along the path when set
};

/// Time-sampled solution of zdot = J grad H with running action integrals.
struct Trajectory {
  int n = 0;
  double energy = 0.0;  // H(alpha_0)
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<double> action_pq;     // int_0^t p . qdot ds
  std::vector<double> observable;    // int_0^t A(q_s) ds (zeros when no observable given)
  double max_energy_drift = 0.0;
  long steps_accepted = 0;
  long steps_rejected = 0;

  std::size_t size() const { return times.size(); }
  const Vec& final_state() const { return states.back(); }
  Vec q(std::size_t i) const { return states[i].head(n); }
  Vec p(std::size_t i) const { return states[i].tail(n); }

  /// S(q, p; t) = int p.qdot - t H.
  double action_S(std::size_t i) const { return action_pq[i] - times[i] * energy; }

  /// delta(alpha, t) = int p.qdot - t H - (p_t.q_t - p.q)/2.
  double action_delta(std::size_t i) const {
    const double pq0 = p(0).dot(q(0));
    const double pqt = p(i).dot(q(i));
    return action_pq[i] - times[i] * energy - 0.5 * (pqt - pq0);
  }
};

/// F(t) along a trajectory together with the continuous argument of det U.
struct LinearizedFlow {
  int n = 0;
  std::vector<Mat> F;
  std::vector<double> arg_detU;  // unwrapped, starts at 0

  std::size_t size() const { return F.size(); }
  Blocks blocks(std::size_t i) const { return split_blocks(F[i]); }

  CMat U(std::size_t i) const {
    const Blocks b = blocks(i);
    return b.A.cast<cplx>() + kI * b.B.cast<cplx>();
  }
  CMat Vc(std::size_t i) const {
    const Blocks b = blocks(i);
    return b.C.cast<cplx>() + kI * b.D.cast<cplx>();
  }
  /// M = (C + iD)(A + iB)^{-1}.
  CMat M(std::size_t i) const {
    return U(i).transpose().partialPivLu().solve(Vc(i).transpose()).transpose();
  }
  cplx detU(std::size_t i) const { return U(i).determinant(); }

  /// (det U)_c^{-1/2} on the continuous branch.
  cplx detU_inv_sqrt(std::size_t i) const {
    const double mod = std::abs(detU(i));
    return std::polar(1.0 / std::sqrt(mod), -0.5 * arg_detU[i]);
  }
};

namespace detail {

using OdeState = std::vector<double>;

inline cplx det_u_from_state(const OdeState& x, int n) {
  const int d = 2 * n;
  Eigen::Map<const Mat> F(x.data() + d, d, d);
  CMat U = F.topLeftCorner(n, n).cast<cplx>() + kI * F.topRightCorner(n, n).cast<cplx>();
  return U.determinant();
}

}  // namespace detail

/// Integrates from alpha0 over [0, t_final] (t_final may be negative).
/// When `jacobi` is non-null the linearized flow is co-integrated.
inline Trajectory integrate_impl(const HamiltonianSystem& sys, const Vec& alpha0, double t_final,
                                 const IntegrationOptions& opts, LinearizedFlow* jacobi) {
  namespace odeint = boost::numeric::odeint;
  const int n = sys.dim();
  const int d = 2 * n;
  if (alpha0.size() != d) throw Error("integrate: initial point has wrong dimension");
  if (!alpha0.allFinite()) throw Error("integrate: non-finite initial point");
  if (!std::isfinite(t_final)) throw Error("integrate: non-finite final time");

  const bool with_F = jacobi != nullptr;
  const bool with_obs = static_cast<bool>(opts.observable);
  const std::size_t off_F = d;
  const std::size_t off_act = d + (with_F ? d * d : 0);
  const std::size_t dim = off_act + 2;
  const double sgn = t_final < 0.0 ? -1.0 : 1.0;
  const double s_final = std::abs(t_final);

  auto rhs = [&](const detail::OdeState& x, detail::OdeState& dx, double) {
    Eigen::Map<const Vec> z(x.data(), d);
    const Vec g = sys.gradient(z);
    for (int i = 0; i < n; ++i) {
      dx[i] = sgn * g(n + i);
      dx[n + i] = -sgn * g(i);
    }
    if (with_F) {
      const Mat H2 = sys.hessian(z);
      Eigen::Map<const Mat> F(x.data() + off_F, d, d);
      Eigen::Map<Mat> dF(dx.data() + off_F, d, d);
      // J H'' F = [H_pq; -H_qq] rows permuted.
      const Mat HF = H2 * F;
      dF.topRows(n) = sgn * HF.bottomRows(n);
      dF.bottomRows(n) = -sgn * HF.topRows(n);
    }
    dx[off_act] = sgn * z.tail(n).dot(g.tail(n));
    dx[off_act + 1] = with_obs ? sgn * opts.observable(z.head(n)) : 0.0;
  };

  detail::OdeState x(dim, 0.0);
  for (int i = 0; i < d; ++i) x[i] = alpha0(i);
  if (with_F) {
    for (int i = 0; i < d; ++i) x[off_F + i * d + i] = 1.0;
  }

  Trajectory tr;
  tr.n = n;
  tr.energy = sys.energy(alpha0);
  const double e_scale = std::max(1.0, std::abs(tr.energy));
  const double e_fail = 10.0 * opts.tol_E * e_scale;

  double arg_acc = 0.0;
  cplx det_prev = 1.0;

  auto record = [&](double s) {
    tr.times.push_back(sgn * s);
    tr.states.push_back(Eigen::Map<const Vec>(x.data(), d));
    tr.action_pq.push_back(x[off_act]);
    tr.observable.push_back(x[off_act + 1]);
    if (with_F) {
      jacobi->F.push_back(Eigen::Map<const Mat>(x.data() + off_F, d, d));
      jacobi->arg_detU.push_back(arg_acc);
    }
  };

  if (with_F) {
    jacobi->n = n;
    jacobi->F.clear();
    jacobi->arg_detU.clear();
  }
  record(0.0);
  if (s_final == 0.0) return tr;

  std::vector<double> report;
  if (opts.report_dt > 0.0) {
    const long m = std::max(1L, static_cast<long>(std::ceil(s_final / opts.report_dt - 1e-9)));
    for (long i = 1; i <= m; ++i) report.push_back(s_final * static_cast<double>(i) / m);
  } else {
    report.push_back(s_final);
  }

  using stepper_t = odeint::runge_kutta_fehlberg78<detail::OdeState>;
  auto stepper = odeint::make_controlled<stepper_t>(opts.atol, opts.rtol);

  double s = 0.0;
  double ds = std::min(opts.initial_step, s_final);
  std::size_t next = 0;
  detail::OdeState backup;
  while (next < report.size()) {
    const double target = report[next];
    const double remaining = target - s;
    const bool clipped = ds >= remaining;
    double trial = clipped ? remaining : ds;
    const double trial_start = trial;
    backup = x;
    const double s_before = s;
    const auto res = stepper.try_step(rhs, x, s, trial);
    if (res == odeint::fail) {
      ++tr.steps_rejected;
      ds = trial;
      if (ds < opts.min_step * std::max(1.0, s_final)) {
        throw IntegrationError("integrate: step size underflow at t = " + std::to_string(sgn * s));
      }
      continue;
    }
    if (with_F) {
      const cplx det_now = detail::det_u_from_state(x, n);
      // A + iB is invertible for every symplectic F; |det U| itself has no lower bound
      if (!(std::abs(det_now) > 1e-12)) {
        throw IntegrationError("integrate: U = A + iB became singular at t = " + std::to_string(sgn * s));
      }
      const double darg = std::arg(det_now / det_prev);
      if (std::abs(darg) >= 0.5 * kPi) {
        // a single step rotated det U by a quarter turn or more; retry smaller
        x = backup;
        s = s_before;
        ds = 0.5 * trial_start;
        ++tr.steps_rejected;
        if (ds < opts.min_step * std::max(1.0, s_final)) {
          throw IntegrationError("integrate: det U branch could not be resolved at t = " +
                                 std::to_string(sgn * s));
        }
        continue;
      }
      arg_acc += darg;
      det_prev = det_now;
    }
    ++tr.steps_accepted;
    if (tr.steps_accepted > opts.max_steps) throw IntegrationError("integrate: step budget exhausted");

    const double drift = std::abs(sys.energy(Eigen::Map<const Vec>(x.data(), d)) - tr.energy);
    tr.max_energy_drift = std::max(tr.max_energy_drift, drift);
    if (!(drift <= e_fail)) {
      throw IntegrationError("integrate: energy drift " + std::to_string(drift) + " exceeds " +
                             std::to_string(e_fail) + " at t = " + std::to_string(sgn * s));
    }

    if (clipped && trial_start == remaining) {
      s = target;  // land exactly on the reporting grid
      record(s);
      ++next;
      // keep the controller's suggestion unless the clip made it artificially small
      ds = std::max(trial, ds);
    } else {
      ds = trial;
    }
  }
  return tr;
}

inline Trajectory integrate(const HamiltonianSystem& sys, const Vec& alpha0, double t_final,
                            const IntegrationOptions& opts = {}) {
  return integrate_impl(sys, alpha0, t_final, opts, nullptr);
}

struct FlowResult {
  Trajectory trajectory;
  LinearizedFlow flow;
};

inline FlowResult integrate_with_jacobi(const HamiltonianSystem& sys, const Vec& alpha0, double t_final,
                                        const IntegrationOptions& opts = {}) {
  FlowResult out;
  out.trajectory = integrate_impl(sys, alpha0, t_final, opts, &out.flow);
  return out;
}

/// Smallest eigenvalue of Im M; positive along every valid track.
inline double min_eig_im_M(const CMat& M) {
  const Mat im = 0.5 * (M.imag() + M.imag().transpose());
  return Eigen::SelfAdjointEigenSolver<Mat>(im, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

/// CSV columns: t, q_1..q_n, p_1..p_n, S, delta[, arg_detU].
inline void write_trajectory_csv(const std::string& path, const Trajectory& tr,
                                 const LinearizedFlow* flow = nullptr) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << "t";
  for (int i = 0; i < tr.n; ++i) os << ",q" << i + 1;
  for (int i = 0; i < tr.n; ++i) os << ",p" << i + 1;
  os << ",S,delta";
  if (flow) os << ",arg_detU";
  os << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << tr.times[k];
    for (Eigen::Index i = 0; i < tr.states[k].size(); ++i) os << ',' << tr.states[k](i);
    os << ',' << tr.action_S(k) << ',' << tr.action_delta(k);
    if (flow) os << ',' << flow->arg_detU[k];
    os << '\n';
  }
}

}  // namespace gtrace
