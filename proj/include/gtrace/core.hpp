// Shared numeric types and the exception hierarchy used across gtrace.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gtrace {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed experiment or system configuration; the message names the field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Step-size underflow, energy drift, or a singular linearized flow.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver (Newton, adaptive quadrature) exhausted its budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// The eigenvalue-1 space of a monodromy matrix is not two dimensional.
class DegenerateOrbitError : public Error {
 public:
  using Error::Error;
};

/// The continuous branch of det U could not be resolved to a fourth root of unity.
class BranchError : public Error {
 public:
  using Error::Error;
};

/// Spatial grid too small or too coarse for the requested state or energy.
class GridError : public Error {
 public:
  using Error::Error;
};

/// A numerical identity failed beyond tolerance (points at a convention bug upstream).
class IdentityError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

/// Principal-branch product of reciprocal square roots of the eigenvalues.
/// Every eigenvalue must lie in the closed right half plane.
inline cplx inv_sqrt_det_star(const CMat& m) {
  if (m.rows() == 0) return 1.0;
  Eigen::ComplexEigenSolver<CMat> es(m, false);
  cplx out = 1.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    out /= std::sqrt(es.eigenvalues()(i));
  }
  return out;
}

}  // namespace gtrace
