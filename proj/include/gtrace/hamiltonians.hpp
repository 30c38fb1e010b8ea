// Classical Hamiltonian systems H(q, p) and the builtin benchmark family.
//
// Builtins use the mechanical convention H = |p|^2 + V(q) (no factor 1/2), so
// that qdot = 2p and the quantum counterpart is -hbar^2 Laplacian + V.
#pragma once

#include "gtrace/core.hpp"
#include "gtrace/symplectic.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

namespace gtrace {

/// alpha = (q, p) in R^{2n}.
struct PhaseSpacePoint {
  Vec q;
  Vec p;

  PhaseSpacePoint(Vec q_in, Vec p_in) : q(std::move(q_in)), p(std::move(p_in)) {
    if (q.size() < 1 || q.size() != p.size()) {
      throw Error("PhaseSpacePoint: q and p must have equal length n >= 1");
    }
    if (!q.allFinite() || !p.allFinite()) {
      throw Error("PhaseSpacePoint: non-finite component");
    }
  }

  static PhaseSpacePoint from_vector(const Vec& z) {
    if (z.size() < 2 || z.size() % 2 != 0) {
      throw Error("PhaseSpacePoint: phase-space vector must have even length >= 2");
    }
    const Eigen::Index n = z.size() / 2;
    return {z.head(n), z.tail(n)};
  }

  int dim() const { return static_cast<int>(q.size()); }

  Vec vector() const {
    Vec z(2 * q.size());
    z << q, p;
    return z;
  }
};

using ScalarField = std::function<double(const Vec&)>;
using VectorField = std::function<Vec(const Vec&)>;
using MatrixField = std::function<Mat(const Vec&)>;

struct SystemDescriptor {
  std::string name;
  std::map<std::string, double> params;

  std::string str() const {
    std::ostringstream os;
    os << name;
    if (!params.empty()) {
      os << '(';
      bool first = true;
      for (const auto& [k, v] : params) {
        os << (first ? "" : ", ") << k << '=' << v;
        first = false;
      }
      os << ')';
    }
    return os.str();
  }
};

/// Potential V(q) of a mechanical system H = |p|^2 + V(q).
struct Potential {
  ScalarField value;
  VectorField gradient;
  MatrixField hessian;
};

struct FiniteDifferenceResult {
  Vec grad;
  Mat hess;
};

/// Default step 1e-5 * max(1, |z|).
inline double default_fd_step(const Vec& z) { return 1e-5 * std::max(1.0, z.norm()); }

/// Central-difference gradient and Hessian of `eval` at z.
inline FiniteDifferenceResult finite_difference_derivatives(const ScalarField& eval, const Vec& z,
                                                            double h) {
  if (!(h > 0.0)) throw Error("finite_difference_derivatives: step must be positive");
  const Eigen::Index d = z.size();
  auto f = [&](const Vec& x) {
    const double v = eval(x);
    if (!std::isfinite(v)) throw Error("finite_difference_derivatives: non-finite value in stencil");
    return v;
  };
  FiniteDifferenceResult out{Vec::Zero(d), Mat::Zero(d, d)};
  const double f0 = f(z);
  Vec x = z;
  for (Eigen::Index i = 0; i < d; ++i) {
    x(i) = z(i) + h;
    const double fp = f(x);
    x(i) = z(i) - h;
    const double fm = f(x);
    x(i) = z(i);
    out.grad(i) = (fp - fm) / (2.0 * h);
    out.hess(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      double acc = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          x(i) = z(i) + si * h;
          x(j) = z(j) + sj * h;
          acc += si * sj * f(x);
        }
      }
      x(i) = z(i);
      x(j) = z(j);
      out.hess(i, j) = out.hess(j, i) = acc / (4.0 * h * h);
    }
  }
  return out;
}

/// Immutable classical system on R^{2n} with energy, gradient and Hessian.
class HamiltonianSystem {
 public:
  HamiltonianSystem(int dim, ScalarField eval, VectorField grad, MatrixField hess,
                    SystemDescriptor descriptor, std::optional<Potential> potential = std::nullopt)
      : dim_(dim),
        eval_(std::move(eval)),
        grad_(std::move(grad)),
        hess_(std::move(hess)),
        descriptor_(std::move(descriptor)),
        potential_(std::move(potential)) {
    if (dim_ < 1) throw Error("HamiltonianSystem: dimension must be >= 1");
  }

  /// H = |p|^2 + V(q).
  static HamiltonianSystem mechanical(int dim, Potential V, SystemDescriptor descriptor) {
    auto eval = [V](const Vec& z) {
      const Eigen::Index n = z.size() / 2;
      return z.tail(n).squaredNorm() + V.value(z.head(n));
    };
    auto grad = [V](const Vec& z) {
      const Eigen::Index n = z.size() / 2;
      Vec g(2 * n);
      g << V.gradient(z.head(n)), 2.0 * z.tail(n);
      return g;
    };
    auto hess = [V](const Vec& z) {
      const Eigen::Index n = z.size() / 2;
      Mat h = Mat::Zero(2 * n, 2 * n);
      h.topLeftCorner(n, n) = V.hessian(z.head(n));
      h.bottomRightCorner(n, n) = 2.0 * Mat::Identity(n, n);
      return h;
    };
    return {dim, eval, grad, hess, std::move(descriptor), std::move(V)};
  }

  /// User-supplied energy only; derivatives by central differences with step
  /// `h` (or the default rule when h <= 0).
  static HamiltonianSystem from_energy(int dim, ScalarField eval, SystemDescriptor descriptor,
                                       double h = 0.0) {
    auto step = [h](const Vec& z) { return h > 0.0 ? h : default_fd_step(z); };
    auto grad = [eval, step](const Vec& z) {
      return finite_difference_derivatives(eval, z, step(z)).grad;
    };
    auto hess = [eval, step](const Vec& z) {
      return finite_difference_derivatives(eval, z, 1e2 * step(z)).hess;
    };
    return {dim, eval, grad, hess, std::move(descriptor)};
  }

  int dim() const { return dim_; }
  double energy(const Vec& z) const { return eval_(z); }
  Vec gradient(const Vec& z) const { return grad_(z); }
  Mat hessian(const Vec& z) const { return hess_(z); }

  /// J grad H = (H_p, -H_q).
  Vec vector_field(const Vec& z) const {
    const Vec g = grad_(z);
    Vec f(g.size());
    f << g.tail(dim_), -g.head(dim_);
    return f;
  }

  const SystemDescriptor& descriptor() const { return descriptor_; }
  const std::optional<Potential>& potential() const { return potential_; }
  bool is_mechanical() const { return potential_.has_value(); }

  /// The system c * H (same descriptor with a "scale" entry).
  HamiltonianSystem scaled(double c) const {
    SystemDescriptor d = descriptor_;
    d.params["scale"] = c * (d.params.count("scale") ? d.params.at("scale") : 1.0);
    auto e = eval_;
    auto g = grad_;
    auto h = hess_;
    return {dim_, [e, c](const Vec& z) { return c * e(z); },
            [g, c](const Vec& z) { return Vec(c * g(z)); },
            [h, c](const Vec& z) { return Mat(c * h(z)); }, std::move(d)};
  }

 private:
  int dim_;
  ScalarField eval_;
  VectorField grad_;
  MatrixField hess_;
  SystemDescriptor descriptor_;
  std::optional<Potential> potential_;
};

enum class Builtin { ho1d, quartic1d, ho2d_aniso, henon_heiles_bounded };

inline Builtin parse_builtin(const std::string& name) {
  if (name == "ho1d") return Builtin::ho1d;
  if (name == "quartic1d") return Builtin::quartic1d;
  if (name == "ho2d_aniso") return Builtin::ho2d_aniso;
  if (name == "henon_heiles_bounded") return Builtin::henon_heiles_bounded;
  throw Error("unknown builtin system '" + name + "'");
}

inline std::string builtin_name(Builtin b) {
  switch (b) {
    case Builtin::ho1d: return "ho1d";
    case Builtin::quartic1d: return "quartic1d";
    case Builtin::ho2d_aniso: return "ho2d_aniso";
    case Builtin::henon_heiles_bounded: return "henon_heiles_bounded";
  }
  return "unknown";
}

inline constexpr double kGoldenRatio = std::numbers::phi;

namespace detail {

inline double take_param(std::map<std::string, double>& params, const std::string& key,
                         double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  const double v = it->second;
  params.erase(it);
  if (!std::isfinite(v)) throw Error("builtin parameter '" + key + "' must be finite");
  return v;
}

}  // namespace detail

/// Builtin benchmark systems:
///   ho1d                  H = p^2 + q^2
///   quartic1d  {a}        H = p^2 + q^4 + a q^2                      (a = 0)
///   ho2d_aniso {omega}    H = |p|^2 + q1^2 + omega^2 q2^2            (omega = golden ratio)
///   henon_heiles_bounded {lambda, mu}
///                         H = |p|^2 + |q|^2 + lambda (q1^2 q2 - q2^3/3) + mu |q|^4
///                                                                    (lambda = 1, mu = 0.1)
inline HamiltonianSystem make_builtin(Builtin which, std::map<std::string, double> params = {}) {
  SystemDescriptor desc{builtin_name(which), {}};
  Potential V;
  int n = 1;
  switch (which) {
    case Builtin::ho1d: {
      V.value = [](const Vec& q) { return q(0) * q(0); };
      V.gradient = [](const Vec& q) { return Vec::Constant(1, 2.0 * q(0)); };
      V.hessian = [](const Vec&) { return Mat::Constant(1, 1, 2.0); };
      break;
    }
    case Builtin::quartic1d: {
      const double a = detail::take_param(params, "a", 0.0);
      desc.params["a"] = a;
      V.value = [a](const Vec& q) {
        const double x2 = q(0) * q(0);
        return x2 * x2 + a * x2;
      };
      V.gradient = [a](const Vec& q) {
        return Vec::Constant(1, 4.0 * q(0) * q(0) * q(0) + 2.0 * a * q(0));
      };
      V.hessian = [a](const Vec& q) { return Mat::Constant(1, 1, 12.0 * q(0) * q(0) + 2.0 * a); };
      break;
    }
    case Builtin::ho2d_aniso: {
      n = 2;
      const double w = detail::take_param(params, "omega", kGoldenRatio);
      if (!(w > 0.0)) throw Error("ho2d_aniso: omega must be positive");
      desc.params["omega"] = w;
      const double w2 = w * w;
      V.value = [w2](const Vec& q) { return q(0) * q(0) + w2 * q(1) * q(1); };
      V.gradient = [w2](const Vec& q) {
        Vec g(2);
        g << 2.0 * q(0), 2.0 * w2 * q(1);
        return g;
      };
      V.hessian = [w2](const Vec&) {
        Mat h = Mat::Zero(2, 2);
        h(0, 0) = 2.0;
        h(1, 1) = 2.0 * w2;
        return h;
      };
      break;
    }
    case Builtin::henon_heiles_bounded: {
      n = 2;
      const double lam = detail::take_param(params, "lambda", 1.0);
      const double mu = detail::take_param(params, "mu", 0.1);
      if (!(mu > 0.0)) {
        throw Error("henon_heiles_bounded: mu must be positive (otherwise sublevel sets are unbounded)");
      }
      desc.params["lambda"] = lam;
      desc.params["mu"] = mu;
      V.value = [lam, mu](const Vec& q) {
        const double x = q(0), y = q(1), r2 = x * x + y * y;
        return r2 + lam * (x * x * y - y * y * y / 3.0) + mu * r2 * r2;
      };
      V.gradient = [lam, mu](const Vec& q) {
        const double x = q(0), y = q(1), r2 = x * x + y * y;
        Vec g(2);
        g << 2.0 * x + 2.0 * lam * x * y + 4.0 * mu * r2 * x,
            2.0 * y + lam * (x * x - y * y) + 4.0 * mu * r2 * y;
        return g;
      };
      V.hessian = [lam, mu](const Vec& q) {
        const double x = q(0), y = q(1), r2 = x * x + y * y;
        Mat h(2, 2);
        h(0, 0) = 2.0 + 2.0 * lam * y + 4.0 * mu * (r2 + 2.0 * x * x);
        h(1, 1) = 2.0 - 2.0 * lam * y + 4.0 * mu * (r2 + 2.0 * y * y);
        h(0, 1) = h(1, 0) = 2.0 * lam * x + 8.0 * mu * x * y;
        return h;
      };
      break;
    }
  }
  if (!params.empty()) {
    throw Error("builtin '" + desc.name + "': unknown parameter '" + params.begin()->first + "'");
  }
  return HamiltonianSystem::mechanical(n, std::move(V), std::move(desc));
}

inline HamiltonianSystem make_builtin(const std::string& name,
                                      std::map<std::string, double> params = {}) {
  return make_builtin(parse_builtin(name), std::move(params));
}

}  // namespace gtrace
