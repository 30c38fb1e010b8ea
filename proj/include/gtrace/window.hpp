// Spectral window: g with compactly supported Fourier transform ghat, and the
// energy cutoff chi.
//
// Fourier convention: ghat(t) = int g(x) e^{-ixt} dx, g(x) = (2 pi)^{-1} int ghat(t) e^{ixt} dt.
#pragma once

#include "gtrace/core.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace gtrace {

/// C-infinity step: 0 for u <= 0, 1 for u >= 1.
inline double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / u);
  const double b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

class SpectralWindow {
 public:
  /// Default family "bump": ghat(t) = exp(-t^2 / (T^2 - t^2)) on |t| < T, so ghat(0) = 1.
  SpectralWindow(double T, double E, double dE, std::string family = "bump")
      : T_(T), E_(E), dE_(dE), family_(std::move(family)) {
    if (!(T_ > 0.0)) throw ConfigError("window.T", "must be positive");
    if (!(dE_ > 0.0)) throw ConfigError("dE", "must be positive");
    if (family_ == "bump") {
      ghat_ = [T](double t) {
        const double a = std::abs(t);
        if (a >= T) return 0.0;
        return std::exp(-t * t / (T * T - t * t));
      };
    } else if (family_ == "bump_squared") {
      ghat_ = [T](double t) {
        const double a = std::abs(t);
        if (a >= T) return 0.0;
        return std::exp(-2.0 * t * t / (T * T - t * t));
      };
    } else {
      throw ConfigError("window.family", "unknown ghat family '" + family_ + "' (bump, bump_squared)");
    }
  }

  double T() const { return T_; }
  double E() const { return E_; }
  double dE() const { return dE_; }
  const std::string& family() const { return family_; }

  double ghat(double t) const { return ghat_(t); }

  /// g(x) = pi^{-1} int_0^T ghat(t) cos(x t) dt for the even real families. The
  /// trapezoid rule is spectrally accurate here since every derivative of ghat
  /// vanishes at t = T; the node count follows the oscillation |x| T.
  double g(double x) const {
    const int m = std::max(400, static_cast<int>(std::ceil(6.0 * std::abs(x) * T_ / kPi)) + 64);
    const double h = T_ / m;
    double acc = 0.5 * ghat_(0.0);
    for (int i = 1; i < m; ++i) {
      const double t = i * h;
      acc += ghat_(t) * std::cos(x * t);
    }
    return acc * h / kPi;
  }

  /// chi = 1 on [E - dE/2, E + dE/2], 0 outside (E - dE, E + dE), smooth in between.
  double chi(double e) const {
    const double a = std::abs(e - E_);
    if (a >= dE_) return 0.0;
    return smooth_step((dE_ - a) / (0.5 * dE_));
  }

 private:
  double T_, E_, dE_;
  std::string family_;
  std::function<double(double)> ghat_;
};

/// `points` equally spaced values on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, int points) {
  if (points < 1) throw Error("linspace: need at least one point");
  std::vector<double> out(points);
  if (points == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < points; ++i) out[i] = lo + (hi - lo) * i / (points - 1);
  return out;
}

}  // namespace gtrace
