// Exact quantum reference on a periodic box [-L, L)^n: Fourier-spectral grid
// Hamiltonian -hbar^2 Laplacian + V, dense eigensolver, the regularized density
// of states in the eigenbasis, and split-operator propagation.
#pragma once

#include "gtrace/core.hpp"
#include "gtrace/hamiltonians.hpp"
#include "gtrace/window.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gtrace {

/// Uniform periodic grid x_j = -L + j dx, dx = 2L/N, on each of n axes. Flattened
/// index i = i_0 + N i_1 (first axis fastest).
struct Grid {
  int n = 1;
  double L = 1.0;
  int N = 64;

  Grid() = default;
  Grid(int dim, double half_width, int points) : n(dim), L(half_width), N(points) {
    if (n < 1 || n > 2) throw GridError("Grid: only n = 1 or 2 is supported");
    if (!(L > 0.0)) throw GridError("Grid: L must be positive");
    if (N < 4 || N % 2 != 0) throw GridError("Grid: N must be even and >= 4");
  }

  double dx() const { return 2.0 * L / N; }
  Eigen::Index size() const { return n == 1 ? N : static_cast<Eigen::Index>(N) * N; }
  double coord(int j) const { return -L + j * dx(); }
  double cell() const { return std::pow(dx(), n); }

  Vec point(Eigen::Index i) const {
    Vec x(n);
    x(0) = coord(static_cast<int>(i % N));
    if (n == 2) x(1) = coord(static_cast<int>(i / N));
    return x;
  }
  /// Wavenumber of FFT bin m (0..N-1) in the standard ordering.
  double wavenumber(int m) const {
    const int mm = m < N / 2 ? m : m - N;
    return kPi * mm / L;
  }
  double k_max() const { return kPi * (N / 2) / L; }

  /// Distance in grid points from the nearest box edge along any axis.
  int edge_distance(Eigen::Index i) const {
    auto one = [&](int j) { return std::min(j, N - 1 - j); };
    int dist = one(static_cast<int>(i % N));
    if (n == 2) dist = std::min(dist, one(static_cast<int>(i / N)));
    return dist;
  }
};

inline double l2_norm(const CVec& psi, const Grid& g) { return std::sqrt(psi.squaredNorm() * g.cell()); }

inline cplx l2_inner(const CVec& a, const CVec& b, const Grid& g) { return a.dot(b) * g.cell(); }

/// Probability mass within `points` grid points of the box edge.
inline double boundary_mass(const CVec& psi, const Grid& g, int points = 5) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    if (g.edge_distance(i) < points) m += std::norm(psi(i));
  }
  return m * g.cell();
}

struct EigenPair {
  double E;
  CVec psi;  // real-valued, L2-normalized on the grid
};

class GridHamiltonian {
 public:
  /// Largest grid size accepted by the dense eigensolver.
  static constexpr Eigen::Index kMaxDense = 4096;

  /// Checked constructor: resolution rule N pi hbar / (2 L p_max) >= 8 with
  /// p_max = sqrt(E + dE - min V), and V > E + 2 dE on the box boundary.
  static GridHamiltonian build(const HamiltonianSystem& sys, double L, int N, double hbar, double E, double dE) {
    if (!sys.potential()) throw Error("GridHamiltonian: system must be of the form |p|^2 + V(q)");
    if (!(hbar > 0.0)) throw ConfigError("hbar", "must be positive");
    Grid grid(sys.dim(), L, N);
    GridHamiltonian gh(grid, sys.potential()->value, hbar);
    const double vmin = gh.V_.minCoeff();
    const double pmax = std::sqrt(std::max(E + dE - vmin, 1e-300));
    const double ppw = N * kPi * hbar / (2.0 * L * pmax);
    if (ppw < 8.0) {
      throw GridError("GridHamiltonian: " + std::to_string(ppw) +
                      " points per de Broglie wavelength at E + dE (need >= 8); increase N");
    }
    double vedge = 1e300;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      if (grid.edge_distance(i) == 0) vedge = std::min(vedge, gh.V_(i));
    }
    if (!(vedge > E + 2.0 * dE)) {
      throw GridError("GridHamiltonian: box too small, V on the boundary (" + std::to_string(vedge) +
                      ") must exceed E + 2 dE = " + std::to_string(E + 2.0 * dE));
    }
    gh.points_per_wavelength_ = ppw;
    return gh;
  }

  /// Unchecked constructor (used for free-particle tests).
  GridHamiltonian(Grid grid, const std::function<double(const Vec&)>& V, double hbar)
      : grid_(grid), hbar_(hbar), V_(grid.size()) {
    if (!(hbar > 0.0)) throw ConfigError("hbar", "must be positive");
    for (Eigen::Index i = 0; i < grid_.size(); ++i) V_(i) = V(grid_.point(i));
    if (!V_.allFinite()) throw GridError("GridHamiltonian: potential not finite on the grid");
  }

  const Grid& grid() const { return grid_; }
  double hbar() const { return hbar_; }
  const Vec& potential() const { return V_; }
  double points_per_wavelength() const { return points_per_wavelength_; }

  /// Dense real symmetric matrix of the discretized operator.
  Mat matrix() const {
    const Eigen::Index S = grid_.size();
    if (S > kMaxDense) {
      throw GridError("GridHamiltonian: dense eigensolve limited to " + std::to_string(kMaxDense) +
                      " grid points (N <= 64 per axis in 2D)");
    }
    const int N = grid_.N;
    // 1D spectral second-derivative matrix: K_jk = (1/N) sum_m k_m^2 cos(k_m (x_j - x_k))
    Vec kern(N);
    for (int d = 0; d < N; ++d) {
      double acc = 0.0;
      for (int m = 0; m < N; ++m) {
        const double k = grid_.wavenumber(m);
        acc += k * k * std::cos(k * d * grid_.dx());
      }
      kern(d) = acc / N;
    }
    auto K1 = [&](int a, int b) { return kern((a - b + N) % N); };
    const double h2 = hbar_ * hbar_;
    Mat H = Mat::Zero(S, S);
    if (grid_.n == 1) {
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) H(a, b) = h2 * K1(a, b);
    } else {
      for (int a1 = 0; a1 < N; ++a1) {
        for (int a0 = 0; a0 < N; ++a0) {
          const Eigen::Index ia = a0 + static_cast<Eigen::Index>(N) * a1;
          for (int b0 = 0; b0 < N; ++b0) H(ia, b0 + static_cast<Eigen::Index>(N) * a1) += h2 * K1(a0, b0);
          for (int b1 = 0; b1 < N; ++b1) H(ia, a0 + static_cast<Eigen::Index>(N) * b1) += h2 * K1(a1, b1);
        }
      }
    }
    H.diagonal() += V_;
    return H;
  }

  /// Applies the operator through FFTs (no dense matrix).
  CVec apply(const CVec& psi) const {
    CVec k = fft_forward(psi);
    for (Eigen::Index i = 0; i < k.size(); ++i) k(i) *= hbar_ * hbar_ * k2(i);
    CVec out = fft_inverse(k);
    return out + V_.cast<cplx>().cwiseProduct(psi);
  }

  /// All eigenpairs (cached after the first call), ascending.
  const std::vector<EigenPair>& spectrum() const {
    if (!spectrum_) {
      const Mat H = matrix();
      Eigen::SelfAdjointEigenSolver<Mat> es(H);
      if (es.info() != Eigen::Success) throw Error("GridHamiltonian: eigensolver failed");
      auto sp = std::make_shared<std::vector<EigenPair>>();
      const double scale = 1.0 / std::sqrt(grid_.cell());
      for (Eigen::Index j = 0; j < H.rows(); ++j) {
        sp->push_back({es.eigenvalues()(j), (es.eigenvectors().col(j) * scale).cast<cplx>()});
      }
      spectrum_ = sp;
    }
    return *spectrum_;
  }

  /// Eigenpairs with E_j in [E - dE, E + dE]. Fails when the window reaches the
  /// upper half of the grid spectrum, where discretization error dominates.
  std::vector<EigenPair> eigensolve_window(double E, double dE) const {
    const auto& sp = spectrum();
    std::vector<EigenPair> out;
    std::size_t top = 0;
    for (std::size_t j = 0; j < sp.size(); ++j) {
      if (sp[j].E >= E - dE && sp[j].E <= E + dE) {
        out.push_back(sp[j]);
        top = j;
      }
    }
    if (!out.empty() && top >= sp.size() / 2) {
      throw GridError("eigensolve_window: window reaches the unreliable top of the grid spectrum; increase N");
    }
    return out;
  }

  /// |k|^2 of FFT bin i.
  double k2(Eigen::Index i) const {
    const int N = grid_.N;
    const double k0 = grid_.wavenumber(static_cast<int>(i % N));
    if (grid_.n == 1) return k0 * k0;
    const double k1 = grid_.wavenumber(static_cast<int>(i / N));
    return k0 * k0 + k1 * k1;
  }

  CVec fft_forward(const CVec& psi) const { return fft(psi, true); }
  CVec fft_inverse(const CVec& phi) const { return fft(phi, false); }

 private:
  CVec fft(const CVec& in, bool forward) const {
    const int N = grid_.N;
    Eigen::FFT<double> f;
    CVec out = in;
    std::vector<cplx> a(N), b(N);
    auto run = [&](Eigen::Index start, Eigen::Index stride) {
      for (int j = 0; j < N; ++j) a[j] = out(start + j * stride);
      if (forward) {
        f.fwd(b.data(), a.data(), N);
      } else {
        f.inv(b.data(), a.data(), N);
      }
      for (int j = 0; j < N; ++j) out(start + j * stride) = b[j];
    };
    if (grid_.n == 1) {
      run(0, 1);
    } else {
      for (int r = 0; r < N; ++r) run(static_cast<Eigen::Index>(r) * N, 1);
      for (int c = 0; c < N; ++c) run(c, N);
    }
    return out;
  }

  Grid grid_;
  double hbar_;
  Vec V_;
  double points_per_wavelength_ = 0.0;
  mutable std::shared_ptr<const std::vector<EigenPair>> spectrum_;
};

struct ExactRho {
  std::vector<double> E_grid;
  std::vector<double> rho;
  std::vector<double> eigenvalues;   // eigenvalues inside the chi window
  std::vector<double> weights;       // chi(E_j)^2 <psi_j, A psi_j>
  double edge_fraction = 0.0;        // share of sum |weights| from states where chi < 1
  std::vector<std::string> warnings;
};

/// rho_A(E) = sum_j chi(E_j)^2 <psi_j, A psi_j> g((E - E_j)/hbar), A = 1 when no observable given.
inline ExactRho exact_rho(const GridHamiltonian& gh, const SpectralWindow& w, const std::vector<double>& E_grid,
                          const std::function<double(const Vec&)>& A = nullptr) {
  ExactRho out;
  out.E_grid = E_grid;
  const auto pairs = gh.eigensolve_window(w.E(), w.dE());
  const Grid& g = gh.grid();
  double total = 0.0, edge = 0.0;
  for (const auto& ep : pairs) {
    const double c = w.chi(ep.E);
    double a = 1.0;
    if (A) {
      a = 0.0;
      for (Eigen::Index i = 0; i < ep.psi.size(); ++i) a += A(g.point(i)) * std::norm(ep.psi(i));
      a *= g.cell();
    }
    out.eigenvalues.push_back(ep.E);
    out.weights.push_back(c * c * a);
    total += std::abs(c * c * a);
    if (c < 1.0) edge += std::abs(c * c * a);
  }
  out.edge_fraction = total > 0.0 ? edge / total : 0.0;
  out.rho.assign(E_grid.size(), 0.0);
  const double hbar = gh.hbar();
  for (std::size_t e = 0; e < E_grid.size(); ++e) {
    double acc = 0.0;
    for (std::size_t j = 0; j < out.eigenvalues.size(); ++j) {
      if (out.weights[j] != 0.0) acc += out.weights[j] * w.g((E_grid[e] - out.eigenvalues[j]) / hbar);
    }
    out.rho[e] = acc;
  }
  return out;
}

struct SplitOperatorOptions {
  int order = 4;                  // 2: Strang; 4: Yoshida composition of Strang steps
  double boundary_initial = 1e-10;
  double boundary_running = 1e-8;
  int check_every = 50;           // boundary-mass checks every this many steps
};

/// Strang splitting e^{-iV dt/2hbar} e^{-i hbar |k|^2 dt} e^{-iV dt/2hbar}, or its
/// fourth-order triple-jump composition.
inline CVec split_operator_propagate(const GridHamiltonian& gh, const CVec& psi0, double t, int steps,
                                     const SplitOperatorOptions& opts = {}) {
  const Grid& g = gh.grid();
  if (psi0.size() != g.size()) throw GridError("split_operator_propagate: state size does not match grid");
  if (steps < 1) throw Error("split_operator_propagate: steps must be >= 1");
  const double nrm = l2_norm(psi0, g);
  if (boundary_mass(psi0, g) > opts.boundary_initial * nrm * nrm) {
    throw GridError("split_operator_propagate: initial state has mass near the box edge");
  }
  if (t == 0.0) return psi0;
  const double hbar = gh.hbar();
  const Vec& V = gh.potential();

  std::vector<double> subs;
  if (opts.order == 2) {
    subs = {1.0};
  } else if (opts.order == 4) {
    const double c = std::cbrt(2.0);
    const double w1 = 1.0 / (2.0 - c), w0 = -c / (2.0 - c);
    subs = {w1, w0, w1};
  } else {
    throw Error("split_operator_propagate: order must be 2 or 4");
  }
  const double dt = t / steps;
  struct Factors {
    CVec half_v, kin;
  };
  std::vector<Factors> fac;
  for (double w : subs) {
    Factors f;
    f.half_v.resize(V.size());
    f.kin.resize(V.size());
    for (Eigen::Index i = 0; i < V.size(); ++i) {
      f.half_v(i) = std::exp(-kI * V(i) * (0.5 * w * dt) / hbar);
      f.kin(i) = std::exp(-kI * hbar * gh.k2(i) * (w * dt));
    }
    fac.push_back(std::move(f));
  }
  CVec psi = psi0;
  for (int s = 0; s < steps; ++s) {
    for (const auto& f : fac) {
      psi = psi.cwiseProduct(f.half_v);
      CVec k = gh.fft_forward(psi);
      k = k.cwiseProduct(f.kin);
      psi = gh.fft_inverse(k);
      psi = psi.cwiseProduct(f.half_v);
    }
    if ((s + 1) % opts.check_every == 0 || s + 1 == steps) {
      if (boundary_mass(psi, g) > opts.boundary_running * nrm * nrm) {
        throw GridError("split_operator_propagate: boundary reflection (mass near the edge exceeds tolerance)");
      }
    }
  }
  return psi;
}

struct CheckedPropagation {
  CVec psi;
  double richardson = 0.0;  // L2 change when the step is halved
  double norm_defect = 0.0;
};

inline CheckedPropagation split_operator_propagate_checked(const GridHamiltonian& gh, const CVec& psi0, double t,
                                                           int steps, const SplitOperatorOptions& opts = {}) {
  CheckedPropagation out;
  const CVec a = split_operator_propagate(gh, psi0, t, steps, opts);
  out.psi = split_operator_propagate(gh, psi0, t, 2 * steps, opts);
  out.richardson = l2_norm(out.psi - a, gh.grid());
  out.norm_defect = std::abs(l2_norm(out.psi, gh.grid()) - l2_norm(psi0, gh.grid()));
  return out;
}

/// Count of states below E predicted by phase-space volume / (2 pi hbar)^n, for
/// 1D mechanical systems: (1/(2 pi hbar)) oint over {H <= E} = (1/(pi hbar)) int sqrt(E - V) dq.
inline double weyl_count_1d(const std::function<double(const Vec&)>& V, double E, double hbar, double L,
                            int points = 20000) {
  double acc = 0.0;
  const double h = 2.0 * L / points;
  Vec q(1);
  for (int i = 0; i < points; ++i) {
    q(0) = -L + (i + 0.5) * h;
    const double r = E - V(q);
    if (r > 0.0) acc += std::sqrt(r);
  }
  return acc * h * 2.0 / (2.0 * kPi * hbar);
}

}  // namespace gtrace
