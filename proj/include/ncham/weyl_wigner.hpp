#pragma once

#include <cmath>
#include <functional>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <vector>

#include "ncham/algebra.hpp"
#include "ncham/fft.hpp"
#include "ncham/io.hpp"

namespace ncham {

/// Uniform phase-space grid: x_j = (j - nx/2) dx, p_k = (k - np/2) dp with
/// dx = 2 x_extent/nx, dp = 2 p_extent/np. Periodic in both directions.
/// Fourier-dual grids satisfy dx*dp*nx = 2*pi*hbar, which makes position and
/// momentum exact discrete Fourier partners; the kernel transforms require it.
struct PhaseSpaceGrid {
  int nx = 0;
  int np = 0;
  double x_extent = 0.0;
  double p_extent = 0.0;
  double hbar = 1.0;

  double dx() const { return 2.0 * x_extent / nx; }
  double dp() const { return 2.0 * p_extent / np; }
  double x(int j) const { return (j - nx / 2) * dx(); }
  double p(int k) const { return (k - np / 2) * dp(); }

  bool fourier_dual() const {
    if (nx != np) return false;
    const double ratio = dx() * dp() * nx / (2.0 * std::numbers::pi * hbar);
    return std::abs(ratio - std::round(ratio)) < 1e-9 && std::round(ratio) >= 1.0;
  }

  bool same_layout(const PhaseSpaceGrid& o) const {
    return nx == o.nx && np == o.np && x_extent == o.x_extent && p_extent == o.p_extent &&
           hbar == o.hbar;
  }
};

namespace detail {
inline bool power_of_two(int n) { return n >= 4 && (n & (n - 1)) == 0; }
}  // namespace detail

inline PhaseSpaceGrid make_grid(int nx, int np, double x_extent, double p_extent, double hbar) {
  if (!detail::power_of_two(nx) || !detail::power_of_two(np))
    throw InvalidInput("make_grid: grid sizes must be powers of two, at least 4");
  if (!(x_extent > 0.0) || !(p_extent > 0.0) || !(hbar > 0.0))
    throw InvalidInput("make_grid: extents and hbar must be positive");
  return PhaseSpaceGrid{nx, np, x_extent, p_extent, hbar};
}

/// Square grid with dp chosen so dx*dp*n = 2*pi*hbar exactly.
inline PhaseSpaceGrid make_fourier_dual_grid(int n, double x_extent, double hbar) {
  PhaseSpaceGrid g = make_grid(n, n, x_extent, x_extent, hbar);
  const double dx = g.dx();
  g.p_extent = std::numbers::pi * hbar / dx;
  return g;
}

/// Sampled integral kernel: (A psi)(x_u) = sum_v K(u,v) psi(v) dx. The matrix
/// of the operator on grid samples is therefore K*dx.
struct OperatorKernel {
  int n = 0;
  double x_extent = 0.0;
  Eigen::MatrixXcd k;
  /// Set by weyl_quantize when the source symbol carried boundary mass above
  /// the aliasing guard; values are then wrap-contaminated.
  bool aliasing_risk = false;
};

inline OperatorKernel kernel_from_matrix(const AlgebraElement& op, const PhaseSpaceGrid& grid) {
  if (op.rows() != grid.nx || op.cols() != grid.nx)
    throw GridMismatch("kernel_from_matrix: operator does not match the spatial grid");
  return OperatorKernel{grid.nx, grid.x_extent, op / grid.dx(), false};
}

inline AlgebraElement matrix_from_kernel(const OperatorKernel& kernel) {
  return (kernel.k * (2.0 * kernel.x_extent / kernel.n)).eval();
}

inline OperatorKernel identity_kernel(const PhaseSpaceGrid& grid) {
  return kernel_from_matrix(AlgebraElement::Identity(grid.nx, grid.nx), grid);
}

inline OperatorKernel position_kernel(const PhaseSpaceGrid& grid) {
  AlgebraElement x = AlgebraElement::Zero(grid.nx, grid.nx);
  for (int j = 0; j < grid.nx; ++j) x(j, j) = grid.x(j);
  return kernel_from_matrix(x, grid);
}

/// K_C(x,y) = sum_z K_A(x,z) K_B(z,y) dz.
inline OperatorKernel compose(const OperatorKernel& a, const OperatorKernel& b) {
  if (a.n != b.n || a.x_extent != b.x_extent)
    throw GridMismatch("compose: kernels live on different grids");
  const double dx = 2.0 * a.x_extent / a.n;
  return OperatorKernel{a.n, a.x_extent, (a.k * b.k * dx).eval(), false};
}

inline bool kernel_self_adjoint(const OperatorKernel& kernel, double tol = 1e-10) {
  return (kernel.k - kernel.k.adjoint()).cwiseAbs().maxCoeff() <=
         tol * std::max(1.0, kernel.k.cwiseAbs().maxCoeff());
}

/// Phase-space symbol sampled on a grid; values(j,k) = W(x_j, p_k).
struct WignerField {
  PhaseSpaceGrid grid;
  Eigen::MatrixXcd values;
};

inline WignerField field_from_function(const PhaseSpaceGrid& grid,
                                       const std::function<Complex(double, double)>& fn) {
  Eigen::MatrixXcd v(grid.nx, grid.np);
  for (int j = 0; j < grid.nx; ++j)
    for (int k = 0; k < grid.np; ++k) v(j, k) = fn(grid.x(j), grid.p(k));
  return WignerField{grid, std::move(v)};
}

/// C-infinity taper: 1 for |u| <= lo, 0 for |u| >= hi, smooth bump blend
/// between. Used to compactify unbounded symbols so periodization is clean;
/// the flat region extends past the interior box (|u| <= 0.5) so interior
/// checks keep a margin from the taper, where star products are nonlocal.
inline double bump_window(double u, double lo = 0.6, double hi = 0.9) {
  const double a = std::abs(u);
  if (a <= lo) return 1.0;
  if (a >= hi) return 0.0;
  const double s = (a - lo) / (hi - lo);
  const auto f = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  return f(1.0 - s) / (f(1.0 - s) + f(s));
}

inline double phase_space_window(const PhaseSpaceGrid& grid, double x, double p) {
  return bump_window(x / grid.x_extent) * bump_window(p / grid.p_extent);
}

/// The coordinate symbols tapered to zero at the boundary; they agree with x
/// (resp. p) wherever |x| <= 0.6 x_extent and |p| <= 0.6 p_extent, which
/// covers the interior box used by interior_sup.
inline WignerField windowed_x_field(const PhaseSpaceGrid& grid) {
  return field_from_function(
      grid, [&grid](double x, double p) { return Complex(x * phase_space_window(grid, x, p)); });
}

inline WignerField windowed_p_field(const PhaseSpaceGrid& grid) {
  return field_from_function(
      grid, [&grid](double x, double p) { return Complex(p * phase_space_window(grid, x, p)); });
}

inline double sup_abs(const WignerField& w) { return w.values.cwiseAbs().maxCoeff(); }

/// Max |values| over the interior box |x| <= x_extent/2, |p| <= p_extent/2.
inline double interior_sup(const WignerField& w) {
  double worst = 0.0;
  for (int j = 0; j < w.grid.nx; ++j) {
    if (std::abs(w.grid.x(j)) > 0.5 * w.grid.x_extent) continue;
    for (int k = 0; k < w.grid.np; ++k) {
      if (std::abs(w.grid.p(k)) > 0.5 * w.grid.p_extent) continue;
      worst = std::max(worst, std::abs(w.values(j, k)));
    }
  }
  return worst;
}

/// Largest |value| on the outermost grid ring relative to the global sup.
inline double boundary_sup_fraction(const WignerField& w) {
  const double global = sup_abs(w);
  if (global == 0.0) return 0.0;
  double edge = 0.0;
  for (int j = 0; j < w.grid.nx; ++j) {
    edge = std::max({edge, std::abs(w.values(j, 0)), std::abs(w.values(j, w.grid.np - 1))});
  }
  for (int k = 0; k < w.grid.np; ++k) {
    edge = std::max({edge, std::abs(w.values(0, k)), std::abs(w.values(w.grid.nx - 1, k))});
  }
  return edge / global;
}

namespace detail {

inline void require_transform_grid(const PhaseSpaceGrid& grid, const char* where) {
  if (grid.nx != grid.np || !grid.fourier_dual())
    throw GridMismatch(std::string(where) +
                       ": kernel transforms need a square Fourier-dual grid (dx*dp*nx = 2*pi*hbar)");
}

/// Signed frequency of FFT slot i out of n.
inline int fft_freq(int i, int n) { return i < n / 2 ? i : i - n; }

}  // namespace detail

/// W(x,p) = sum_b K(x + b/2, x - b/2) e^{-i p b/hbar} db with b stepping by
/// dx over the half-period window [-L/2, L/2) (L = box length); wider windows
/// would re-count the periodized kernel (the identity would map to 2, not 1).
///
/// For separation b = d dx the kernel arguments live on the circulant
/// diagonal u - v = d; its midpoints (u+v)/2 cover only one parity class, so
/// odd-d diagonals are brought onto the integer grid by a band-limited
/// half-step shift along the midpoint direction (Nyquist handled as cosine).
/// That interpolation is the one weyl_quantize induces, which makes the pair
/// exact mutual inverses on all grid symbols; 2-D interpolation of K would
/// mix diagonal parities and break even the identity example.
inline WignerField wigner_transform(const OperatorKernel& kernel, const PhaseSpaceGrid& grid) {
  detail::require_transform_grid(grid, "wigner_transform");
  if (kernel.n != grid.nx || kernel.x_extent != grid.x_extent)
    throw GridMismatch("wigner_transform: kernel grid does not match the phase-space grid");
  const int n = grid.nx;
  // at_mid(d): the u - v = d diagonal of K evaluated at integer midpoints j.
  Eigen::MatrixXcd diag_at_mid(n, n);  // column (d + n) % n holds values over j
  Eigen::VectorXcd s(n);
  for (int d = -n / 2; d < n / 2; ++d) {
    for (int i = 0; i < n; ++i) s[i] = kernel.k((((i + d) % n) + n) % n, i);
    const int slot = (d + n) % n;
    if ((d & 1) == 0) {
      // midpoint of (i + d, i) is i + d/2: direct gather
      for (int j = 0; j < n; ++j) diag_at_mid(j, slot) = s[(((j - d / 2) % n) + n) % n];
    } else {
      // need i = j - d/2: half-step shift, spectrally (Nyquist term vanishes
      // under the symmetric cosine convention since cos(pi d/2) = 0)
      Eigen::VectorXcd hat = detail::fft_fwd(s) / static_cast<double>(n);
      for (int q = 0; q < n; ++q) {
        if (q == n / 2) {
          hat[q] = 0.0;
          continue;
        }
        hat[q] *= std::polar(1.0, -std::numbers::pi * detail::fft_freq(q, n) * d / n);
      }
      diag_at_mid.col(slot) = detail::fft_fwd(hat.conjugate()).conjugate();
    }
  }
  // W(x_j, p_k) = dx sum_d at_mid(d)(j) e^{-i p_k d dx/hbar}; the phase is
  // (-1)^s e^{-2 pi i k s/n} at slot s = d mod n.
  Eigen::MatrixXcd w(n, n);
  Eigen::VectorXcd row(n);
  for (int j = 0; j < n; ++j) {
    for (int slot = 0; slot < n; ++slot)
      row[slot] = (slot & 1) ? -diag_at_mid(j, slot) : diag_at_mid(j, slot);
    w.row(j) = (grid.dx() * detail::fft_fwd(row)).transpose();
  }
  return WignerField{grid, std::move(w)};
}

/// Inverse map: K(x + b/2, x - b/2) = (1/2 pi hbar) sum_p W(x,p) e^{i p b/hbar} dp.
/// The x midpoints (u+v)/2 land on the half grid, again via 2x upsampling.
/// Sets aliasing_risk instead of failing when the symbol does not decay at
/// the boundary (relative sup above 1e-12 on the outer ring).
inline OperatorKernel weyl_quantize(const WignerField& w) {
  detail::require_transform_grid(w.grid, "weyl_quantize");
  const int n = w.grid.nx;
  const Eigen::MatrixXcd w2x = detail::upsample2x_rows(w.values);
  // g(c, m) = (1/(n dx)) sum_k W(x_c, p_k) e^{+2 pi i (k - n/2) m/n}
  Eigen::MatrixXcd g(2 * n, n);
  for (int c = 0; c < 2 * n; ++c) {
    const Eigen::VectorXcd row = w2x.row(c).transpose();
    Eigen::VectorXcd inv = detail::fft_fwd(row.conjugate()).conjugate();  // unscaled inverse
    for (int m = 1; m < n; m += 2) inv[m] = -inv[m];
    g.row(c) = (inv / (n * w.grid.dx())).transpose();
  }
  OperatorKernel kernel;
  kernel.n = n;
  kernel.x_extent = w.grid.x_extent;
  kernel.k.resize(n, n);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      // Separation representative in [-n/2, n/2); when u - v wraps, the
      // midpoint index must wrap with it (the other argument gains a period).
      const int d = u - v;
      const bool wrapped = d >= n / 2 || d < -n / 2;
      const int c = (u + v + (wrapped ? n : 0)) % (2 * n);
      kernel.k(u, v) = g(c, ((d % n) + n) % n);
    }
  }
  kernel.aliasing_risk = boundary_sup_fraction(w) > 1e-12;
  return kernel;
}

namespace detail {

/// Centered 2-D mode coefficients: values(j,k) = sum Ahat(a,b)
/// e^{2 pi i (a(j-nx/2)/nx + b(k-np/2)/np)}.
inline Eigen::MatrixXcd centered_modes(const Eigen::MatrixXcd& values) {
  const int nx = static_cast<int>(values.rows());
  const int np = static_cast<int>(values.cols());
  Eigen::MatrixXcd tmp(nx, np);
  for (int k = 0; k < np; ++k) tmp.col(k) = fft_fwd(values.col(k));
  Eigen::MatrixXcd hat(nx, np);
  for (int a = 0; a < nx; ++a) hat.row(a) = fft_fwd(tmp.row(a).transpose()).transpose();
  hat /= static_cast<double>(nx) * np;
  for (int a = 0; a < nx; ++a)
    for (int b = 0; b < np; ++b)
      if ((a + b) & 1) hat(a, b) = -hat(a, b);
  return hat;
}

inline Eigen::MatrixXcd centered_modes_inverse(const Eigen::MatrixXcd& hat_in) {
  Eigen::MatrixXcd hat = hat_in;
  const int nx = static_cast<int>(hat.rows());
  const int np = static_cast<int>(hat.cols());
  for (int a = 0; a < nx; ++a)
    for (int b = 0; b < np; ++b)
      if ((a + b) & 1) hat(a, b) = -hat(a, b);
  Eigen::MatrixXcd tmp(nx, np);
  for (int a = 0; a < nx; ++a)
    tmp.row(a) = fft_fwd(hat.row(a).transpose().conjugate()).conjugate().transpose();
  Eigen::MatrixXcd values(nx, np);
  for (int k = 0; k < np; ++k)
    values.col(k) = fft_fwd(tmp.col(k).conjugate()).conjugate();
  return values;
}

/// Star product by the plane-wave composition law, O((nx*np)^2), valid on any
/// grid. For modes e^{i(alpha x + beta p)} and e^{i(gamma x + delta p)} the
/// product picks up exp(-i hbar (alpha delta - beta gamma)/2); on the mode
/// lattice that is theta*(a d - b c) with theta = 2 pi^2 hbar/(Lx Lp).
inline Eigen::MatrixXcd star_modes(const PhaseSpaceGrid& grid, const Eigen::MatrixXcd& a,
                                   const Eigen::MatrixXcd& b) {
  const int nx = grid.nx, np = grid.np;
  const double theta = 2.0 * std::numbers::pi * std::numbers::pi * grid.hbar /
                       ((2.0 * grid.x_extent) * (2.0 * grid.p_extent));
  const Eigen::MatrixXcd ah = centered_modes(a);
  const Eigen::MatrixXcd bh = centered_modes(b);
  Eigen::MatrixXcd t1(nx, np), t2(np, nx);
  for (int ia = 0; ia < nx; ++ia)
    for (int id = 0; id < np; ++id)
      t1(ia, id) = std::polar(1.0, -theta * fft_freq(ia, nx) * fft_freq(id, np));
  for (int ib = 0; ib < np; ++ib)
    for (int ic = 0; ic < nx; ++ic)
      t2(ib, ic) = std::polar(1.0, theta * fft_freq(ib, np) * fft_freq(ic, nx));
  Eigen::MatrixXcd ch = Eigen::MatrixXcd::Zero(nx, np);
  for (int ia = 0; ia < nx; ++ia)
    for (int ib = 0; ib < np; ++ib) {
      const Complex aval = ah(ia, ib);
      if (std::abs(aval) == 0.0) continue;
      for (int ic = 0; ic < nx; ++ic) {
        for (int id = 0; id < np; ++id) {
          ch((ia + ic) % nx, (ib + id) % np) +=
              aval * bh(ic, id) * t1(ia, id) * t2(ib, ic);
        }
      }
    }
  return centered_modes_inverse(ch);
}

}  // namespace detail

/// Defining contract: the star product is the symbol image of operator
/// composition, (AB)_W = A_W * B_W. On Fourier-dual square grids the
/// transform pair is an exact bijection, so the product is computed by
/// conjugation: quantize both factors, compose the kernels, transform back.
/// Associativity and the identity law are then inherited from matrix algebra
/// to machine precision. Grids that are not Fourier-dual (such as an hbar
/// sweep at fixed extents) take the plane-wave mode sum instead.
inline WignerField star_product(const WignerField& a, const WignerField& b) {
  if (!a.grid.same_layout(b.grid)) throw GridMismatch("star_product: fields on different grids");
  if (a.grid.fourier_dual())
    return wigner_transform(compose(weyl_quantize(a), weyl_quantize(b)), a.grid);
  return WignerField{a.grid, detail::star_modes(a.grid, a.values, b.values)};
}

/// (-i hbar)^{-1} (A*B - B*A).
inline WignerField moyal_bracket(const WignerField& a, const WignerField& b) {
  if (!a.grid.same_layout(b.grid)) throw GridMismatch("moyal_bracket: fields on different grids");
  const WignerField ab = star_product(a, b);
  const WignerField ba = star_product(b, a);
  return WignerField{a.grid,
                     ((ab.values - ba.values) / Complex(0.0, -a.grid.hbar)).eval()};
}

namespace detail {

/// Spectral derivative along x (axis = 0) or p (axis = 1), Nyquist zeroed.
inline Eigen::MatrixXcd spectral_derivative(const WignerField& w, int axis) {
  const int n = axis == 0 ? w.grid.nx : w.grid.np;
  const double box = axis == 0 ? 2.0 * w.grid.x_extent : 2.0 * w.grid.p_extent;
  Eigen::VectorXcd mult(n);
  for (int i = 0; i < n; ++i) {
    const int m = fft_freq(i, n);
    mult[i] = (i == n / 2) ? Complex(0.0)
                           : Complex(0.0, 2.0 * std::numbers::pi * m / box);
  }
  Eigen::MatrixXcd out(w.grid.nx, w.grid.np);
  if (axis == 0) {
    for (int k = 0; k < w.grid.np; ++k)
      out.col(k) = fft_inv(fft_fwd(w.values.col(k)).cwiseProduct(mult));
  } else {
    for (int j = 0; j < w.grid.nx; ++j)
      out.row(j) =
          fft_inv(fft_fwd(w.values.row(j).transpose()).cwiseProduct(mult)).transpose();
  }
  return out;
}

}  // namespace detail

/// {f,g}_cl = df/dp dg/dx - dg/dp df/dx on the grid (the sign with
/// {p, x}_cl = +1), by spectral differentiation.
inline WignerField grid_classical_poisson(const WignerField& f, const WignerField& g) {
  if (!f.grid.same_layout(g.grid))
    throw GridMismatch("grid_classical_poisson: fields on different grids");
  const Eigen::MatrixXcd fx = detail::spectral_derivative(f, 0);
  const Eigen::MatrixXcd fp = detail::spectral_derivative(f, 1);
  const Eigen::MatrixXcd gx = detail::spectral_derivative(g, 0);
  const Eigen::MatrixXcd gp = detail::spectral_derivative(g, 1);
  return WignerField{f.grid, (fp.cwiseProduct(gx) - gp.cwiseProduct(fx)).eval()};
}

/// ||f*g - fg + (i hbar/2){f,g}_cl||_inf over the interior box. For symbols
/// built without hbar dependence this residual is O(hbar^2).
inline double semiclassical_expansion_residual(const WignerField& f, const WignerField& g) {
  if (!f.grid.same_layout(g.grid))
    throw GridMismatch("semiclassical_expansion_residual: fields on different grids");
  const WignerField fg = star_product(f, g);
  const WignerField pb = grid_classical_poisson(f, g);
  const Complex half_ih(0.0, 0.5 * f.grid.hbar);
  WignerField resid{f.grid,
                    (fg.values - f.values.cwiseProduct(g.values) + half_ih * pb.values).eval()};
  return interior_sup(resid);
}

struct RegularLimitReport {
  bool converged = false;
  double worst_gap = 0.0;
  /// Pair overload only: interior sup |moyal_bracket - classical PB| per
  /// hbar sample, and whether that gap settled below 1e-4 by the last one.
  std::vector<double> bracket_gaps;
  bool bracket_converged = false;
};

/// Sup-norm Cauchy test across a decreasing-hbar family (threshold 1e-4):
/// the membership check for symbols with a smooth classical limit.
inline RegularLimitReport regular_limit_check(const std::vector<WignerField>& family) {
  if (family.size() < 4) throw InvalidInput("regular_limit_check: need at least 4 hbar samples");
  for (std::size_t i = 1; i < family.size(); ++i) {
    const PhaseSpaceGrid &a = family[i - 1].grid, &b = family[i].grid;
    if (a.nx != b.nx || a.np != b.np || a.x_extent != b.x_extent || a.p_extent != b.p_extent)
      throw GridMismatch("regular_limit_check: family members on different grids");
    if (!(b.hbar < a.hbar))
      throw InvalidInput("regular_limit_check: hbar must strictly decrease");
  }
  RegularLimitReport report;
  for (std::size_t i = 1; i < family.size(); ++i) {
    report.worst_gap = std::max(
        report.worst_gap, (family[i].values - family[i - 1].values).cwiseAbs().maxCoeff());
  }
  report.converged = report.worst_gap < 1e-4;
  return report;
}

/// Pair form: additionally tracks the Moyal bracket of (a_i, b_i) against the
/// grid classical Poisson bracket along the hbar sweep; the bracket gap must
/// end below 1e-4 without growing for the pair to count as regular.
inline RegularLimitReport regular_limit_check(const std::vector<WignerField>& a_family,
                                              const std::vector<WignerField>& b_family) {
  if (a_family.size() != b_family.size())
    throw InvalidInput("regular_limit_check: families of different lengths");
  RegularLimitReport report = regular_limit_check(a_family);
  const RegularLimitReport b_report = regular_limit_check(b_family);
  report.worst_gap = std::max(report.worst_gap, b_report.worst_gap);
  report.converged = report.converged && b_report.converged;
  for (std::size_t i = 0; i < a_family.size(); ++i) {
    if (!a_family[i].grid.same_layout(b_family[i].grid))
      throw GridMismatch("regular_limit_check: paired fields on different grids");
    const WignerField moyal = moyal_bracket(a_family[i], b_family[i]);
    const WignerField classical = grid_classical_poisson(a_family[i], b_family[i]);
    report.bracket_gaps.push_back(
        interior_sup(WignerField{moyal.grid, (moyal.values - classical.values).eval()}));
  }
  report.bracket_converged =
      report.bracket_gaps.back() < 1e-4 && report.bracket_gaps.back() <= report.bracket_gaps.front();
  return report;
}

enum class EvolutionPicture { kState, kObservable };

/// RK4 integration of the Moyal flow. Observables follow dA/dt = +{H,A}_M,
/// state symbols (Wigner functions of densities) dW/dt = -{H,W}_M.
inline WignerField moyal_evolve(const WignerField& h, const WignerField& w0, double t1,
                                int nsteps, EvolutionPicture picture) {
  if (!h.grid.same_layout(w0.grid)) throw GridMismatch("moyal_evolve: fields on different grids");
  if (nsteps < 1) throw InvalidInput("moyal_evolve: nsteps < 1");
  const double sign = picture == EvolutionPicture::kObservable ? 1.0 : -1.0;
  const double dt = t1 / nsteps;
  const auto rhs = [&](const Eigen::MatrixXcd& v) {
    return (sign * moyal_bracket(h, WignerField{h.grid, v}).values).eval();
  };
  Eigen::MatrixXcd w = w0.values;
  for (int s = 0; s < nsteps; ++s) {
    const Eigen::MatrixXcd k1 = rhs(w);
    const Eigen::MatrixXcd k2 = rhs(w + 0.5 * dt * k1);
    const Eigen::MatrixXcd k3 = rhs(w + 0.5 * dt * k2);
    const Eigen::MatrixXcd k4 = rhs(w + dt * k3);
    w += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return WignerField{w0.grid, std::move(w)};
}

/// CSV layout: one header line `nx,np,x_extent,p_extent,hbar`, then nx rows
/// of np (re,im) pairs, row-major, 17 significant digits.
inline void write_wigner_csv(const WignerField& w, std::ostream& os) {
  os << w.grid.nx << ',' << w.grid.np << ',' << fmt17(w.grid.x_extent) << ','
     << fmt17(w.grid.p_extent) << ',' << fmt17(w.grid.hbar) << '\n';
  for (int j = 0; j < w.grid.nx; ++j) {
    for (int k = 0; k < w.grid.np; ++k) {
      if (k) os << ',';
      os << fmt17(w.values(j, k).real()) << ',' << fmt17(w.values(j, k).imag());
    }
    os << '\n';
  }
}

inline WignerField read_wigner_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("read_wigner_csv: empty input");
  for (char& c : line)
    if (c == ',') c = ' ';
  std::istringstream header(line);
  PhaseSpaceGrid grid;
  if (!(header >> grid.nx >> grid.np >> grid.x_extent >> grid.p_extent >> grid.hbar))
    throw InvalidInput("read_wigner_csv: malformed header");
  grid = make_grid(grid.nx, grid.np, grid.x_extent, grid.p_extent, grid.hbar);
  Eigen::MatrixXcd values(grid.nx, grid.np);
  for (int j = 0; j < grid.nx; ++j) {
    if (!std::getline(is, line)) throw InvalidInput("read_wigner_csv: truncated data");
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream row(line);
    for (int k = 0; k < grid.np; ++k) {
      double re, im;
      if (!(row >> re >> im)) throw InvalidInput("read_wigner_csv: malformed row");
      values(j, k) = Complex(re, im);
    }
  }
  return WignerField{grid, std::move(values)};
}

}  // namespace ncham
