#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "ncham/algebra.hpp"
#include "ncham/errors.hpp"
#include "ncham/fft.hpp"
#include "ncham/io.hpp"

namespace ncham {

/// 1-D spatial box x_j = (j - n/2) dx, dx = 2 extent / n. The quantum solvers
/// treat it as periodic (spectral), the classical solver as a finite box with
/// one-sided stencils at the edges; fixtures must decay before the boundary
/// for the two views to coexist.
struct SpatialGrid {
  int n = 0;
  double extent = 0.0;

  double dx() const { return 2.0 * extent / n; }
  double x(int j) const { return (j - n / 2) * dx(); }

  bool same_layout(const SpatialGrid& o) const { return n == o.n && extent == o.extent; }
};

inline SpatialGrid make_spatial_grid(int n, double extent) {
  if (n < 8 || (n & (n - 1)) != 0)
    throw InvalidInput("make_spatial_grid: n must be a power of two, at least 8");
  if (!(extent > 0.0)) throw InvalidInput("make_spatial_grid: extent must be positive");
  return SpatialGrid{n, extent};
}

using Potential = std::function<double(double)>;

/// Density-action pair evolving under the classical Hamilton-Jacobi pair
/// (action transport plus continuity) for H = p^2/2m + V(q).
struct ClassicalHJState {
  SpatialGrid grid;
  Eigen::VectorXd rho;
  Eigen::VectorXd S;
  double mass = 1.0;
  Potential potential;
};

inline ClassicalHJState make_classical_state(const SpatialGrid& grid, Eigen::VectorXd rho,
                                             Eigen::VectorXd S, double mass,
                                             Potential potential) {
  if (rho.size() != grid.n || S.size() != grid.n)
    throw GridMismatch("make_classical_state: field sizes do not match the grid");
  if (!(mass > 0.0)) throw InvalidInput("make_classical_state: mass must be positive");
  if (!potential) throw InvalidInput("make_classical_state: potential is empty");
  if (rho.minCoeff() < 0.0) throw InvalidInput("make_classical_state: rho must be nonnegative");
  if (std::abs(rho.sum() * grid.dx() - 1.0) > 1e-8)
    throw InvalidInput("make_classical_state: rho is not normalized");
  return ClassicalHJState{grid, std::move(rho), std::move(S), mass, std::move(potential)};
}

struct GridWaveFunction {
  SpatialGrid grid;
  Eigen::VectorXcd psi;
  double hbar = 1.0;
};

inline GridWaveFunction make_wave_function(const SpatialGrid& grid, Eigen::VectorXcd psi,
                                           double hbar) {
  if (psi.size() != grid.n)
    throw GridMismatch("make_wave_function: psi size does not match the grid");
  if (!(hbar > 0.0)) throw InvalidInput("make_wave_function: hbar must be positive");
  if (std::abs(psi.squaredNorm() * grid.dx() - 1.0) > 1e-8)
    throw InvalidInput("make_wave_function: psi is not L2-normalized");
  return GridWaveFunction{grid, std::move(psi), hbar};
}

/// Polar data of a wave function. S is the unwrapped phase times hbar;
/// phase_defined marks points where |psi| clears the node threshold, S values
/// at masked points are carried along but not trustworthy.
struct MadelungFields {
  SpatialGrid grid;
  Eigen::VectorXd rho;
  Eigen::VectorXd S;
  double hbar = 1.0;
  std::vector<char> phase_defined;
};

inline double phase_at(const MadelungFields& f, int j) {
  if (j < 0 || j >= f.grid.n) throw InvalidInput("phase_at: index out of range");
  if (!f.phase_defined[static_cast<std::size_t>(j)])
    throw PhaseUndefined("phase_at: node at x = " + fmt17(f.grid.x(j)));
  return f.S[j];
}

namespace detail {

inline void check_hj_times(const std::vector<double>& times, const char* where) {
  if (times.size() < 2) throw InvalidInput(std::string(where) + ": need at least 2 times");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw InvalidInput(std::string(where) + ": times must strictly increase");
}

/// 4th-order first-derivative weights on the contiguous window {s,...,s+4}
/// around the evaluation point, divided by dx outside. s = -2 is central,
/// s = -3 / -1 are the upwind-biased pair, s = -4 / 0 fully one-sided.
inline const double* stencil_row(int s) {
  static const double rows[5][5] = {
      {3.0 / 12, -16.0 / 12, 36.0 / 12, -48.0 / 12, 25.0 / 12},   // s = -4
      {-1.0 / 12, 6.0 / 12, -18.0 / 12, 10.0 / 12, 3.0 / 12},     // s = -3
      {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12},            // s = -2
      {-3.0 / 12, -10.0 / 12, 18.0 / 12, -6.0 / 12, 1.0 / 12},    // s = -1
      {-25.0 / 12, 48.0 / 12, -36.0 / 12, 16.0 / 12, -3.0 / 12},  // s = 0
  };
  return rows[s + 4];
}

/// Derivative with a per-point window shift. bias = 0 gives the central
/// 5-point stencil, -1/+1 the upwind-biased ones. At the box edges the window
/// is clamped only while the clamp pushes it further upwind (outflow side,
/// one-sided rows stay dissipative); where the clamp would flip it downwind
/// (inflow side) the point copies the derivative of the nearest interior
/// point instead. Differentiating edge values with downwind rows is
/// anti-dissipative and blows up from rounding noise under RK4.
inline Eigen::VectorXd fd_derivative(const SpatialGrid& grid, const Eigen::VectorXd& f,
                                     const Eigen::VectorXi& bias) {
  const int n = grid.n;
  Eigen::VectorXd out(n);
  std::vector<char> slaved(n, 0);
  for (int j = 0; j < n; ++j) {
    const int want = -2 + bias[j];
    if ((want < -j && bias[j] < 0) || (want > n - 5 - j && bias[j] > 0)) {
      slaved[j] = 1;  // clamping would cross to the downwind side
      continue;
    }
    const int s = std::min(std::max(want, -j), n - 5 - j);
    const double* w = stencil_row(s);
    double acc = 0.0;
    for (int m = 0; m < 5; ++m) acc += w[m] * f[j + s + m];
    out[j] = acc / grid.dx();
  }
  for (int j = 0; j < n; ++j) {
    if (!slaved[j]) continue;
    int k = j;
    const int step = j < n / 2 ? 1 : -1;
    while (k + step >= 0 && k + step < n && slaved[k]) k += step;
    out[j] = out[k];
  }
  return out;
}

inline Eigen::VectorXd fd_central(const SpatialGrid& grid, const Eigen::VectorXd& f) {
  return fd_derivative(grid, f, Eigen::VectorXi::Zero(grid.n));
}

struct HJRhs {
  Eigen::VectorXd dS;
  Eigen::VectorXd drho;
  Eigen::VectorXd v;
};

/// Method-of-lines right-hand side: dS/dt = -((dS/dq)^2/2m + V),
/// drho/dt = -d(v rho)/dq, with the stencil for both transport terms biased
/// against the local velocity direction.
inline HJRhs hj_rhs(const SpatialGrid& grid, const Eigen::VectorXd& S,
                    const Eigen::VectorXd& rho, double mass, const Potential& V) {
  const int n = grid.n;
  const Eigen::VectorXd sq_probe = fd_central(grid, S);
  Eigen::VectorXi bias(n);
  for (int j = 0; j < n; ++j)
    bias[j] = sq_probe[j] > 0.0 ? -1 : (sq_probe[j] < 0.0 ? 1 : 0);
  HJRhs r;
  const Eigen::VectorXd sq = fd_derivative(grid, S, bias);
  r.v = sq / mass;
  r.dS.resize(n);
  for (int j = 0; j < n; ++j) r.dS[j] = -(sq[j] * sq[j] / (2.0 * mass) + V(grid.x(j)));
  const Eigen::VectorXd flux = r.v.cwiseProduct(rho);
  r.drho = -fd_derivative(grid, flux, bias);
  return r;
}

}  // namespace detail

/// Advances the classical pair along the given times (one RK4 step per
/// interval). Valid before caustic formation only: the velocity gradient is
/// monitored at each step and |dv/dq| > 50/dt aborts with the time stamp.
inline std::vector<ClassicalHJState> hj_evolve(const ClassicalHJState& state,
                                               const std::vector<double>& times) {
  detail::check_hj_times(times, "hj_evolve");
  const SpatialGrid& g = state.grid;
  std::vector<ClassicalHJState> out;
  out.reserve(times.size());
  Eigen::VectorXd S = state.S, rho = state.rho;
  out.push_back(ClassicalHJState{g, rho, S, state.mass, state.potential});
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = times[i] - times[i - 1];
    const detail::HJRhs k1 = detail::hj_rhs(g, S, rho, state.mass, state.potential);
    const double vgrad = detail::fd_central(g, k1.v).cwiseAbs().maxCoeff();
    if (!std::isfinite(vgrad) || vgrad > 50.0 / dt)
      throw CausticError("hj_evolve: caustic at t = " + fmt17(times[i - 1]) +
                             " (|dv/dq| = " + fmt17(vgrad) + ")",
                         times[i - 1]);
    const detail::HJRhs k2 = detail::hj_rhs(g, S + 0.5 * dt * k1.dS, rho + 0.5 * dt * k1.drho,
                                            state.mass, state.potential);
    const detail::HJRhs k3 = detail::hj_rhs(g, S + 0.5 * dt * k2.dS, rho + 0.5 * dt * k2.drho,
                                            state.mass, state.potential);
    const detail::HJRhs k4 =
        detail::hj_rhs(g, S + dt * k3.dS, rho + dt * k3.drho, state.mass, state.potential);
    S += (dt / 6.0) * (k1.dS + 2.0 * k2.dS + 2.0 * k3.dS + k4.dS);
    rho += (dt / 6.0) * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho);
    out.push_back(ClassicalHJState{g, rho, S, state.mass, state.potential});
  }
  return out;
}

namespace detail {

/// Cubic Lagrange interpolation on the 4 nodes around q. Throws once the
/// stencil would leave the box.
inline double interp4(const SpatialGrid& grid, const Eigen::VectorXd& f, double q) {
  const double u = (q - grid.x(0)) / grid.dx();
  const int j0 = static_cast<int>(std::floor(u));
  if (j0 - 1 < 0 || j0 + 2 >= grid.n)
    throw DomainExit("integrate_characteristics: trajectory left the grid at q = " + fmt17(q));
  const double t = u - j0;
  const double w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
  const double w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
  const double w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
  const double w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
  return w0 * f[j0 - 1] + w1 * f[j0] + w2 * f[j0 + 1] + w3 * f[j0 + 2];
}

}  // namespace detail

struct CharacteristicPath {
  std::vector<double> times;
  std::vector<double> q;
  std::vector<double> p;
};

/// Integrates dq/dt = v(q,t) through the co-evolved action field, then reads
/// p = dS/dq along the path. Joint RK4: each stage differentiates the staged
/// S field and interpolates at the staged position.
inline CharacteristicPath integrate_characteristics(const ClassicalHJState& state, double q0,
                                                    const std::vector<double>& times) {
  detail::check_hj_times(times, "integrate_characteristics");
  const SpatialGrid& g = state.grid;
  Eigen::VectorXd S = state.S, rho = state.rho;
  double q = q0;
  CharacteristicPath path;
  path.times = times;
  const auto record = [&] {
    path.q.push_back(q);
    path.p.push_back(detail::interp4(g, detail::fd_central(g, S), q));
  };
  record();
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = times[i] - times[i - 1];
    const detail::HJRhs k1 = detail::hj_rhs(g, S, rho, state.mass, state.potential);
    const double f1 = detail::interp4(g, k1.v, q);
    const detail::HJRhs k2 = detail::hj_rhs(g, S + 0.5 * dt * k1.dS, rho + 0.5 * dt * k1.drho,
                                            state.mass, state.potential);
    const double f2 = detail::interp4(g, k2.v, q + 0.5 * dt * f1);
    const detail::HJRhs k3 = detail::hj_rhs(g, S + 0.5 * dt * k2.dS, rho + 0.5 * dt * k2.drho,
                                            state.mass, state.potential);
    const double f3 = detail::interp4(g, k3.v, q + 0.5 * dt * f2);
    const detail::HJRhs k4 =
        detail::hj_rhs(g, S + dt * k3.dS, rho + dt * k3.drho, state.mass, state.potential);
    const double f4 = detail::interp4(g, k4.v, q + dt * f3);
    q += (dt / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
    S += (dt / 6.0) * (k1.dS + 2.0 * k2.dS + 2.0 * k3.dS + k4.dS);
    rho += (dt / 6.0) * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho);
    record();
  }
  return path;
}

/// Node threshold below which the phase is not reported.
inline constexpr double kNodeThreshold = 1e-10;

/// rho = |psi|^2 and S = hbar * (phase unwrapped outward from the density
/// maximum). Nodes mask S; the unwrap continues across them, so points beyond
/// a node keep a consistent branch only up to the node's 2 pi ambiguity.
inline MadelungFields madelung_decompose(const GridWaveFunction& w) {
  const int n = w.grid.n;
  MadelungFields f;
  f.grid = w.grid;
  f.hbar = w.hbar;
  f.rho = w.psi.cwiseAbs2();
  f.phase_defined.assign(static_cast<std::size_t>(n), 1);
  int anchor = 0;
  f.rho.maxCoeff(&anchor);
  Eigen::VectorXd theta(n);
  theta[anchor] = std::arg(w.psi[anchor]);
  for (int j = anchor + 1; j < n; ++j)
    theta[j] = theta[j - 1] + std::arg(w.psi[j] * std::conj(w.psi[j - 1]));
  for (int j = anchor - 1; j >= 0; --j)
    theta[j] = theta[j + 1] + std::arg(w.psi[j] * std::conj(w.psi[j + 1]));
  for (int j = 0; j < n; ++j)
    if (std::abs(w.psi[j]) <= kNodeThreshold) f.phase_defined[static_cast<std::size_t>(j)] = 0;
  f.S = w.hbar * theta;
  return f;
}

/// sqrt(rho) e^{iS/hbar}; the inverse of madelung_decompose up to one global
/// phase factor.
inline GridWaveFunction madelung_compose(const MadelungFields& f) {
  Eigen::VectorXcd psi(f.grid.n);
  for (int j = 0; j < f.grid.n; ++j)
    psi[j] = std::sqrt(std::max(f.rho[j], 0.0)) * std::polar(1.0, f.S[j] / f.hbar);
  return GridWaveFunction{f.grid, std::move(psi), f.hbar};
}

/// -(hbar^2/2m) (sqrt(rho))'' / sqrt(rho), 3-point differences, zero at the
/// edge points and wherever rho is too small to divide by.
inline Eigen::VectorXd quantum_potential(const SpatialGrid& grid, const Eigen::VectorXd& rho,
                                         double mass, double hbar) {
  if (rho.size() != grid.n) throw GridMismatch("quantum_potential: field size mismatch");
  const int n = grid.n;
  const Eigen::VectorXd amp = rho.cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd qp = Eigen::VectorXd::Zero(n);
  const double dx2 = grid.dx() * grid.dx();
  for (int j = 1; j + 1 < n; ++j) {
    if (amp[j] <= kNodeThreshold) continue;
    qp[j] = -(hbar * hbar / (2.0 * mass)) * (amp[j + 1] - 2.0 * amp[j] + amp[j - 1]) /
            (dx2 * amp[j]);
  }
  return qp;
}

/// Residual fields of the continuity / Hamilton-Jacobi pair on interior
/// times (rows) and interior grid points (columns); `defined` masks node
/// stencils and the edge columns. hbar = 0 reproduces the classical pair
/// bitwise: the quantum potential enters as an additive hbar^2 term and is
/// exactly zero there.
struct HJResiduals {
  std::vector<double> times;  // interior evaluation times
  Eigen::MatrixXd continuity;
  Eigen::MatrixXd hamilton_jacobi;
  Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic> defined;

  /// Masked sup over |x| <= frac * extent columns.
  double sup(const Eigen::MatrixXd& field, const SpatialGrid& grid, double frac) const {
    double worst = 0.0;
    for (int r = 0; r < field.rows(); ++r)
      for (int j = 0; j < field.cols(); ++j)
        if (defined(r, j) && std::abs(grid.x(j)) <= frac * grid.extent)
          worst = std::max(worst, std::abs(field(r, j)));
    return worst;
  }
};

/// Evaluates both residuals with 2nd-order centered differences (3-point in
/// x, 2-point in t), the discretization order quoted for the refinement
/// contract. Snapshots must share one grid and carry strictly increasing
/// times.
inline HJResiduals hj_equation_residuals(const SpatialGrid& grid,
                                         const std::vector<Eigen::VectorXd>& rho,
                                         const std::vector<Eigen::VectorXd>& S,
                                         const std::vector<double>& times, double mass,
                                         const Potential& V, double hbar) {
  if (rho.size() != S.size() || rho.size() != times.size())
    throw InvalidInput("hj_equation_residuals: snapshot counts differ");
  if (times.size() < 3) throw InvalidInput("hj_equation_residuals: need at least 3 snapshots");
  detail::check_hj_times(times, "hj_equation_residuals");
  const int n = grid.n;
  for (std::size_t k = 0; k < rho.size(); ++k)
    if (rho[k].size() != n || S[k].size() != n)
      throw GridMismatch("hj_equation_residuals: field size mismatch");

  const int nt = static_cast<int>(times.size()) - 2;
  HJResiduals r;
  r.continuity.setZero(nt, n);
  r.hamilton_jacobi.setZero(nt, n);
  r.defined.setZero(nt, n);
  const double dx = grid.dx();
  for (int it = 0; it < nt; ++it) {
    const int k = it + 1;
    r.times.push_back(times[k]);
    const double dt2 = times[k + 1] - times[k - 1];
    const Eigen::VectorXd& rk = rho[k];
    const Eigen::VectorXd& sk = S[k];
    const Eigen::VectorXd amp = rk.cwiseMax(0.0).cwiseSqrt();
    Eigen::VectorXd flux = Eigen::VectorXd::Zero(n);
    for (int j = 1; j + 1 < n; ++j)
      flux[j] = rk[j] * (sk[j + 1] - sk[j - 1]) / (2.0 * dx * mass);
    for (int j = 2; j + 2 < n; ++j) {
      if (amp[j] <= kNodeThreshold || amp[j - 1] <= kNodeThreshold ||
          amp[j + 1] <= kNodeThreshold)
        continue;
      const double sx = (sk[j + 1] - sk[j - 1]) / (2.0 * dx);
      const double drho_dt = (rho[k + 1][j] - rho[k - 1][j]) / dt2;
      r.continuity(it, j) = drho_dt + (flux[j + 1] - flux[j - 1]) / (2.0 * dx);
      const double ds_dt = (S[k + 1][j] - S[k - 1][j]) / dt2;
      const double qp = hbar * hbar / (2.0 * mass) *
                        ((amp[j + 1] - 2.0 * amp[j] + amp[j - 1]) / (dx * dx)) / amp[j];
      r.hamilton_jacobi(it, j) = ds_dt + sx * sx / (2.0 * mass) + V(grid.x(j)) - qp;
      r.defined(it, j) = 1;
    }
  }
  return r;
}

/// Decomposes a Schrodinger trajectory and evaluates the quantum residual
/// pair. Unwrap constants are aligned across snapshots (integer 2 pi hbar
/// branches at a fixed reference point) so the time derivative of S is
/// meaningful.
inline HJResiduals madelung_residuals(const std::vector<GridWaveFunction>& traj,
                                      const std::vector<double>& times, double mass,
                                      const Potential& V) {
  if (traj.size() != times.size())
    throw InvalidInput("madelung_residuals: snapshot counts differ");
  if (traj.empty()) throw InvalidInput("madelung_residuals: empty trajectory");
  const SpatialGrid grid = traj[0].grid;
  const double hbar = traj[0].hbar;
  std::vector<Eigen::VectorXd> rho, S;
  std::vector<std::vector<char>> masks;
  for (const GridWaveFunction& w : traj) {
    if (!w.grid.same_layout(grid) || w.hbar != hbar)
      throw GridMismatch("madelung_residuals: snapshots on different grids");
    MadelungFields f = madelung_decompose(w);
    rho.push_back(std::move(f.rho));
    S.push_back(std::move(f.S));
    masks.push_back(std::move(f.phase_defined));
  }
  int ref = 0;
  rho[0].maxCoeff(&ref);
  const double two_pi_h = 2.0 * std::numbers::pi * hbar;
  for (std::size_t k = 1; k < S.size(); ++k) {
    const double jump = std::round((S[k][ref] - S[k - 1][ref]) / two_pi_h);
    if (jump != 0.0) S[k].array() -= jump * two_pi_h;
  }
  HJResiduals r = hj_equation_residuals(grid, rho, S, times, mass, V, hbar);
  for (int it = 0; it < r.defined.rows(); ++it)
    for (int j = 0; j < grid.n; ++j)
      if (!masks[static_cast<std::size_t>(it + 1)][static_cast<std::size_t>(j)])
        r.defined(it, j) = 0;
  return r;
}

/// Classical residual evaluator: the same formulas with the hbar^2 term
/// removed, realized by calling the shared evaluator at hbar = 0.
inline HJResiduals classical_hj_residuals(const SpatialGrid& grid,
                                          const std::vector<Eigen::VectorXd>& rho,
                                          const std::vector<Eigen::VectorXd>& S,
                                          const std::vector<double>& times, double mass,
                                          const Potential& V) {
  return hj_equation_residuals(grid, rho, S, times, mass, V, 0.0);
}

/// Strang-split spectral step: half potential kick, full kinetic drift in
/// Fourier space, half kick. Norm-preserving to rounding; periodic in x.
inline std::vector<GridWaveFunction> split_step_evolve(const GridWaveFunction& psi0,
                                                       const Potential& V, double mass,
                                                       const std::vector<double>& times,
                                                       int substeps = 1) {
  detail::check_hj_times(times, "split_step_evolve");
  if (substeps < 1) throw InvalidInput("split_step_evolve: substeps < 1");
  if (!V) throw InvalidInput("split_step_evolve: potential is empty");
  const SpatialGrid& g = psi0.grid;
  const int n = g.n;
  Eigen::VectorXd vx(n), k2(n);
  for (int j = 0; j < n; ++j) vx[j] = V(g.x(j));
  const double box = 2.0 * g.extent;
  for (int i = 0; i < n; ++i) {
    const int m = i < n / 2 ? i : i - n;
    const double k = 2.0 * std::numbers::pi * m / box;
    k2[i] = k * k;
  }
  std::vector<GridWaveFunction> out;
  out.reserve(times.size());
  Eigen::VectorXcd psi = psi0.psi;
  out.push_back(GridWaveFunction{g, psi, psi0.hbar});
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = (times[i] - times[i - 1]) / substeps;
    Eigen::VectorXcd half_kick(n), drift(n);
    for (int j = 0; j < n; ++j) half_kick[j] = std::polar(1.0, -vx[j] * dt / (2.0 * psi0.hbar));
    for (int j = 0; j < n; ++j)
      drift[j] = std::polar(1.0, -psi0.hbar * k2[j] * dt / (2.0 * mass));
    for (int s = 0; s < substeps; ++s) {
      psi = psi.cwiseProduct(half_kick);
      psi = detail::fft_inv(detail::fft_fwd(psi).cwiseProduct(drift));
      psi = psi.cwiseProduct(half_kick);
    }
    out.push_back(GridWaveFunction{g, psi, psi0.hbar});
  }
  return out;
}

/// Crank-Nicolson cross-check: 3-point Laplacian, Dirichlet box, complex
/// Thomas solve. Second order in dt and dx; unitary up to rounding.
inline std::vector<GridWaveFunction> crank_nicolson_evolve(const GridWaveFunction& psi0,
                                                           const Potential& V, double mass,
                                                           const std::vector<double>& times,
                                                           int substeps = 1) {
  detail::check_hj_times(times, "crank_nicolson_evolve");
  if (substeps < 1) throw InvalidInput("crank_nicolson_evolve: substeps < 1");
  if (!V) throw InvalidInput("crank_nicolson_evolve: potential is empty");
  const SpatialGrid& g = psi0.grid;
  const int n = g.n;
  const double dx2 = g.dx() * g.dx();
  const double t_off = -psi0.hbar * psi0.hbar / (2.0 * mass * dx2);
  Eigen::VectorXd diag_h(n);
  for (int j = 0; j < n; ++j)
    diag_h[j] = psi0.hbar * psi0.hbar / (mass * dx2) + V(g.x(j));

  std::vector<GridWaveFunction> out;
  out.reserve(times.size());
  Eigen::VectorXcd psi = psi0.psi;
  out.push_back(GridWaveFunction{g, psi, psi0.hbar});
  Eigen::VectorXcd cp(n), dp(n), rhs(n);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = (times[i] - times[i - 1]) / substeps;
    const Complex lam(0.0, dt / (2.0 * psi0.hbar));
    const Complex a = lam * t_off;  // off-diagonal of the implicit matrix
    for (int s = 0; s < substeps; ++s) {
      for (int j = 0; j < n; ++j) {
        const Complex hpsi = diag_h[j] * psi[j] + t_off * ((j > 0 ? psi[j - 1] : Complex(0)) +
                                                           (j + 1 < n ? psi[j + 1] : Complex(0)));
        rhs[j] = psi[j] - lam * hpsi;
      }
      // Thomas sweep for (I + lam H) psi_next = rhs
      Complex b0 = Complex(1.0) + lam * diag_h[0];
      cp[0] = a / b0;
      dp[0] = rhs[0] / b0;
      for (int j = 1; j < n; ++j) {
        const Complex b = Complex(1.0) + lam * diag_h[j];
        const Complex denom = b - a * cp[j - 1];
        cp[j] = a / denom;
        dp[j] = (rhs[j] - a * dp[j - 1]) / denom;
      }
      psi[n - 1] = dp[n - 1];
      for (int j = n - 2; j >= 0; --j) psi[j] = dp[j] - cp[j] * psi[j + 1];
    }
    out.push_back(GridWaveFunction{g, psi, psi0.hbar});
  }
  return out;
}

/// Per-hbar sup gaps between the Madelung data of the Schrodinger evolution
/// and the classical pair, at the final time.
struct CorrespondenceReport {
  std::vector<double> hbars;
  std::vector<double> rho_gaps;
  std::vector<double> S_gaps;

  bool monotone() const {
    for (std::size_t i = 1; i < hbars.size(); ++i)
      if (!(rho_gaps[i] < rho_gaps[i - 1]) || !(S_gaps[i] < S_gaps[i - 1])) return false;
    return true;
  }

  /// Header `hbar,sup_gap_rho,sup_gap_S`.
  void write_csv(std::ostream& os) const {
    os << "hbar,sup_gap_rho,sup_gap_S\n";
    for (std::size_t i = 0; i < hbars.size(); ++i)
      os << fmt17(hbars[i]) << ',' << fmt17(rho_gaps[i]) << ',' << fmt17(S_gaps[i]) << '\n';
  }
};

/// Runs both sides from a shared (rho0, S0): classically once, quantum
/// mechanically per hbar with psi0 = sqrt(rho0) e^{iS0/hbar}, and reports the
/// final-time sup gaps over the interior half-box (S compared modulo the
/// 2 pi hbar unwrap branch at the density maximum). Caustics abort.
inline CorrespondenceReport correspondence_experiment(const ClassicalHJState& initial,
                                                      const std::vector<double>& hbars,
                                                      double t_final, int time_samples,
                                                      int quantum_substeps = 4) {
  if (hbars.size() < 2)
    throw InvalidInput("correspondence_experiment: need at least 2 hbar values");
  for (std::size_t i = 1; i < hbars.size(); ++i)
    if (!(hbars[i] < hbars[i - 1]))
      throw InvalidInput("correspondence_experiment: hbar must strictly decrease");
  if (!(t_final > 0.0)) throw InvalidInput("correspondence_experiment: t_final must be positive");
  if (time_samples < 2) throw InvalidInput("correspondence_experiment: need time_samples >= 2");

  const SpatialGrid& g = initial.grid;
  std::vector<double> times;
  for (int i = 0; i < time_samples; ++i)
    times.push_back(t_final * i / double(time_samples - 1));
  const ClassicalHJState final_classical = hj_evolve(initial, times).back();

  CorrespondenceReport report;
  const double frac = 0.5;
  for (double hb : hbars) {
    Eigen::VectorXcd psi(g.n);
    for (int j = 0; j < g.n; ++j)
      psi[j] = std::sqrt(std::max(initial.rho[j], 0.0)) *
               std::polar(1.0, initial.S[j] / hb);
    psi /= std::sqrt(psi.squaredNorm() * g.dx());
    const GridWaveFunction w0{g, std::move(psi), hb};
    const GridWaveFunction wt =
        split_step_evolve(w0, initial.potential, initial.mass, times, quantum_substeps).back();
    const MadelungFields f = madelung_decompose(wt);
    int ref = 0;
    f.rho.maxCoeff(&ref);
    const double two_pi_h = 2.0 * std::numbers::pi * hb;
    const double branch =
        std::round((f.S[ref] - final_classical.S[ref]) / two_pi_h) * two_pi_h;
    double rho_gap = 0.0, s_gap = 0.0;
    for (int j = 0; j < g.n; ++j) {
      if (std::abs(g.x(j)) > frac * g.extent) continue;
      rho_gap = std::max(rho_gap, std::abs(f.rho[j] - final_classical.rho[j]));
      if (f.phase_defined[static_cast<std::size_t>(j)])
        s_gap = std::max(s_gap, std::abs(f.S[j] - branch - final_classical.S[j]));
    }
    report.hbars.push_back(hb);
    report.rho_gaps.push_back(rho_gap);
    report.S_gaps.push_back(s_gap);
  }
  return report;
}

/// Snapshot export, header `x,rho,S`, 17 significant digits. Masked phases
/// print as nan.
inline void write_madelung_csv(const MadelungFields& f, std::ostream& os) {
  os << "x,rho,S\n";
  for (int j = 0; j < f.grid.n; ++j) {
    const bool ok = f.phase_defined[static_cast<std::size_t>(j)] != 0;
    os << fmt17(f.grid.x(j)) << ',' << fmt17(f.rho[j]) << ','
       << (ok ? fmt17(f.S[j]) : std::string("nan")) << '\n';
  }
}

}  // namespace ncham
