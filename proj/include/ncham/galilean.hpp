#pragma once

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "ncham/algebra.hpp"
#include "ncham/io.hpp"

namespace ncham {

enum class RepMode { kGrid, kOscillator };

/// Position and momentum on a finite-dimensional carrier space.
///
/// Grid mode samples x on n uniform points covering [-extent, extent) and
/// realizes P as the spectral derivative times -i*hbar (Nyquist mode zeroed so
/// P stays self-adjoint). Oscillator mode truncates the ladder operators at
/// n levels with length scale sqrt(hbar/mass) (unit reference frequency).
///
/// No finite representation satisfies [X,P] = i*hbar*I as a matrix identity:
/// the left side is traceless and the right side is not. Every verification in
/// this module is therefore state-wise, restricted to states that stay clear
/// of the grid boundary or the truncation edge.
struct TruncatedRep {
  RepMode mode = RepMode::kGrid;
  int size = 0;
  double extent = 0.0;
  double hbar = 1.0;
  double mass = 1.0;
  AlgebraElement X;
  AlgebraElement P;

  double dx() const { return 2.0 * extent / size; }
  double grid_point(int j) const { return (j - size / 2) * dx(); }
};

namespace detail {

/// Circulant spectral derivative times -i*hbar: P = F^* diag(hbar k) F with
/// the Nyquist wavenumber dropped. Entries depend only on u - v mod n.
inline AlgebraElement spectral_momentum(int n, double extent, double hbar) {
  const double dk = std::numbers::pi / extent;
  std::vector<Complex> first(n);
  for (int m = 0; m < n; ++m) {
    Complex acc = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k == n / 2) continue;
      const double kappa = dk * (k <= n / 2 ? k : k - n);
      acc += hbar * kappa * std::polar(1.0, 2.0 * std::numbers::pi * k * m / n);
    }
    first[m] = acc / static_cast<double>(n);
  }
  AlgebraElement p(n, n);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) p(u, v) = first[((u - v) % n + n) % n];
  return p;
}

}  // namespace detail

inline TruncatedRep build_rep(RepMode mode, int size, double extent, double hbar, double mass) {
  if (size < 4) throw InvalidInput("build_rep: size must be at least 4");
  if (!(hbar > 0.0) || !(mass > 0.0)) throw InvalidInput("build_rep: hbar and mass must be positive");
  TruncatedRep rep;
  rep.mode = mode;
  rep.size = size;
  rep.hbar = hbar;
  rep.mass = mass;
  if (mode == RepMode::kGrid) {
    if (!(extent > 0.0)) throw InvalidInput("build_rep: grid mode needs a positive extent");
    rep.extent = extent;
    rep.X = AlgebraElement::Zero(size, size);
    for (int j = 0; j < size; ++j) rep.X(j, j) = rep.grid_point(j);
    rep.P = detail::spectral_momentum(size, extent, hbar);
  } else {
    rep.extent = 0.0;
    AlgebraElement lower = AlgebraElement::Zero(size, size);
    for (int k = 1; k < size; ++k) lower(k - 1, k) = std::sqrt(static_cast<double>(k));
    const AlgebraElement raise = lower.adjoint();
    const double ell = std::sqrt(hbar / mass);
    rep.X = (ell / std::sqrt(2.0)) * (lower + raise);
    rep.P = Complex(0, 1) * (hbar / (ell * std::sqrt(2.0))) * (raise - lower);
  }
  return rep;
}

/// One verified relation on one test state (state -1 marks a matrix-level
/// identity that needs no state).
struct RelationResidual {
  std::string relation;
  int state = -1;
  double residual = 0.0;
};

struct GalileanReport {
  std::vector<RelationResidual> rows;

  double max_residual() const {
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.residual);
    return worst;
  }
  bool all_below(double tol) const { return max_residual() < tol; }

  void write_csv(std::ostream& os) const {
    os << "relation_id,state_id,residual\n";
    for (const auto& r : rows) os << r.relation << ',' << r.state << ',' << fmt17(r.residual) << '\n';
  }
};

/// Norm fraction a unit state carries on the outer n/8 grid points per side,
/// or on the top n/8 oscillator levels.
inline double edge_fraction(const TruncatedRep& rep, const StateVector& psi) {
  if (psi.size() != rep.size) throw DimensionError("edge_fraction: state size mismatch");
  const double total = psi.squaredNorm();
  if (total <= 0.0) throw InvalidInput("edge_fraction: zero state");
  const int band = std::max(1, rep.size / 8);
  double edge = 0.0;
  if (rep.mode == RepMode::kGrid) {
    for (int j = 0; j < band; ++j) edge += std::norm(psi[j]) + std::norm(psi[rep.size - 1 - j]);
  } else {
    for (int j = rep.size - band; j < rep.size; ++j) edge += std::norm(psi[j]);
  }
  return edge / total;
}

namespace detail {

inline void require_interior(const TruncatedRep& rep, const StateVector& psi, int index) {
  const double f = edge_fraction(rep, psi);
  if (f >= 1e-8)
    throw PreconditionViolated("state " + std::to_string(index) +
                               " carries norm fraction " + fmt17(f) +
                               " on the representation edge (limit 1e-8)");
}

}  // namespace detail

/// State-wise canonical commutation check: ||([X,P] - i hbar)psi|| per state.
inline GalileanReport verify_ccr(const TruncatedRep& rep, const std::vector<StateVector>& states) {
  GalileanReport report;
  const AlgebraElement defect =
      commutator(rep.X, rep.P) - Complex(0, rep.hbar) * AlgebraElement::Identity(rep.size, rep.size);
  for (int i = 0; i < static_cast<int>(states.size()); ++i) {
    const StateVector psi = states[i].normalized();
    detail::require_interior(rep, psi, i);
    report.rows.push_back({"ccr", i, (defect * psi).norm()});
  }
  return report;
}

/// Free-particle generators over a representation: H = P^2/2m and the boost
/// G(t) = P t - m X. The central part of the boost is set to zero; a multiple
/// of the identity drops out of every commutator tested here.
struct GalileanGenerators {
  TruncatedRep rep;
  AlgebraElement H;

  AlgebraElement boost(double t) const { return (rep.P * t - rep.mass * rep.X).eval(); }
};

inline GalileanGenerators make_galilean_generators(const TruncatedRep& rep) {
  return GalileanGenerators{rep, (rep.P * rep.P / (2.0 * rep.mass)).eval()};
}

/// State-wise residuals of the boost sector: [G,X] = -i hbar t, [P,G] = i hbar m,
/// [H,G] = i hbar P, [H,X] = -(i hbar/m) P, and [H,P] = 0.
inline GalileanReport verify_boost_and_free_hamiltonian(const GalileanGenerators& g, double t,
                                                        const std::vector<StateVector>& states) {
  GalileanReport report;
  const TruncatedRep& rep = g.rep;
  const AlgebraElement gt = g.boost(t);
  const Complex ih(0, rep.hbar);
  const AlgebraElement gx = commutator(gt, rep.X);
  const AlgebraElement pg = commutator(rep.P, gt);
  const AlgebraElement hg = commutator(g.H, gt);
  const AlgebraElement hx = commutator(g.H, rep.X);
  const AlgebraElement hp = commutator(g.H, rep.P);
  for (int i = 0; i < static_cast<int>(states.size()); ++i) {
    const StateVector psi = states[i].normalized();
    detail::require_interior(rep, psi, i);
    report.rows.push_back({"boost_position", i, (gx * psi + ih * t * psi).norm()});
    report.rows.push_back({"momentum_boost", i, (pg * psi - ih * rep.mass * psi).norm()});
    report.rows.push_back({"hamiltonian_boost", i, (hg * psi - ih * (rep.P * psi)).norm()});
    report.rows.push_back(
        {"hamiltonian_position", i, (hx * psi + (ih / rep.mass) * (rep.P * psi)).norm()});
    report.rows.push_back({"hamiltonian_momentum", i, (hp * psi).norm()});
  }
  return report;
}

/// Spin block (hbar/2) sigma_k tensored against the spatial identity. The
/// su(2) relations are exact matrix identities, as is commutation with the
/// spatial factor.
inline GalileanReport verify_spin_block(const TruncatedRep& rep) {
  GalileanReport report;
  const int n = rep.size;
  const AlgebraElement is = AlgebraElement::Identity(2, 2);
  const AlgebraElement in = AlgebraElement::Identity(n, n);
  const double h = rep.hbar;
  const AlgebraElement sig[3] = {pauli_x(), pauli_y(), pauli_z()};
  AlgebraElement s[3];
  for (int k = 0; k < 3; ++k)
    s[k] = Eigen::kroneckerProduct((0.5 * h * sig[k]).eval(), in).eval();
  const char* names[3] = {"x", "y", "z"};
  for (int j = 0; j < 3; ++j) {
    const int k = (j + 1) % 3, l = (j + 2) % 3;
    report.rows.push_back({std::string("spin_su2_") + names[j] + names[k],
                           -1,
                           (commutator(s[j], s[k]) - Complex(0, h) * s[l]).cwiseAbs().maxCoeff()});
    report.rows.push_back(
        {std::string("spin_self_") + names[j], -1, commutator(s[j], s[j]).cwiseAbs().maxCoeff()});
  }
  const AlgebraElement xs = Eigen::kroneckerProduct(is, rep.X).eval();
  const AlgebraElement ps = Eigen::kroneckerProduct(is, rep.P).eval();
  for (int k = 0; k < 3; ++k) {
    report.rows.push_back(
        {std::string("spin_position_") + names[k], -1, commutator(xs, s[k]).cwiseAbs().maxCoeff()});
    report.rows.push_back(
        {std::string("spin_momentum_") + names[k], -1, commutator(ps, s[k]).cwiseAbs().maxCoeff()});
  }
  return report;
}

/// Normalized grid Gaussian centered at (x0, p0) with position width sigma.
inline StateVector grid_gaussian(const TruncatedRep& rep, double x0, double p0, double sigma) {
  if (rep.mode != RepMode::kGrid) throw InvalidInput("grid_gaussian: rep is not a grid");
  if (!(sigma > 0.0)) throw InvalidInput("grid_gaussian: sigma must be positive");
  StateVector psi(rep.size);
  for (int j = 0; j < rep.size; ++j) {
    const double x = rep.grid_point(j);
    psi[j] = std::exp(-(x - x0) * (x - x0) / (4.0 * sigma * sigma)) *
             std::polar(1.0, p0 * x / rep.hbar);
  }
  return psi.normalized();
}

/// Truncated coherent state |alpha>, renormalized after truncation.
inline StateVector coherent_state(const TruncatedRep& rep, Complex alpha) {
  if (rep.mode != RepMode::kOscillator) throw InvalidInput("coherent_state: rep is not oscillator");
  StateVector psi(rep.size);
  Complex term = 1.0;
  psi[0] = term;
  for (int k = 1; k < rep.size; ++k) {
    term *= alpha / std::sqrt(static_cast<double>(k));
    psi[k] = term;
  }
  return psi.normalized();
}

}  // namespace ncham
