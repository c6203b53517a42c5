#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

#include "ncham/symplectic.hpp"

namespace ncham {

/// Hamiltonian system over a symplectic derivation structure. The Hamiltonian
/// is an algebra element in energy units; time enters only through the flows.
struct GAHS {
  GASS gass;
  AlgebraElement hamiltonian;
};

inline GAHS make_gahs(GASS gass, const AlgebraElement& h) {
  detail::require_square(h, "make_gahs");
  if (h.rows() != gass.ads.algebra_dim) throw DimensionError("make_gahs: dimension mismatch");
  const double defect = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (defect > 1e-12)
    throw InvalidHamiltonian("make_gahs: hamiltonian not self-adjoint, defect " + fmt17(defect));
  return GAHS{std::move(gass), h};
}

/// Dynamics-only quantum system. The derivation basis is left empty: operator
/// and state evolution never touch it, and filling it in costs O(n^4) memory
/// for an n-level algebra. Basis-dependent operations reject the empty basis.
inline GAHS standard_quantum_gahs(const AlgebraElement& h, double hbar) {
  detail::require_square(h, "standard_quantum_gahs");
  if (!(hbar > 0.0)) throw InvalidInput("standard_quantum_gahs: hbar must be positive");
  const int n = static_cast<int>(h.rows());
  const Complex beta(0.0, -hbar);
  KForm omega(2, n, [beta](const std::vector<Derivation>& args) {
    return (beta * commutator(args[0].scaled_generator(), args[1].scaled_generator())).eval();
  });
  return make_gahs(GASS{ADS{n, {}}, std::move(omega), beta}, h);
}

namespace detail {

inline void check_times(const std::vector<double>& times, const char* where) {
  if (times.empty()) throw InvalidInput(std::string(where) + ": empty time grid");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw InvalidInput(std::string(where) + ": times must be strictly increasing");
}

/// hbar from a quantum scale beta = -i*hbar.
inline double quantum_hbar(const GASS& g, const char* where) {
  const double hbar = -g.beta.imag();
  if (!(hbar > 0.0) || std::abs(g.beta.real()) > 1e-15 * hbar)
    throw InvalidInput(std::string(where) + ": requires quantum scale beta = -i*hbar");
  return hbar;
}

struct HamiltonianEigen {
  Eigen::VectorXd energies;
  Eigen::MatrixXcd vectors;
};

inline HamiltonianEigen eigen_hamiltonian(const AlgebraElement& h, const char* where) {
  const double defect = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (defect > 1e-12)
    throw InvalidHamiltonian(std::string(where) + ": hamiltonian not self-adjoint, defect " +
                             fmt17(defect));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
  return HamiltonianEigen{solver.eigenvalues(), solver.eigenvectors()};
}

}  // namespace detail

/// Time-stamped operator (or state-column) samples.
struct Trajectory {
  std::vector<double> times;
  std::vector<AlgebraElement> values;

  /// Header `t,re_r_c,im_r_c,...`, entries flattened row-major.
  void write_csv(std::ostream& os) const {
    os << 't';
    if (!values.empty()) {
      for (int r = 0; r < values[0].rows(); ++r)
        for (int c = 0; c < values[0].cols(); ++c)
          os << ",re_" << r << '_' << c << ",im_" << r << '_' << c;
    }
    os << '\n';
    for (std::size_t i = 0; i < times.size(); ++i) {
      os << fmt17(times[i]);
      for (int r = 0; r < values[i].rows(); ++r)
        for (int c = 0; c < values[i].cols(); ++c)
          os << ',' << fmt17(values[i](r, c).real()) << ',' << fmt17(values[i](r, c).imag());
      os << '\n';
    }
  }
};

inline std::vector<double> uniform_times(double t0, double t1, int samples) {
  if (samples < 2 || !(t1 > t0)) throw InvalidInput("uniform_times: need samples >= 2, t1 > t0");
  std::vector<double> t(samples);
  for (int i = 0; i < samples; ++i) t[i] = t0 + (t1 - t0) * i / (samples - 1);
  return t;
}

/// Exact Heisenberg flow A(t) = U(t)^{-1} A0 U(t), U(t) = exp(-iH(t-t0)/hbar),
/// through the Hermitian eigendecomposition of H. A0 is the datum at the
/// first grid time t0.
inline Trajectory heisenberg_evolve(const GAHS& sys, const AlgebraElement& a0,
                                    const std::vector<double>& times) {
  detail::check_times(times, "heisenberg_evolve");
  detail::require_same_dim(sys.hamiltonian, a0, "heisenberg_evolve");
  const double hbar = detail::quantum_hbar(sys.gass, "heisenberg_evolve");
  const auto eig = detail::eigen_hamiltonian(sys.hamiltonian, "heisenberg_evolve");
  const Eigen::MatrixXcd w = eig.vectors.adjoint() * a0 * eig.vectors;
  const int n = static_cast<int>(w.rows());
  const double t0 = times.front();
  Trajectory traj;
  traj.times = times;
  traj.values.reserve(times.size());
  for (double t : times) {
    Eigen::MatrixXcd phased(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        phased(j, k) =
            w(j, k) * std::polar(1.0, (eig.energies[j] - eig.energies[k]) * (t - t0) / hbar);
    traj.values.push_back(eig.vectors * phased * eig.vectors.adjoint());
  }
  return traj;
}

/// Independent route: classic 4th-order integration of dA/dt = {H,A}. One
/// sample per grid point, `steps_per_interval` substeps between samples.
inline Trajectory heisenberg_evolve_rk4(const GAHS& sys, const AlgebraElement& a0,
                                        const std::vector<double>& times,
                                        int steps_per_interval = 16) {
  detail::check_times(times, "heisenberg_evolve_rk4");
  detail::require_same_dim(sys.hamiltonian, a0, "heisenberg_evolve_rk4");
  if (steps_per_interval < 1) throw InvalidInput("heisenberg_evolve_rk4: steps_per_interval < 1");
  detail::quantum_hbar(sys.gass, "heisenberg_evolve_rk4");
  (void)detail::eigen_hamiltonian(sys.hamiltonian, "heisenberg_evolve_rk4");
  const AlgebraElement& h = sys.hamiltonian;
  const Complex inv_beta = Complex(1.0, 0.0) / sys.gass.beta;
  const auto rhs = [&](const AlgebraElement& a) { return (inv_beta * commutator(h, a)).eval(); };
  Trajectory traj;
  traj.times = times;
  traj.values.reserve(times.size());
  AlgebraElement a = a0;
  traj.values.push_back(a);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = (times[i] - times[i - 1]) / steps_per_interval;
    for (int s = 0; s < steps_per_interval; ++s) {
      const AlgebraElement k1 = rhs(a);
      const AlgebraElement k2 = rhs(a + 0.5 * dt * k1);
      const AlgebraElement k3 = rhs(a + 0.5 * dt * k2);
      const AlgebraElement k4 = rhs(a + dt * k3);
      a += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    traj.values.push_back(a);
  }
  return traj;
}

/// Max entry gap at time t between the conjugation route and the integrated
/// route. The two are independent implementations of the same flow.
inline double heisenberg_route_gap(const GAHS& sys, const AlgebraElement& a0, double t,
                                   int nsteps) {
  const std::vector<double> grid{0.0, t};
  const Trajectory exact = heisenberg_evolve(sys, a0, grid);
  const Trajectory stepped = heisenberg_evolve_rk4(sys, a0, grid, nsteps);
  return (exact.values.back() - stepped.values.back()).cwiseAbs().maxCoeff();
}

/// Schroedinger flow psi(t) = exp(-iH(t - t0)/hbar) psi0 with t0 the first
/// grid time. psi0 must arrive normalized.
inline Trajectory schrodinger_evolve(const GAHS& sys, const StateVector& psi0,
                                     const std::vector<double>& times) {
  detail::check_times(times, "schrodinger_evolve");
  if (psi0.size() != sys.hamiltonian.rows())
    throw DimensionError("schrodinger_evolve: state dimension mismatch");
  if (std::abs(psi0.norm() - 1.0) > 1e-10)
    throw InvalidInput("schrodinger_evolve: psi0 must be unit norm");
  const double hbar = detail::quantum_hbar(sys.gass, "schrodinger_evolve");
  const auto eig = detail::eigen_hamiltonian(sys.hamiltonian, "schrodinger_evolve");
  const Eigen::VectorXcd coeff = eig.vectors.adjoint() * psi0;
  const double t0 = times.front();
  Trajectory traj;
  traj.times = times;
  traj.values.reserve(times.size());
  for (double t : times) {
    Eigen::VectorXcd evolved(coeff.size());
    for (int j = 0; j < coeff.size(); ++j)
      evolved[j] = coeff[j] * std::polar(1.0, -eig.energies[j] * (t - t0) / hbar);
    traj.values.push_back(eig.vectors * evolved);
  }
  return traj;
}

/// |<psi(t), A psi(t)> - <psi0, A(t) psi0>|: the two pictures must produce
/// the same expectations. t >= 0, measured from the shared initial instant.
inline double picture_equivalence_check(const GAHS& sys, const StateVector& psi0,
                                        const AlgebraElement& a, double t) {
  if (t < 0.0) throw InvalidInput("picture_equivalence_check: t must be nonnegative");
  const std::vector<double> grid =
      t > 0.0 ? std::vector<double>{0.0, t} : std::vector<double>{0.0};
  const Trajectory states = schrodinger_evolve(sys, psi0, grid);
  const Trajectory ops = heisenberg_evolve(sys, a, grid);
  const StateVector psi_t = states.values.back();
  const AlgebraElement& a_t = ops.values.back();
  const Complex schro = (psi_t.adjoint() * (a * psi_t))(0, 0);
  const Complex heis = (psi0.adjoint() * (a_t * psi0))(0, 0);
  return std::abs(schro - heis);
}

/// Phase point (q, p) of a finite-dimensional classical system.
struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
};

/// Classical Hamiltonian mechanics on R^{2n} with the flat form sum dp^dq.
/// Gradients fall back to central differences when not supplied analytically.
/// `separable` asserts H = T(p) + V(q) and unlocks the leapfrog integrator.
struct ClassicalHamiltonianSystem {
  int n_dof = 1;
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> hamiltonian;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> grad_q;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> grad_p;
  bool separable = false;
};

struct PhaseTrajectory {
  std::vector<double> times;
  std::vector<PhasePoint> values;

  /// Header `t,q0,...,p0,...`.
  void write_csv(std::ostream& os) const {
    os << 't';
    if (!values.empty()) {
      for (int i = 0; i < values[0].q.size(); ++i) os << ",q" << i;
      for (int i = 0; i < values[0].p.size(); ++i) os << ",p" << i;
    }
    os << '\n';
    for (std::size_t s = 0; s < times.size(); ++s) {
      os << fmt17(times[s]);
      for (int i = 0; i < values[s].q.size(); ++i) os << ',' << fmt17(values[s].q[i]);
      for (int i = 0; i < values[s].p.size(); ++i) os << ',' << fmt17(values[s].p[i]);
      os << '\n';
    }
  }
};

namespace detail {

inline double checked_h(const ClassicalHamiltonianSystem& sys, const Eigen::VectorXd& q,
                        const Eigen::VectorXd& p) {
  const double v = sys.hamiltonian(q, p);
  if (!std::isfinite(v)) throw NumericsError("hamiltonian evaluated to a non-finite value");
  return v;
}

/// Central-difference step: eps^{1/3} * max(1, |coordinate|).
inline double fd_step(double coord) {
  static const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  return base * std::max(1.0, std::abs(coord));
}

inline Eigen::VectorXd fd_grad_q(const ClassicalHamiltonianSystem& sys, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& p) {
  Eigen::VectorXd g(q.size());
  Eigen::VectorXd probe = q;
  for (int i = 0; i < q.size(); ++i) {
    const double h = fd_step(q[i]);
    probe[i] = q[i] + h;
    const double hi = checked_h(sys, probe, p);
    probe[i] = q[i] - h;
    const double lo = checked_h(sys, probe, p);
    probe[i] = q[i];
    g[i] = (hi - lo) / (2.0 * h);
  }
  return g;
}

inline Eigen::VectorXd fd_grad_p(const ClassicalHamiltonianSystem& sys, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& p) {
  Eigen::VectorXd g(p.size());
  Eigen::VectorXd probe = p;
  for (int i = 0; i < p.size(); ++i) {
    const double h = fd_step(p[i]);
    probe[i] = p[i] + h;
    const double hi = checked_h(sys, q, probe);
    probe[i] = p[i] - h;
    const double lo = checked_h(sys, q, probe);
    probe[i] = p[i];
    g[i] = (hi - lo) / (2.0 * h);
  }
  return g;
}

inline Eigen::VectorXd grad_q(const ClassicalHamiltonianSystem& sys, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& p) {
  return sys.grad_q ? sys.grad_q(q, p) : fd_grad_q(sys, q, p);
}

inline Eigen::VectorXd grad_p(const ClassicalHamiltonianSystem& sys, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& p) {
  return sys.grad_p ? sys.grad_p(q, p) : fd_grad_p(sys, q, p);
}

}  // namespace detail

/// Hamilton's equations dq/dt = dH/dp, dp/dt = -dH/dq. Separable systems use
/// kick-drift-kick leapfrog (symplectic; energy error oscillates at second
/// order without secular drift), everything else classic RK4. Substeps refine
/// the integration between output samples.
inline PhaseTrajectory classical_evolve(const ClassicalHamiltonianSystem& sys,
                                        const PhasePoint& z0, const std::vector<double>& times,
                                        int steps_per_interval = 1) {
  detail::check_times(times, "classical_evolve");
  if (steps_per_interval < 1) throw InvalidInput("classical_evolve: steps_per_interval < 1");
  if (z0.q.size() != sys.n_dof || z0.p.size() != sys.n_dof)
    throw DimensionError("classical_evolve: phase point does not match n_dof");
  PhaseTrajectory traj;
  traj.times = times;
  traj.values.reserve(times.size());
  Eigen::VectorXd q = z0.q, p = z0.p;
  traj.values.push_back({q, p});
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = (times[i] - times[i - 1]) / steps_per_interval;
    for (int s = 0; s < steps_per_interval; ++s) {
      if (sys.separable) {
        p -= 0.5 * dt * detail::grad_q(sys, q, p);
        q += dt * detail::grad_p(sys, q, p);
        p -= 0.5 * dt * detail::grad_q(sys, q, p);
      } else {
        const auto f = [&sys](const Eigen::VectorXd& qq, const Eigen::VectorXd& pp) {
          return std::make_pair(detail::grad_p(sys, qq, pp),
                                (-detail::grad_q(sys, qq, pp)).eval());
        };
        const auto [k1q, k1p] = f(q, p);
        const auto [k2q, k2p] = f(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p);
        const auto [k3q, k3p] = f(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p);
        const auto [k4q, k4p] = f(q + dt * k3q, p + dt * k3p);
        q += (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        p += (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
      }
    }
    traj.values.push_back({q, p});
  }
  return traj;
}

/// sum_i (df/dp_i dg/dq_i - dg/dp_i df/dq_i), the sign convention with
/// {p, q} = +1. Partials by central differences at the given point.
inline double classical_poisson_bracket(
    const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& f,
    const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& g,
    const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
  if (q.size() != p.size()) throw DimensionError("classical_poisson_bracket: q/p size mismatch");
  ClassicalHamiltonianSystem fs{static_cast<int>(q.size()), f, nullptr, nullptr, false};
  ClassicalHamiltonianSystem gs{static_cast<int>(q.size()), g, nullptr, nullptr, false};
  const Eigen::VectorXd fq = detail::fd_grad_q(fs, q, p), fp = detail::fd_grad_p(fs, q, p);
  const Eigen::VectorXd gq = detail::fd_grad_q(gs, q, p), gp = detail::fd_grad_p(gs, q, p);
  return fp.dot(gq) - gp.dot(fq);
}

/// Leapfrog energy diagnostic for separable H with quadratic kinetic part
/// |p|^2/2m. The synchronized energy H(q_k, p_k) oscillates with amplitude
/// (omega dt)^2/4 for linear forces; the time-centered estimator
/// p_{k-1/2}.p_{k+1/2}/2m + V(q_k) used here is exactly conserved there, so
/// any secular drift it shows is a real integrator or roundoff defect.
inline double leapfrog_energy_drift(const ClassicalHamiltonianSystem& sys, const PhasePoint& z0,
                                    double t1, int nsteps, double mass) {
  if (!sys.separable) throw InvalidInput("leapfrog_energy_drift: system must be separable");
  if (nsteps < 1 || !(t1 > 0.0) || !(mass > 0.0))
    throw InvalidInput("leapfrog_energy_drift: bad parameters");
  const double dt = t1 / nsteps;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(sys.n_dof);
  const auto potential = [&](const Eigen::VectorXd& q) { return detail::checked_h(sys, q, zero); };
  Eigen::VectorXd q = z0.q;
  Eigen::VectorXd p_minus = z0.p + 0.5 * dt * detail::grad_q(sys, q, z0.p);
  Eigen::VectorXd p_plus = z0.p - 0.5 * dt * detail::grad_q(sys, q, z0.p);
  const double e0 = p_minus.dot(p_plus) / (2.0 * mass) + potential(q);
  const double scale = std::max(1.0, std::abs(e0));
  double worst = 0.0;
  for (int s = 0; s < nsteps; ++s) {
    q += dt * p_plus / mass;
    p_minus = p_plus;
    p_plus -= dt * detail::grad_q(sys, q, p_plus);
    worst = std::max(worst,
                     std::abs(p_minus.dot(p_plus) / (2.0 * mass) + potential(q) - e0) / scale);
  }
  return worst;
}

/// Phi carries system 1 onto system 2 when the pulled-back form matches on a
/// derivation-basis sweep and the Hamiltonians correspond (Phi^* K = H).
inline bool gahs_isomorphism_check(const GAHS& sys1, const GAHS& sys2, const AdsMorphism& phi,
                                   double tol = 1e-10) {
  if (sys1.gass.ads.algebra_dim != sys2.gass.ads.algebra_dim ||
      phi.dim() != sys1.gass.ads.algebra_dim)
    throw DimensionError("gahs_isomorphism_check: dimension mismatch");
  const AlgebraElement pulled_h = phi.inverse(sys2.hamiltonian);
  const double h_scale = std::max(1.0, sys1.hamiltonian.cwiseAbs().maxCoeff());
  if ((pulled_h - sys1.hamiltonian).cwiseAbs().maxCoeff() > tol * h_scale) return false;
  const KForm pulled = pullback(phi, sys2.gass.omega);
  const auto& basis = sys1.gass.ads.derivation_basis;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    for (std::size_t j = i + 1; j < basis.size(); ++j) {
      const AlgebraElement lhs = sys1.gass.omega({basis[i], basis[j]});
      const AlgebraElement rhs = pulled({basis[i], basis[j]});
      const double scale = std::max(1.0, lhs.cwiseAbs().maxCoeff());
      if ((lhs - rhs).cwiseAbs().maxCoeff() > tol * scale) return false;
    }
  }
  return true;
}

}  // namespace ncham
