#include <numbers>
#include <sstream>

#include "ncham/dynamics.hpp"
#include "ncham/galilean.hpp"
#include "support.hpp"

using namespace ncham;
using test::gap;
using test::max_abs;

namespace {

GAHS random_quantum_system(SplitMix64& rng, int n, double hbar) {
  return make_gahs(make_gass(standard_ads(n), Complex(0.0, -hbar)), random_hermitian(rng, n));
}

double real_expectation(const StateVector& psi, const AlgebraElement& a) {
  return ((psi.adjoint() * (a * psi))(0, 0)).real();
}

}  // namespace

TEST_CASE("hamiltonian validation") {
  SplitMix64 rng(60);
  REQUIRE_THROWS_AS(make_gahs(make_gass(standard_ads(3), Complex(0, -1)), random_matrix(rng, 3)),
                    InvalidHamiltonian);
  REQUIRE_THROWS_AS(make_gahs(make_gass(standard_ads(3), Complex(0, -1)), random_hermitian(rng, 2)),
                    DimensionError);
  REQUIRE_THROWS_AS(standard_quantum_gahs(pauli_z(), 0.0), InvalidInput);
  const GAHS sys = standard_quantum_gahs(pauli_z(), 0.25);
  REQUIRE(sys.gass.beta == Complex(0.0, -0.25));
}

TEST_CASE("heisenberg evolution") {
  const double hbar = 0.7, omega = 1.3;
  const GAHS sys = standard_quantum_gahs((0.5 * hbar * omega * pauli_z()).eval(), hbar);
  const auto times = uniform_times(0.0, 2.0, 9);

  SECTION("identity and the hamiltonian itself stay constant") {
    for (const AlgebraElement& a0 :
         {AlgebraElement::Identity(2, 2).eval(), sys.hamiltonian}) {
      const Trajectory traj = heisenberg_evolve(sys, a0, times);
      for (const auto& v : traj.values) REQUIRE(gap(v, a0) < 1e-13);
    }
  }
  SECTION("two-level precession oracle") {
    // By hand: dA/dt = (i/hbar)[H,A] rotates sigma_x into -sigma_y.
    const Trajectory traj = heisenberg_evolve(sys, pauli_x(), times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const AlgebraElement expected =
          std::cos(omega * times[i]) * pauli_x() - std::sin(omega * times[i]) * pauli_y();
      REQUIRE(gap(traj.values[i], expected) < 1e-12);
    }
  }
  SECTION("commuting observables are constants of motion") {
    SplitMix64 rng(61);
    const GAHS rsys = random_quantum_system(rng, 4, 1.0);
    const AlgebraElement conserved =
        rsys.hamiltonian * rsys.hamiltonian + 2.0 * rsys.hamiltonian;
    const Trajectory traj = heisenberg_evolve(rsys, conserved, uniform_times(0.0, 3.0, 7));
    for (const auto& v : traj.values) REQUIRE(gap(v, conserved) < 1e-10);
  }
}

TEST_CASE("integration route agrees with the conjugation route") {
  SplitMix64 rng(62);
  const GAHS sys = random_quantum_system(rng, 4, 1.0);
  const AlgebraElement a0 = random_hermitian(rng, 4);

  SECTION("cross-check over unit time") {
    REQUIRE(heisenberg_route_gap(sys, a0, 1.0, 400) < 1e-8);
  }
  SECTION("fourth-order convergence") {
    const double e16 = heisenberg_route_gap(sys, a0, 1.0, 16);
    const double e32 = heisenberg_route_gap(sys, a0, 1.0, 32);
    const double e64 = heisenberg_route_gap(sys, a0, 1.0, 64);
    REQUIRE(e16 / e32 > 12.0);
    REQUIRE(e16 / e32 < 20.0);
    REQUIRE(e32 / e64 > 12.0);
    REQUIRE(e32 / e64 < 20.0);
  }
}

TEST_CASE("schrodinger evolution") {
  const double hbar = 0.7, omega = 1.3;
  const GAHS sys = standard_quantum_gahs((0.5 * hbar * omega * pauli_z()).eval(), hbar);

  SECTION("stationary state picks up only a phase") {
    StateVector up(2);
    up << 1.0, 0.0;  // eigenvalue +hbar*omega/2
    const auto times = uniform_times(0.0, 4.0, 11);
    const Trajectory traj = schrodinger_evolve(sys, up, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const Complex phase = std::polar(1.0, -0.5 * omega * times[i]);
      REQUIRE((traj.values[i] - phase * up).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SECTION("initial sample is the initial state") {
    StateVector psi(2);
    psi << std::sqrt(0.3), std::sqrt(0.7);
    const Trajectory traj = schrodinger_evolve(sys, psi, uniform_times(0.0, 1.0, 3));
    REQUIRE((traj.values.front() - psi).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("norm and level populations are preserved") {
    StateVector psi(2);
    psi << Complex(0.6, 0.0), Complex(0.0, 0.8);
    const Trajectory traj = schrodinger_evolve(sys, psi, uniform_times(0.0, 5.0, 21));
    for (const auto& v : traj.values) {
      REQUIRE(std::abs(v.norm() - 1.0) < 1e-10);
      REQUIRE(std::abs(std::norm(v(0, 0)) - 0.36) < 1e-12);
    }
  }
  SECTION("unnormalized input is rejected") {
    StateVector bad(2);
    bad << 1.0, 1.0;
    REQUIRE_THROWS_AS(schrodinger_evolve(sys, bad, uniform_times(0.0, 1.0, 3)), InvalidInput);
  }
}

TEST_CASE("picture equivalence") {
  SplitMix64 rng(63);
  const GAHS sys = random_quantum_system(rng, 4, 1.0);
  const StateVector psi = random_state(rng, 4);
  const AlgebraElement a = random_hermitian(rng, 4);

  REQUIRE(picture_equivalence_check(sys, psi, a, 0.0) < 1e-13);
  REQUIRE(picture_equivalence_check(sys, psi, AlgebraElement::Identity(4, 4), 2.7) < 1e-12);
  for (int trial = 0; trial < 50; ++trial) {
    const GAHS s = random_quantum_system(rng, 4, 1.0);
    REQUIRE(picture_equivalence_check(s, random_state(rng, 4), random_hermitian(rng, 4), 1.0) <
            1e-10);
  }
}

TEST_CASE("classical free particle") {
  const double m = 1.7;
  ClassicalHamiltonianSystem sys{
      1,
      [m](const Eigen::VectorXd&, const Eigen::VectorXd& p) { return p.squaredNorm() / (2 * m); },
      nullptr, nullptr, true};
  PhasePoint z0{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.9)};
  const auto times = uniform_times(0.0, 4.0, 9);
  const PhaseTrajectory traj = classical_evolve(sys, z0, times, 4);
  for (std::size_t i = 0; i < times.size(); ++i) {
    // Linear flow is exact up to finite-difference roundoff in the gradient.
    REQUIRE(std::abs(traj.values[i].q[0] - 0.9 * times[i] / m) < 1e-10);
    REQUIRE(traj.values[i].p[0] == 0.9);
  }
}

TEST_CASE("classical harmonic oscillator energy behavior") {
  ClassicalHamiltonianSystem sho{1,
                                 [](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
                                   return 0.5 * (p.squaredNorm() + q.squaredNorm());
                                 },
                                 nullptr, nullptr, true};
  const double period = 2.0 * std::numbers::pi;
  const double dt = period / 1000.0;
  PhasePoint z0{Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Zero(1)};

  SECTION("fixed point at the origin") {
    PhasePoint origin{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    const PhaseTrajectory traj = classical_evolve(sho, origin, uniform_times(0.0, 7.0, 8), 100);
    for (const auto& z : traj.values) {
      REQUIRE(std::abs(z.q[0]) < 1e-12);
      REQUIRE(std::abs(z.p[0]) < 1e-12);
    }
  }
  SECTION("synchronized energy oscillates inside the second-order envelope") {
    // Exact for the leapfrog map on a linear force: the invariant ellipse
    // (1 - dt^2/4) q^2 + p^2 bounds |H(t) - H(0)|/H(0) by dt^2/4. Frozen from
    // that derivation; the bound is tight, so no secular drift can hide.
    const PhaseTrajectory traj =
        classical_evolve(sho, z0, uniform_times(0.0, 100.0 * period, 4001), 25);
    const double h0 = sho.hamiltonian(z0.q, z0.p);
    double worst = 0.0;
    for (const auto& z : traj.values)
      worst = std::max(worst, std::abs(sho.hamiltonian(z.q, z.p) - h0) / h0);
    const double envelope = dt * dt / 4.0;
    REQUIRE(worst < 1.05 * envelope);
    REQUIRE(worst > 0.5 * envelope);
  }
  SECTION("time-centered energy estimator is drift-free over 100 periods") {
    REQUIRE(leapfrog_energy_drift(sho, z0, 100.0 * period, 100000, 1.0) < 1e-6);
  }
  SECTION("phase-plane circle closes to integrator accuracy") {
    const PhaseTrajectory traj = classical_evolve(sho, z0, {0.0, period}, 1000);
    REQUIRE(std::abs(traj.values.back().q[0] - 2.0) < 1e-4);
    REQUIRE(std::abs(traj.values.back().p[0]) < 1e-4);
  }
}

TEST_CASE("rk4 fallback converges at fourth order") {
  ClassicalHamiltonianSystem quartic{1,
                                     [](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
                                       return 0.5 * p.squaredNorm() +
                                              0.25 * std::pow(q[0], 4);
                                     },
                                     nullptr, nullptr, false};
  PhasePoint z0{Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Zero(1)};
  const std::vector<double> grid{0.0, 1.0};
  const auto endpoint = [&](int spi) {
    const PhaseTrajectory t = classical_evolve(quartic, z0, grid, spi);
    return t.values.back();
  };
  const PhasePoint ref = endpoint(320);
  const auto err = [&](int spi) {
    const PhasePoint z = endpoint(spi);
    return std::max(std::abs(z.q[0] - ref.q[0]), std::abs(z.p[0] - ref.p[0]));
  };
  const double ratio = err(10) / err(20);
  REQUIRE(ratio > 12.0);
  REQUIRE(ratio < 20.0);
}

TEST_CASE("gradient failure surfaces as a numerics error") {
  ClassicalHamiltonianSystem bad{1,
                                 [](const Eigen::VectorXd& q, const Eigen::VectorXd&) {
                                   return std::log(q[0]);
                                 },
                                 nullptr, nullptr, false};
  PhasePoint z0{Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Zero(1)};
  REQUIRE_THROWS_AS(classical_evolve(bad, z0, {0.0, 1.0}, 1), NumericsError);
}

TEST_CASE("classical poisson bracket uses the reversed sign convention") {
  const auto fq = [](const Eigen::VectorXd& q, const Eigen::VectorXd&) { return q[0]; };
  const auto fp = [](const Eigen::VectorXd&, const Eigen::VectorXd& p) { return p[0]; };
  const auto fp2 = [](const Eigen::VectorXd&, const Eigen::VectorXd& p) { return p[0] * p[0]; };
  Eigen::VectorXd q = Eigen::VectorXd::Constant(1, 0.8);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(1, -1.4);
  REQUIRE(std::abs(classical_poisson_bracket(fp, fq, q, p) - 1.0) < 1e-9);
  REQUIRE(std::abs(classical_poisson_bracket(fq, fp, q, p) + 1.0) < 1e-9);
  REQUIRE(std::abs(classical_poisson_bracket(fp, fp, q, p)) < 1e-12);
  REQUIRE(std::abs(classical_poisson_bracket(fp2, fq, q, p) - 2.0 * p[0]) < 1e-8);
}

TEST_CASE("system isomorphism check") {
  SplitMix64 rng(64);
  const GASS g1 = make_gass(standard_ads(3), Complex(0.0, -1.0));
  const AlgebraElement h = random_hermitian(rng, 3);
  const GAHS sys1 = make_gahs(g1, h);

  SECTION("identity map on one system") {
    REQUIRE(gahs_isomorphism_check(sys1, sys1, AdsMorphism::identity(3)));
  }
  SECTION("unitary conjugation with the transported hamiltonian") {
    const AlgebraElement u = random_unitary(rng, 3);
    const AdsMorphism phi = AdsMorphism::conjugation(u);
    const GAHS sys2 = make_gahs(g1, (u * h * u.adjoint()).eval());
    REQUIRE(gahs_isomorphism_check(sys1, sys2, phi));
  }
  SECTION("hamiltonian mismatch fails") {
    const AlgebraElement u = random_unitary(rng, 3);
    const GAHS sys2 = make_gahs(
        g1, (u * h * u.adjoint() + AlgebraElement::Identity(3, 3)).eval());
    REQUIRE_FALSE(gahs_isomorphism_check(sys1, sys2, AdsMorphism::conjugation(u)));
  }
  SECTION("scale mismatch in the form fails") {
    const GAHS sys2 = make_gahs(make_gass(standard_ads(3), Complex(0.0, -2.0)), h);
    REQUIRE_FALSE(gahs_isomorphism_check(sys1, sys2, AdsMorphism::identity(3)));
  }
}

TEST_CASE("ehrenfest match for the quadratic hamiltonian") {
  const double hbar = 1.0, x0 = 1.0, p0 = 0.5;
  const TruncatedRep rep = build_rep(RepMode::kOscillator, 48, 0.0, hbar, 1.0);
  const GAHS sys =
      standard_quantum_gahs((rep.P * rep.P / 2.0 + rep.X * rep.X / 2.0).eval(), hbar);
  const StateVector psi = coherent_state(rep, Complex(x0, p0) / std::sqrt(2.0));
  const auto times = uniform_times(0.0, 2.0 * std::numbers::pi, 33);
  const Trajectory xt = heisenberg_evolve(sys, rep.X, times);
  const Trajectory pt = heisenberg_evolve(sys, rep.P, times);

  ClassicalHamiltonianSystem sho{
      1,
      [](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
        return 0.5 * (p.squaredNorm() + q.squaredNorm());
      },
      [](const Eigen::VectorXd& q, const Eigen::VectorXd&) { return q; },
      [](const Eigen::VectorXd&, const Eigen::VectorXd& p) { return p; },
      false};
  PhasePoint z0{Eigen::VectorXd::Constant(1, x0), Eigen::VectorXd::Constant(1, p0)};
  const PhaseTrajectory cl = classical_evolve(sho, z0, times, 64);

  double worst = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    worst = std::max(worst,
                     std::abs(real_expectation(psi, xt.values[i]) - cl.values[i].q[0]));
    worst = std::max(worst,
                     std::abs(real_expectation(psi, pt.values[i]) - cl.values[i].p[0]));
  }
  REQUIRE(worst < 1e-6);
}

TEST_CASE("trajectory serialization") {
  SECTION("operator trajectory") {
    const GAHS sys = standard_quantum_gahs(pauli_z(), 1.0);
    const Trajectory traj = heisenberg_evolve(sys, pauli_x(), uniform_times(0.0, 1.0, 3));
    std::ostringstream os;
    traj.write_csv(os);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    REQUIRE(header == "t,re_0_0,im_0_0,re_0_1,im_0_1,re_1_0,im_1_0,re_1_1,im_1_1");
    int rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    REQUIRE(rows == 3);
  }
  SECTION("phase trajectory") {
    ClassicalHamiltonianSystem sys{
        1,
        [](const Eigen::VectorXd&, const Eigen::VectorXd& p) { return 0.5 * p.squaredNorm(); },
        nullptr, nullptr, true};
    PhasePoint z0{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 1.0)};
    const PhaseTrajectory traj = classical_evolve(sys, z0, uniform_times(0.0, 1.0, 4));
    std::ostringstream os;
    traj.write_csv(os);
    REQUIRE(os.str().rfind("t,q0,p0\n", 0) == 0);
  }
}

TEST_CASE("time grid validation") {
  REQUIRE_THROWS_AS(uniform_times(0.0, 1.0, 1), InvalidInput);
  REQUIRE_THROWS_AS(uniform_times(1.0, 0.0, 4), InvalidInput);
  const GAHS sys = standard_quantum_gahs(pauli_z(), 1.0);
  REQUIRE_THROWS_AS(heisenberg_evolve(sys, pauli_x(), {0.0, 0.0}), InvalidInput);
  REQUIRE_THROWS_AS(heisenberg_evolve(sys, pauli_x(), {}), InvalidInput);
  REQUIRE_THROWS_AS(heisenberg_evolve_rk4(sys, pauli_x(), {0.0, 1.0}, 0), InvalidInput);
}
