#include <unsupported/Eigen/MatrixFunctions>

#include "ncham/symplectic.hpp"
#include "support.hpp"

using namespace ncham;
using test::gap;
using test::max_abs;

namespace {

/// Truncated oscillator pair with m = omega = 1. The commutator is
/// i*hbar*diag(1,...,1,-(n-1)); canonical relations hold below the edge.
void oscillator_pair(int n, double hbar, AlgebraElement& x, AlgebraElement& p) {
  AlgebraElement lower = AlgebraElement::Zero(n, n);
  for (int k = 1; k < n; ++k) lower(k - 1, k) = std::sqrt(static_cast<double>(k));
  const AlgebraElement raise = lower.adjoint();
  const double s = std::sqrt(hbar / 2.0);
  x = s * (lower + raise);
  p = Complex(0, 1) * s * (raise - lower);
}

}  // namespace

TEST_CASE("canonical two-form basics") {
  const ADS ads = standard_ads(2);
  const KForm wc = canonical_two_form(ads);
  const Derivation dx{pauli_x()}, dy{pauli_y()};
  REQUIRE(max_abs(wc({dx, dx})) == 0.0);
  REQUIRE(gap(wc({dx, dy}), Complex(0, 2) * pauli_z()) < 1e-14);
}

TEST_CASE("canonical two-form rejects a degenerate derivation space") {
  ADS ads;
  ads.algebra_dim = 3;
  AlgebraElement e01 = AlgebraElement::Zero(3, 3);
  e01(0, 1) = 1.0;
  // The span {I, E_01} has a two-dimensional commutant.
  ads.derivation_basis = {Derivation(AlgebraElement::Identity(3, 3)), Derivation(e01)};
  REQUIRE_THROWS_AS(canonical_two_form(ads), DegenerateStructure);
}

TEST_CASE("structure is closed and nondegenerate") {
  SplitMix64 rng(50);
  const GASS g = make_gass(standard_ads(3), Complex(1.0, 0.0));
  REQUIRE(closedness_residual(g) < 1e-12);
  REQUIRE(is_nondegenerate(g));

  const KForm domega = exterior_derivative(g.omega);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Derivation> args = {Derivation(random_traceless(rng, 3)),
                                    Derivation(random_traceless(rng, 3)),
                                    Derivation(random_traceless(rng, 3))};
    REQUIRE(max_abs(domega(args)) < 1e-12);
  }

  GASS degenerate{standard_ads(2),
                  KForm(2, 2, [](const std::vector<Derivation>&) {
                    return AlgebraElement::Zero(2, 2).eval();
                  }),
                  Complex(1.0, 0.0)};
  REQUIRE_FALSE(is_nondegenerate(degenerate));
}

TEST_CASE("quantum structure pins beta to -i hbar") {
  const QuantumSymplectic q = quantum_symplectic(standard_ads(2), 0.5);
  REQUIRE(q.gass.beta == Complex(0.0, -0.5));
  REQUIRE(q.hbar == 0.5);
  REQUIRE_THROWS_AS(quantum_symplectic(standard_ads(2), 0.0), InvalidInput);
  REQUIRE_THROWS_AS(quantum_symplectic(standard_ads(2), -1.0), InvalidInput);
}

TEST_CASE("hamiltonian derivations") {
  SplitMix64 rng(51);
  const GASS unit = make_gass(standard_ads(2), Complex(1.0, 0.0));
  const QuantumSymplectic q = quantum_symplectic(standard_ads(3), 0.7);

  SECTION("identity element generates the zero derivation") {
    const Derivation y = hamiltonian_derivation(unit, AlgebraElement::Identity(2, 2));
    REQUIRE(max_abs(y(pauli_x())) == 0.0);
  }
  SECTION("scale one reduces to the inner derivation") {
    const Derivation y = hamiltonian_derivation(unit, pauli_x());
    REQUIRE(gap(y(pauli_y()), Complex(0, 2) * pauli_z()) < 1e-14);
  }
  SECTION("quantum scale divides by -i hbar") {
    const AlgebraElement a = random_traceless(rng, 3);
    const AlgebraElement probe = random_matrix(rng, 3);
    const Derivation y = hamiltonian_derivation(q.gass, a);
    const AlgebraElement expected = commutator(a, probe) / Complex(0.0, -0.7);
    REQUIRE(gap(y(probe), expected) < 1e-13);
  }
  SECTION("analytic and linear-solve routes agree") {
    for (int trial = 0; trial < 5; ++trial) {
      const AlgebraElement a = random_traceless(rng, 3);
      const AlgebraElement probe = random_matrix(rng, 3);
      const Derivation direct = hamiltonian_derivation(q.gass, a);
      const Derivation solved = hamiltonian_derivation_solve(q.gass, a);
      REQUIRE(gap(direct(probe), solved(probe)) < 1e-10);
    }
  }
  SECTION("rank-deficient coefficient tensor is rejected") {
    // A single commuting generator annihilates the form entirely.
    ADS ads;
    ads.algebra_dim = 2;
    ads.derivation_basis = {Derivation(pauli_z())};
    GASS g{ads,
           KForm(2, 2,
                 [](const std::vector<Derivation>& args) {
                   return commutator(args[0].scaled_generator(), args[1].scaled_generator());
                 }),
           Complex(1.0, 0.0)};
    REQUIRE_THROWS_AS(hamiltonian_derivation_solve(g, pauli_x()), DegenerateStructure);
  }
}

TEST_CASE("poisson bracket") {
  SplitMix64 rng(52);
  const QuantumSymplectic q = quantum_symplectic(standard_ads(3), 0.4);

  SECTION("antisymmetry and the commutator form") {
    const AlgebraElement a = random_traceless(rng, 3);
    const AlgebraElement b = random_traceless(rng, 3);
    REQUIRE(max_abs(poisson_bracket(q.gass, a, a)) < 1e-13);
    REQUIRE(gap(poisson_bracket(q.gass, a, b), -poisson_bracket(q.gass, b, a)) < 1e-13);
    REQUIRE(gap(poisson_bracket(q.gass, a, b), commutator(a, b) / q.gass.beta) < 1e-13);
    const Derivation ya = hamiltonian_derivation(q.gass, a);
    REQUIRE(gap(poisson_bracket(q.gass, a, b), ya(b)) < 1e-13);
  }
  SECTION("canonical pair below the truncation edge") {
    const int n = 6;
    const double hbar = 0.4;
    AlgebraElement x, p;
    oscillator_pair(n, hbar, x, p);
    const QuantumSymplectic qn = quantum_symplectic(standard_ads(n), hbar);
    const AlgebraElement xp = poisson_bracket(qn.gass, x, p);
    const AlgebraElement px = poisson_bracket(qn.gass, p, x);
    // [X,P] = i hbar I holds on the span of the first n-1 basis vectors, so
    // {X,P} = -1 and {P,X} = +1 there; the corner entry carries the trace
    // obstruction.
    REQUIRE(gap(xp.topLeftCorner(n - 1, n - 1), -AlgebraElement::Identity(n - 1, n - 1)) < 1e-13);
    REQUIRE(gap(px.topLeftCorner(n - 1, n - 1), AlgebraElement::Identity(n - 1, n - 1)) < 1e-13);
    REQUIRE(std::abs(xp(n - 1, n - 1) - Complex(n - 1, 0)) < 1e-12);
  }
  SECTION("leibnitz rule") {
    for (int trial = 0; trial < 10; ++trial) {
      const AlgebraElement a = random_matrix(rng, 3);
      const AlgebraElement b = random_matrix(rng, 3);
      const AlgebraElement c = random_matrix(rng, 3);
      const AlgebraElement lhs = poisson_bracket(q.gass, a, b * c);
      const AlgebraElement rhs =
          poisson_bracket(q.gass, a, b) * c + b * poisson_bracket(q.gass, a, c);
      REQUIRE(gap(lhs, rhs) < 1e-11);
    }
  }
  SECTION("jacobi identity for both scales") {
    const GASS unit = make_gass(standard_ads(4), Complex(1.0, 0.0));
    const QuantumSymplectic q4 = quantum_symplectic(standard_ads(4), 1.3);
    SplitMix64 jrng(53);
    for (int trial = 0; trial < 100; ++trial) {
      const AlgebraElement a = random_matrix(jrng, 4);
      const AlgebraElement b = random_matrix(jrng, 4);
      const AlgebraElement c = random_matrix(jrng, 4);
      for (const GASS* g : {&unit, &q4.gass}) {
        const AlgebraElement cyc = poisson_bracket(*g, a, poisson_bracket(*g, b, c)) +
                                   poisson_bracket(*g, b, poisson_bracket(*g, c, a)) +
                                   poisson_bracket(*g, c, poisson_bracket(*g, a, b));
        REQUIRE(max_abs(cyc) < 1e-11);
      }
    }
  }
  SECTION("hamiltonian map is a lie-algebra homomorphism") {
    SplitMix64 hrng(54);
    for (int trial = 0; trial < 10; ++trial) {
      const AlgebraElement a = random_matrix(hrng, 3);
      const AlgebraElement b = random_matrix(hrng, 3);
      const AlgebraElement c = random_matrix(hrng, 3);
      const Derivation lhs =
          derivation_bracket(hamiltonian_derivation(q.gass, a), hamiltonian_derivation(q.gass, b));
      const Derivation rhs = hamiltonian_derivation(q.gass, poisson_bracket(q.gass, a, b));
      REQUIRE(gap(lhs(c), rhs(c)) < 1e-11);
    }
  }
}

TEST_CASE("inner derivations are locally hamiltonian and preserve the form") {
  SplitMix64 rng(55);
  const GASS g = make_gass(standard_ads(3), Complex(0.0, -1.0));
  for (int trial = 0; trial < 5; ++trial) {
    const Derivation x{random_traceless(rng, 3)};
    const Derivation u{random_traceless(rng, 3)};
    const Derivation v{random_traceless(rng, 3)};
    const KForm dix = exterior_derivative(interior_product(x, g.omega));
    REQUIRE(max_abs(dix({u, v})) < 1e-12);
    const KForm lie = lie_derivative(x, g.omega);
    REQUIRE(max_abs(lie({u, v})) < 1e-12);
  }
}

TEST_CASE("canonical transformations") {
  SplitMix64 rng(56);
  const QuantumSymplectic q = quantum_symplectic(standard_ads(3), 1.0);

  SECTION("identity passes") {
    REQUIRE(is_canonical_transformation(q.gass, AdsMorphism::identity(3)));
  }
  SECTION("unitary conjugation passes") {
    const AlgebraElement u = random_unitary(rng, 3);
    REQUIRE(is_canonical_transformation(q.gass, AdsMorphism::conjugation(u)));
  }
  SECTION("one-parameter unitary flows pass") {
    const AlgebraElement h = random_hermitian(rng, 3);
    for (double t : {0.1, 0.7, 2.0}) {
      const AlgebraElement u = (Complex(0, -t) * h).exp();
      REQUIRE(is_canonical_transformation(q.gass, AdsMorphism::conjugation(u)));
    }
  }
  SECTION("antiunitary model fails for imaginary beta") {
    const AlgebraElement u = random_unitary(rng, 3);
    const AlgebraElement ui = u.adjoint();
    const AdsMorphism anti(
        3, [u, ui](const AlgebraElement& a) { return (ui * a * u).conjugate().eval(); },
        [u, ui](const AlgebraElement& a) { return (u * a.conjugate() * ui).eval(); });
    REQUIRE_FALSE(is_canonical_transformation(q.gass, anti));
    // The same map is canonical for a real scale.
    const GASS real_scale = make_gass(standard_ads(3), Complex(2.0, 0.0));
    REQUIRE(is_canonical_transformation(real_scale, anti));
  }
}

TEST_CASE("infinitesimal canonical generators") {
  SplitMix64 rng(57);
  const QuantumSymplectic q = quantum_symplectic(standard_ads(3), 0.9);

  SECTION("identity generator does nothing") {
    const AlgebraElement a = random_matrix(rng, 3);
    REQUIRE(max_abs(infinitesimal_canonical_generator(q, AlgebraElement::Identity(3, 3), a, 0.3)) <
            1e-14);
  }
  SECTION("non-self-adjoint generator is rejected") {
    REQUIRE_THROWS_AS(infinitesimal_canonical_generator(q, random_matrix(rng, 3),
                                                        AlgebraElement::Identity(3, 3), 0.1),
                      InvalidGenerator);
  }
  SECTION("matches conjugation to second order") {
    const AlgebraElement g = random_hermitian(rng, 3);
    const AlgebraElement a = random_matrix(rng, 3);
    auto residual = [&](double eps) {
      const AlgebraElement u = (Complex(0, eps) * g).exp();
      const AlgebraElement moved = u.inverse() * a * u;
      return max_abs(moved - a - infinitesimal_canonical_generator(q, g, a, eps));
    };
    const double r2 = residual(1e-2);
    const double r3 = residual(1e-3);
    // Quadratic remainder: shrinking eps tenfold shrinks the residual ~100x.
    REQUIRE(r2 / r3 > 50.0);
    REQUIRE(r2 / r3 < 200.0);
    const double c = r2 / (1e-2 * 1e-2);
    REQUIRE(r3 <= c * (1e-3 * 1e-3) * 1.5);
  }
  SECTION("momentum generates a translation below the truncation edge") {
    const int n = 8;
    const double hbar = 0.9;
    AlgebraElement x, p;
    oscillator_pair(n, hbar, x, p);
    const QuantumSymplectic qn = quantum_symplectic(standard_ads(n), hbar);
    const double eps = 0.05;
    // T = -hbar G = P, so delta X = eps {P, X} = eps on the interior block.
    const AlgebraElement delta = infinitesimal_canonical_generator(qn, (-p / hbar).eval(), x, eps);
    REQUIRE(gap(delta.topLeftCorner(n - 1, n - 1),
                eps * AlgebraElement::Identity(n - 1, n - 1)) < 1e-12);
  }
}
