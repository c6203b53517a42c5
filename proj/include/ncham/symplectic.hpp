#pragma once

#include <optional>

#include "ncham/calculus.hpp"

namespace ncham {

/// Derivation space with a distinguished closed nondegenerate two-form and the
/// scalar beta relating it to the canonical commutator form.
struct GASS {
  ADS ads;
  KForm omega;
  Complex beta{1.0, 0.0};
};

/// omega_c(X, Y) = commutator of the scaled generators. Well defined only when
/// the algebra has trivial center, otherwise the form is degenerate.
inline KForm canonical_two_form(const ADS& ads) {
  std::vector<AlgebraElement> gens;
  gens.reserve(ads.derivation_basis.size());
  for (const auto& d : ads.derivation_basis) gens.push_back(d.scaled_generator());
  if (!has_trivial_center(gens))
    throw DegenerateStructure("canonical_two_form: algebra center is nontrivial");
  return KForm(2, ads.algebra_dim, [](const std::vector<Derivation>& args) {
    return commutator(args[0].scaled_generator(), args[1].scaled_generator());
  });
}

/// GASS with omega = beta * omega_c.
inline GASS make_gass(const ADS& ads, Complex beta) {
  if (beta == Complex(0.0, 0.0)) throw InvalidInput("make_gass: beta must be nonzero");
  KForm base = canonical_two_form(ads);
  Complex b = beta;
  KForm omega(2, ads.algebra_dim,
              [base, b](const std::vector<Derivation>& args) { return (b * base(args)).eval(); });
  return GASS{ads, std::move(omega), beta};
}

/// The quantum structure: beta = -i*hbar exactly. hbar is the only place the
/// scale of the theory enters.
struct QuantumSymplectic {
  GASS gass;
  double hbar = 1.0;
};

inline QuantumSymplectic quantum_symplectic(const ADS& ads, double hbar = 1.0) {
  if (!(hbar > 0.0)) throw InvalidInput("quantum_symplectic: hbar must be positive");
  return QuantumSymplectic{make_gass(ads, Complex(0.0, -hbar)), hbar};
}

/// Columns are the basis derivations, rows the vectorized values of
/// omega(X_i, X_j) for every probe X_j. Full column rank means no derivation
/// in the basis span annihilates omega.
inline Eigen::MatrixXcd omega_coefficient_tensor(const GASS& s) {
  const int n = s.ads.algebra_dim;
  const int n2 = n * n;
  const int k = static_cast<int>(s.ads.derivation_basis.size());
  Eigen::MatrixXcd tensor(k * n2, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      AlgebraElement v = s.omega({s.ads.derivation_basis[i], s.ads.derivation_basis[j]});
      tensor.block(j * n2, i, n2, 1) = Eigen::Map<const Eigen::VectorXcd>(v.data(), n2);
    }
  }
  return tensor;
}

inline bool is_nondegenerate(const GASS& s, double tol = 1e-10) {
  Eigen::MatrixXcd tensor = omega_coefficient_tensor(s);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(tensor);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return false;
  return sv[sv.size() - 1] > tol * std::max(1.0, sv[0]);
}

/// dOmega evaluated on all basis triples; max residual entry.
inline double closedness_residual(const GASS& s) {
  KForm domega = exterior_derivative(s.omega);
  const auto& basis = s.ads.derivation_basis;
  double worst = 0.0;
  for (std::size_t a = 0; a < basis.size(); ++a)
    for (std::size_t b = a + 1; b < basis.size(); ++b)
      for (std::size_t c = b + 1; c < basis.size(); ++c) {
        const double r = domega({basis[a], basis[b], basis[c]}).cwiseAbs().maxCoeff();
        worst = std::max(worst, r);
      }
  return worst;
}

/// Analytic route: for omega = beta * omega_c the unique solution of
/// i_Y omega = -dA is Y_A = beta^{-1} D_A.
inline Derivation hamiltonian_derivation(const GASS& s, const AlgebraElement& a) {
  if (a.rows() != s.ads.algebra_dim) throw DimensionError("hamiltonian_derivation: dimension");
  return Derivation(a, Complex(1.0, 0.0) / s.beta);
}

/// Independent route: expand Y over the derivation basis and solve the linear
/// system omega(Y, X_j) = -X_j(A) against every basis probe. Rank deficiency
/// or an inconsistent system means the form is degenerate.
inline Derivation hamiltonian_derivation_solve(const GASS& s, const AlgebraElement& a,
                                               double tol = 1e-8) {
  const int n = s.ads.algebra_dim;
  if (a.rows() != n) throw DimensionError("hamiltonian_derivation_solve: dimension");
  const int n2 = n * n;
  const int k = static_cast<int>(s.ads.derivation_basis.size());
  Eigen::MatrixXcd lhs = omega_coefficient_tensor(s);
  Eigen::VectorXcd rhs(k * n2);
  for (int j = 0; j < k; ++j) {
    AlgebraElement v = -s.ads.derivation_basis[j](a);
    rhs.segment(j * n2, n2) = Eigen::Map<const Eigen::VectorXcd>(v.data(), n2);
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(lhs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[sv.size() - 1] <= 1e-10 * std::max(1.0, sv[0]))
    throw DegenerateStructure("hamiltonian_derivation_solve: coefficient tensor is rank deficient");
  Eigen::VectorXcd c = svd.solve(rhs);
  if ((lhs * c - rhs).norm() > tol * (1.0 + rhs.norm()))
    throw DegenerateStructure("hamiltonian_derivation_solve: no consistent solution");
  AlgebraElement gen = AlgebraElement::Zero(n, n);
  for (int i = 0; i < k; ++i) gen += c[i] * s.ads.derivation_basis[i].scaled_generator();
  return Derivation(gen);
}

/// {A, B} = omega(Y_A, Y_B); equals Y_A(B) and beta^{-1}[A, B] for the
/// canonical choice.
inline AlgebraElement poisson_bracket(const GASS& s, const AlgebraElement& a,
                                      const AlgebraElement& b) {
  return s.omega({hamiltonian_derivation(s, a), hamiltonian_derivation(s, b)});
}

/// Phi is canonical when Phi(beta[A,B]) = beta[Phi(A), Phi(B)] across a sweep
/// of algebra basis pairs (matrix units). Unitary conjugations pass for every
/// beta; the antiunitary model fails whenever beta has an imaginary part.
inline bool is_canonical_transformation(const GASS& s, const AdsMorphism& phi,
                                        double tol = 1e-10) {
  const int n = s.ads.algebra_dim;
  if (phi.dim() != n) throw DimensionError("is_canonical_transformation: dimension");
  double scale = 0.0;
  double worst = 0.0;
  for (int a = 0; a < n * n; ++a) {
    AlgebraElement ea = AlgebraElement::Zero(n, n);
    ea(a / n, a % n) = 1.0;
    const AlgebraElement pa = phi.forward(ea);
    for (int b = 0; b < n * n; ++b) {
      AlgebraElement eb = AlgebraElement::Zero(n, n);
      eb(b / n, b % n) = 1.0;
      const AlgebraElement lhs = phi.forward(s.beta * commutator(ea, eb));
      const AlgebraElement rhs = s.beta * commutator(pa, phi.forward(eb));
      worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
      scale = std::max(scale, rhs.cwiseAbs().maxCoeff());
    }
  }
  return worst <= tol * (1.0 + scale);
}

/// First-order change of A under the unitary flow generated by self-adjoint G:
/// delta A = eps {T, A} with T = -hbar G, i.e. -i eps [G, A].
inline AlgebraElement infinitesimal_canonical_generator(const QuantumSymplectic& q,
                                                        const AlgebraElement& g,
                                                        const AlgebraElement& a, double eps) {
  detail::require_same_dim(g, a, "infinitesimal_canonical_generator");
  if (g.rows() != q.gass.ads.algebra_dim)
    throw DimensionError("infinitesimal_canonical_generator: dimension");
  const double herm = (g - g.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-12)
    throw InvalidGenerator("infinitesimal_canonical_generator: generator not self-adjoint, defect " +
                           fmt17(herm));
  const AlgebraElement t = -q.hbar * g;
  return (eps * poisson_bracket(q.gass, t, a)).eval();
}

}  // namespace ncham
