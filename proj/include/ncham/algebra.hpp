#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <complex>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ncham/errors.hpp"
#include "ncham/io.hpp"

namespace ncham {

using Complex = std::complex<double>;

/// Element of the matrix *-algebra M_n(C).
using AlgebraElement = Eigen::MatrixXcd;

using StateVector = Eigen::VectorXcd;

namespace detail {

inline void require_square(const AlgebraElement& a, const char* what) {
  if (a.rows() == 0 || a.rows() != a.cols())
    throw DimensionError(std::string(what) + ": need a nonempty square matrix, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

inline void require_same_dim(const AlgebraElement& a, const AlgebraElement& b, const char* what) {
  require_square(a, what);
  require_square(b, what);
  if (a.rows() != b.rows())
    throw DimensionError(std::string(what) + ": dimensions differ, " + std::to_string(a.rows()) +
                         " vs " + std::to_string(b.rows()));
}

}  // namespace detail

/// The involution of the algebra: conjugate transpose.
inline AlgebraElement adjoint(const AlgebraElement& a) { return a.adjoint(); }

inline AlgebraElement commutator(const AlgebraElement& a, const AlgebraElement& b) {
  detail::require_same_dim(a, b, "commutator");
  return a * b - b * a;
}

/// Inner derivation B -> scale*[generator, B]. The generator is defined only
/// up to a multiple of the identity; nothing here depends on that choice.
struct Derivation {
  AlgebraElement generator;
  Complex scale{1.0, 0.0};

  Derivation() = default;
  explicit Derivation(AlgebraElement g, Complex s = Complex(1.0, 0.0))
      : generator(std::move(g)), scale(s) {
    detail::require_square(generator, "Derivation");
  }

  int dim() const { return static_cast<int>(generator.rows()); }

  AlgebraElement scaled_generator() const { return scale * generator; }

  AlgebraElement operator()(const AlgebraElement& b) const {
    return scale * commutator(generator, b);
  }
};

/// Commutator of derivations as operators; inner derivations are closed under
/// it, with generator the commutator of the scaled generators.
inline Derivation derivation_bracket(const Derivation& x, const Derivation& y) {
  return Derivation(commutator(x.scaled_generator(), y.scaled_generator()));
}

/// True when only scalar multiples of the identity commute with every basis
/// element. Decided by the null-space dimension of the stacked commutation
/// constraints [M, B_k] = 0 in vectorized form, via SVD rank.
inline bool has_trivial_center(const std::vector<AlgebraElement>& basis, double tol = 1e-10) {
  if (basis.empty()) throw InvalidInput("has_trivial_center: empty basis");
  const int n = static_cast<int>(basis[0].rows());
  detail::require_square(basis[0], "has_trivial_center");
  const int n2 = n * n;
  Eigen::MatrixXcd constraints(static_cast<int>(basis.size()) * n2, n2);
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
  for (std::size_t k = 0; k < basis.size(); ++k) {
    detail::require_same_dim(basis[k], basis[0], "has_trivial_center");
    // vec([M, B]) = (B^T (x) I - I (x) B) vec(M), column-major vec.
    constraints.middleRows(static_cast<int>(k) * n2, n2) =
        Eigen::kroneckerProduct(basis[k].transpose(), id).eval() -
        Eigen::kroneckerProduct(id, basis[k]).eval();
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(constraints);
  const auto& sv = svd.singularValues();
  const double cut = tol * std::max(1.0, sv.size() ? sv[0] : 0.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > cut) ++rank;
  return (n2 - rank) == 1;
}

/// Hermitian, unit-trace, positive-semidefinite matrix within the documented
/// tolerances; construction validates and rejects with InvalidInput.
class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-12;
  static constexpr double kTraceTol = 1e-12;
  static constexpr double kEigenvalueFloor = -1e-10;

  explicit DensityMatrix(const AlgebraElement& rho) : rho_(rho) {
    detail::require_square(rho_, "DensityMatrix");
    const double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > kHermitianTol)
      throw InvalidInput("DensityMatrix: not Hermitian, defect " + fmt17(herm));
    const double tr_gap = std::abs(rho_.trace() - Complex(1.0, 0.0));
    if (tr_gap > kTraceTol)
      throw InvalidInput("DensityMatrix: trace differs from 1 by " + fmt17(tr_gap));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (rho_ + rho_.adjoint()),
                                                       Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (lo < kEigenvalueFloor)
      throw InvalidInput("DensityMatrix: negative eigenvalue " + fmt17(lo));
  }

  static DensityMatrix pure(const StateVector& psi) {
    if (psi.size() == 0) throw InvalidInput("DensityMatrix::pure: empty state");
    const double n2 = psi.squaredNorm();
    if (n2 <= 0.0) throw InvalidInput("DensityMatrix::pure: zero state");
    return DensityMatrix((psi * psi.adjoint()) / n2);
  }

  const AlgebraElement& matrix() const { return rho_; }
  int dim() const { return static_cast<int>(rho_.rows()); }

 private:
  AlgebraElement rho_;
};

/// Convex mixture sum_i w_i rho_i. Weights must be nonnegative and sum to 1
/// within 1e-12.
inline DensityMatrix mix(const std::vector<DensityMatrix>& states,
                         const std::vector<double>& weights) {
  if (states.empty() || states.size() != weights.size())
    throw InvalidWeights("mix: need matching, nonempty states and weights");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw InvalidWeights("mix: negative weight " + fmt17(w));
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidWeights("mix: weights sum to " + fmt17(total));
  AlgebraElement acc = AlgebraElement::Zero(states[0].dim(), states[0].dim());
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].dim() != states[0].dim())
      throw DimensionError("mix: state dimensions differ");
    acc += weights[i] * states[i].matrix();
  }
  return DensityMatrix(acc);
}

inline Complex expectation(const DensityMatrix& rho, const AlgebraElement& a) {
  detail::require_same_dim(rho.matrix(), a, "expectation");
  return (rho.matrix() * a).trace();
}

/// Rayleigh quotient; agrees with the trace form on the pure state of psi.
inline Complex expectation(const StateVector& psi, const AlgebraElement& a) {
  detail::require_square(a, "expectation");
  if (psi.size() != a.rows()) throw DimensionError("expectation: state/operator size mismatch");
  const double n2 = psi.squaredNorm();
  if (n2 <= 0.0) throw InvalidInput("expectation: zero state");
  return psi.dot(a * psi) / n2;
}

/// |<psi,phi>|^2 on normalized representatives.
inline double transition_probability(const StateVector& psi, const StateVector& phi) {
  if (psi.size() == 0 || psi.size() != phi.size())
    throw DimensionError("transition_probability: size mismatch");
  const double d2 = psi.squaredNorm() * phi.squaredNorm();
  if (d2 <= 0.0) throw InvalidInput("transition_probability: zero state");
  return std::norm(psi.dot(phi)) / d2;
}

// Text format for matrices: first line the dimension, then dim rows each with
// dim whitespace-separated entries written as re,im. 17 significant digits,
// so save/load round-trips bit-exactly.

inline void save_matrix(std::ostream& out, const AlgebraElement& a) {
  detail::require_square(a, "save_matrix");
  const int n = static_cast<int>(a.rows());
  out << n << '\n';
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j) out << ' ';
      out << fmt17(a(i, j).real()) << ',' << fmt17(a(i, j).imag());
    }
    out << '\n';
  }
}

inline void save_matrix(const std::string& path, const AlgebraElement& a) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("save_matrix: cannot open " + path);
  save_matrix(out, a);
}

inline AlgebraElement load_matrix(std::istream& in) {
  long long n = 0;
  if (!(in >> n) || n <= 0) throw InvalidInput("load_matrix: bad dimension line");
  AlgebraElement a(n, n);
  for (long long i = 0; i < n; ++i) {
    for (long long j = 0; j < n; ++j) {
      std::string tok;
      if (!(in >> tok)) throw InvalidInput("load_matrix: truncated input");
      const auto comma = tok.find(',');
      if (comma == std::string::npos)
        throw InvalidInput("load_matrix: entry lacks re,im form: " + tok);
      char* end = nullptr;
      const std::string re_s = tok.substr(0, comma), im_s = tok.substr(comma + 1);
      const double re = std::strtod(re_s.c_str(), &end);
      if (end == re_s.c_str()) throw InvalidInput("load_matrix: bad real part: " + tok);
      const double im = std::strtod(im_s.c_str(), &end);
      if (end == im_s.c_str()) throw InvalidInput("load_matrix: bad imaginary part: " + tok);
      a(i, j) = Complex(re, im);
    }
  }
  return a;
}

inline AlgebraElement load_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_matrix: cannot open " + path);
  return load_matrix(in);
}

/// Pauli matrices and the 2x2 identity, the workhorse low-dimensional examples.
inline AlgebraElement pauli_x() {
  AlgebraElement m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline AlgebraElement pauli_y() {
  AlgebraElement m(2, 2);
  m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return m;
}
inline AlgebraElement pauli_z() {
  AlgebraElement m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

}  // namespace ncham
