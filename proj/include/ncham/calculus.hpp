#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

#include "ncham/algebra.hpp"

namespace ncham {

namespace detail {

inline int permutation_sign(const std::vector<int>& perm) {
  int sign = 1;
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = i + 1; j < perm.size(); ++j)
      if (perm[i] > perm[j]) sign = -sign;
  return sign;
}

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

inline AlgebraElement traceless_part(const AlgebraElement& a) {
  const double n = static_cast<double>(a.rows());
  return a - (a.trace() / n) * AlgebraElement::Identity(a.rows(), a.cols());
}

}  // namespace detail

/// Alternating multilinear map on tuples of derivations with values in the
/// algebra. Degree 0 is a bare algebra element. Forms are stored as evaluation
/// callbacks, not coefficient tensors: the operand count stays tiny and the
/// callbacks compose without committing to a basis.
class KForm {
 public:
  using Eval = std::function<AlgebraElement(const std::vector<Derivation>&)>;

  KForm(int degree, int dim, Eval eval)
      : degree_(degree), dim_(dim), eval_(std::move(eval)) {
    if (degree_ < 0) throw InvalidInput("KForm: negative degree");
    if (dim_ <= 0) throw InvalidInput("KForm: bad algebra dimension");
  }

  /// Degree-0 form holding the element itself.
  static KForm element(const AlgebraElement& a) {
    detail::require_square(a, "KForm::element");
    AlgebraElement copy = a;
    return KForm(0, static_cast<int>(a.rows()),
                 [copy](const std::vector<Derivation>&) { return copy; });
  }

  int degree() const { return degree_; }
  int dim() const { return dim_; }

  AlgebraElement operator()(const std::vector<Derivation>& args) const {
    if (static_cast<int>(args.size()) != degree_)
      throw DimensionError("KForm: expected " + std::to_string(degree_) + " arguments, got " +
                           std::to_string(args.size()));
    for (const auto& x : args)
      if (x.dim() != dim_) throw DimensionError("KForm: argument dimension mismatch");
    return eval_(args);
  }

  AlgebraElement value() const {
    if (degree_ != 0) throw DimensionError("KForm::value: degree is not 0");
    return eval_({});
  }

 private:
  int degree_;
  int dim_;
  Eval eval_;
};

/// i_X: plugs X into the first slot. Degree must be positive.
inline KForm interior_product(const Derivation& x, const KForm& omega) {
  if (omega.degree() == 0)
    throw DimensionError("interior_product: cannot contract a degree-0 form");
  if (x.dim() != omega.dim()) throw DimensionError("interior_product: dimension mismatch");
  Derivation xc = x;
  KForm base = omega;
  return KForm(omega.degree() - 1, omega.dim(),
               [xc, base](const std::vector<Derivation>& rest) {
                 std::vector<Derivation> args;
                 args.reserve(rest.size() + 1);
                 args.push_back(xc);
                 args.insert(args.end(), rest.begin(), rest.end());
                 return base(args);
               });
}

/// Wedge product with the 1/(p!q!) normalization: the full signed sum over
/// permutations of the arguments, the first block fed to a, the second to b.
/// Values multiply in the algebra, so a^b and (-1)^{pq} b^a need not agree;
/// there is a regression test pinning a counterexample on M_2.
inline KForm wedge(const KForm& a, const KForm& b) {
  if (a.dim() != b.dim()) throw DimensionError("wedge: dimension mismatch");
  const int p = a.degree(), q = b.degree();
  KForm ac = a, bc = b;
  return KForm(p + q, a.dim(), [ac, bc, p, q](const std::vector<Derivation>& args) {
    const int n = p + q;
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    AlgebraElement acc = AlgebraElement::Zero(args.empty() ? ac.dim() : args[0].dim(),
                                              args.empty() ? ac.dim() : args[0].dim());
    if (n == 0) return (ac({}) * bc({})).eval();
    do {
      std::vector<Derivation> left, right;
      left.reserve(p);
      right.reserve(q);
      for (int i = 0; i < p; ++i) left.push_back(args[idx[i]]);
      for (int i = p; i < n; ++i) right.push_back(args[idx[i]]);
      const double sign = detail::permutation_sign(idx);
      acc += sign * (ac(left) * bc(right));
    } while (std::next_permutation(idx.begin(), idx.end()));
    return (acc / (detail::factorial(p) * detail::factorial(q))).eval();
  });
}

/// Algebraic exterior derivative. On degree 0, (dA)(X) = X(A); in general the
/// two-block sum over argument deletions and pairwise brackets. d of d is zero
/// because inner derivations satisfy the Jacobi identity.
inline KForm exterior_derivative(const KForm& omega) {
  KForm base = omega;
  const int k = omega.degree();
  return KForm(k + 1, omega.dim(), [base, k](const std::vector<Derivation>& args) {
    AlgebraElement acc = AlgebraElement::Zero(args[0].dim(), args[0].dim());
    for (int i = 0; i <= k; ++i) {
      std::vector<Derivation> rest;
      rest.reserve(k);
      for (int t = 0; t <= k; ++t)
        if (t != i) rest.push_back(args[t]);
      const double sign = (i % 2 == 0) ? 1.0 : -1.0;
      acc += sign * args[i](base(rest));
    }
    for (int i = 0; i <= k; ++i) {
      for (int j = i + 1; j <= k; ++j) {
        std::vector<Derivation> rest;
        rest.reserve(k);
        rest.push_back(derivation_bracket(args[i], args[j]));
        for (int t = 0; t <= k; ++t)
          if (t != i && t != j) rest.push_back(args[t]);
        const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
        acc += sign * base(rest);
      }
    }
    return acc;
  });
}

/// L_Y X = [Y, X].
inline Derivation lie_derivative(const Derivation& y, const Derivation& x) {
  return derivation_bracket(y, x);
}

/// L_Y T = Y(T(...)) minus the sum of T with [Y, X_i] in slot i. On degree 0
/// this is just Y acting on the element.
inline KForm lie_derivative(const Derivation& y, const KForm& omega) {
  if (y.dim() != omega.dim()) throw DimensionError("lie_derivative: dimension mismatch");
  Derivation yc = y;
  KForm base = omega;
  const int k = omega.degree();
  if (k == 0) return KForm::element(yc(omega.value()));
  return KForm(k, omega.dim(), [yc, base, k](const std::vector<Derivation>& args) {
    AlgebraElement acc = yc(base(args));
    for (int i = 0; i < k; ++i) {
      std::vector<Derivation> shifted = args;
      shifted[i] = derivation_bracket(yc, args[i]);
      acc -= base(shifted);
    }
    return acc;
  });
}

/// Invertible map of the algebra together with its inverse. Nothing forces the
/// callables to be linear; the homomorphism checks below are how a candidate
/// earns trust.
class AdsMorphism {
 public:
  using Map = std::function<AlgebraElement(const AlgebraElement&)>;

  AdsMorphism(int dim, Map forward, Map inverse)
      : dim_(dim), fwd_(std::move(forward)), inv_(std::move(inverse)) {
    if (dim_ <= 0) throw InvalidInput("AdsMorphism: bad dimension");
  }

  /// A -> U A U^{-1}. Throws SingularMorphism when U is not invertible.
  static AdsMorphism conjugation(const AlgebraElement& u) {
    detail::require_square(u, "AdsMorphism::conjugation");
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(u);
    if (!lu.isInvertible()) throw SingularMorphism("conjugation: matrix is singular");
    AlgebraElement uc = u, ui = lu.inverse();
    return AdsMorphism(
        static_cast<int>(u.rows()),
        [uc, ui](const AlgebraElement& a) { return (uc * a * ui).eval(); },
        [uc, ui](const AlgebraElement& a) { return (ui * a * uc).eval(); });
  }

  static AdsMorphism identity(int dim) {
    return AdsMorphism(
        dim, [](const AlgebraElement& a) { return a; },
        [](const AlgebraElement& a) { return a; });
  }

  int dim() const { return dim_; }
  AlgebraElement forward(const AlgebraElement& a) const { return fwd_(a); }
  AlgebraElement inverse(const AlgebraElement& a) const { return inv_(a); }

 private:
  int dim_;
  Map fwd_;
  Map inv_;
};

/// Checks Phi(AB) = Phi(A)Phi(B) and Phi(A*) = Phi(A)* on the given samples.
inline bool is_star_homomorphism(const AdsMorphism& phi,
                                 const std::vector<AlgebraElement>& samples,
                                 double tol = 1e-10) {
  for (const auto& a : samples) {
    for (const auto& b : samples) {
      const double gap =
          (phi.forward(a * b) - phi.forward(a) * phi.forward(b)).cwiseAbs().maxCoeff();
      if (gap > tol) return false;
    }
    const double star_gap =
        (phi.forward(a.adjoint()) - phi.forward(a).adjoint()).cwiseAbs().maxCoeff();
    if (star_gap > tol) return false;
  }
  return true;
}

/// (Phi_* X)(B) = Phi(X(Phi^{-1}(B))). The result of pushing an inner
/// derivation through an algebra morphism is inner again; the generator is
/// recovered from the action on matrix units (sum_k Y(E_{k0}) E_{0k} equals
/// the generator up to a multiple of the identity) rather than assumed.
inline Derivation pushforward(const AdsMorphism& phi, const Derivation& x) {
  if (phi.dim() != x.dim()) throw DimensionError("pushforward: dimension mismatch");
  const int n = x.dim();
  AlgebraElement g = AlgebraElement::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    AlgebraElement e_k0 = AlgebraElement::Zero(n, n);
    e_k0(k, 0) = 1.0;
    AlgebraElement e_0k = AlgebraElement::Zero(n, n);
    e_0k(0, k) = 1.0;
    g += phi.forward(x(phi.inverse(e_k0))) * e_0k;
  }
  return Derivation(g);
}

/// (Phi^* T)(X_1,...,X_k) = Phi^{-1}[T(Phi_* X_1, ..., Phi_* X_k)]. Degree 0
/// pulls the element back through the inverse.
inline KForm pullback(const AdsMorphism& phi, const KForm& omega) {
  if (phi.dim() != omega.dim()) throw DimensionError("pullback: dimension mismatch");
  AdsMorphism phic = phi;
  KForm base = omega;
  const int k = omega.degree();
  if (k == 0) return KForm::element(phi.inverse(omega.value()));
  return KForm(k, omega.dim(), [phic, base](const std::vector<Derivation>& args) {
    std::vector<Derivation> pushed;
    pushed.reserve(args.size());
    for (const auto& x : args) pushed.push_back(pushforward(phic, x));
    return phic.inverse(base(pushed));
  });
}

/// Algebra M_n(C) with a chosen basis of inner derivations, closed under the
/// bracket.
struct ADS {
  int algebra_dim = 0;
  std::vector<Derivation> derivation_basis;
};

/// Hermitian traceless generator basis of M_n(C): off-diagonal symmetric and
/// antisymmetric pairs plus the diagonal ladder, n^2 - 1 in total. Their inner
/// derivations span all derivations of M_n(C).
inline ADS standard_ads(int n) {
  if (n < 2) throw InvalidInput("standard_ads: need dimension >= 2");
  ADS ads;
  ads.algebra_dim = n;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      AlgebraElement s = AlgebraElement::Zero(n, n);
      s(i, j) = 1.0;
      s(j, i) = 1.0;
      ads.derivation_basis.emplace_back(s);
      AlgebraElement t = AlgebraElement::Zero(n, n);
      t(i, j) = Complex(0, -1);
      t(j, i) = Complex(0, 1);
      ads.derivation_basis.emplace_back(t);
    }
  }
  for (int d = 1; d < n; ++d) {
    AlgebraElement h = AlgebraElement::Zero(n, n);
    const double norm = std::sqrt(2.0 / (d * (d + 1.0)));
    for (int i = 0; i < d; ++i) h(i, i) = norm;
    h(d, d) = -d * norm;
    ads.derivation_basis.emplace_back(h);
  }
  return ads;
}

/// Every pairwise bracket must expand in the basis: least squares on the
/// vectorized traceless generators, residual below tol.
inline bool bracket_closed(const ADS& ads, double tol = 1e-10) {
  const int n = ads.algebra_dim;
  const int n2 = n * n;
  const int k = static_cast<int>(ads.derivation_basis.size());
  if (k == 0) throw InvalidInput("bracket_closed: empty basis");
  Eigen::MatrixXcd span(n2, k);
  for (int i = 0; i < k; ++i) {
    AlgebraElement gen = detail::traceless_part(ads.derivation_basis[i].scaled_generator());
    span.col(i) = Eigen::Map<const Eigen::VectorXcd>(gen.data(), n2);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(span);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      AlgebraElement br = detail::traceless_part(
          derivation_bracket(ads.derivation_basis[i], ads.derivation_basis[j])
              .scaled_generator());
      Eigen::VectorXcd rhs = Eigen::Map<const Eigen::VectorXcd>(br.data(), n2);
      Eigen::VectorXcd c = qr.solve(rhs);
      const double res = (span * c - rhs).norm();
      if (res > tol * (1.0 + rhs.norm())) return false;
    }
  }
  return true;
}

/// Alternating and multilinear on random argument tuples; the probe scales one
/// slot and adds a second derivation to it.
inline bool is_alternating_multilinear(const KForm& omega, const std::vector<Derivation>& probe,
                                       double tol = 1e-12) {
  const int k = omega.degree();
  if (k < 1 || static_cast<int>(probe.size()) < k + 1) return true;
  std::vector<Derivation> args(probe.begin(), probe.begin() + k);
  const AlgebraElement base = omega(args);
  const double scale = base.cwiseAbs().maxCoeff() + 1.0;
  if (k >= 2) {
    std::vector<Derivation> swapped = args;
    std::swap(swapped[0], swapped[1]);
    if ((omega(swapped) + base).cwiseAbs().maxCoeff() > tol * scale) return false;
    std::vector<Derivation> repeated = args;
    repeated[1] = repeated[0];
    if (omega(repeated).cwiseAbs().maxCoeff() > tol * scale) return false;
  }
  const Complex lambda(0.7, -0.3);
  std::vector<Derivation> scaled = args;
  scaled[0].scale *= lambda;
  if ((omega(scaled) - lambda * base).cwiseAbs().maxCoeff() > tol * scale) return false;
  std::vector<Derivation> shifted = args;
  const Derivation& extra = probe[k];
  shifted[0] = Derivation(args[0].scaled_generator() + extra.scaled_generator());
  std::vector<Derivation> alt = args;
  alt[0] = extra;
  if ((omega(shifted) - base - omega(alt)).cwiseAbs().maxCoeff() > tol * scale * 10.0)
    return false;
  return true;
}

}  // namespace ncham
