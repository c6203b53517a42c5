#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>

namespace ncham {

/// SplitMix64: 64-bit counter-based generator. The state is a counter advanced
/// by a fixed odd increment; every output is a bijective mix of the counter,
/// so draw k is a pure function of (seed, k). Identical seeds give identical
/// streams on every platform, which is what the experiment runner relies on
/// for bitwise-reproducible outputs.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal() {
    double u = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586477 * v);
  }

  std::complex<double> complex_normal() {
    double re = normal();
    double im = normal();
    return {re, im};
  }

 private:
  std::uint64_t state_;
};

/// Complex Ginibre matrix: independent standard complex normal entries.
inline Eigen::MatrixXcd random_matrix(SplitMix64& rng, int n) {
  Eigen::MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.complex_normal();
  return m;
}

inline Eigen::MatrixXcd random_hermitian(SplitMix64& rng, int n) {
  Eigen::MatrixXcd m = random_matrix(rng, n);
  return 0.5 * (m + m.adjoint()).eval();
}

inline Eigen::MatrixXcd random_traceless(SplitMix64& rng, int n) {
  Eigen::MatrixXcd m = random_matrix(rng, n);
  m -= (m.trace() / static_cast<double>(n)) * Eigen::MatrixXcd::Identity(n, n);
  return m;
}

/// Haar-like unitary from the QR decomposition of a Ginibre matrix.
inline Eigen::MatrixXcd random_unitary(SplitMix64& rng, int n) {
  Eigen::MatrixXcd m = random_matrix(rng, n);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m);
  Eigen::MatrixXcd q = qr.householderQ();
  Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fix the phase ambiguity so the distribution does not depend on QR details.
  for (int j = 0; j < n; ++j) {
    std::complex<double> d = r(j, j);
    q.col(j) *= d / std::abs(d);
  }
  return q;
}

inline Eigen::VectorXcd random_state(SplitMix64& rng, int n) {
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.complex_normal();
  v.normalize();
  return v;
}

}  // namespace ncham
