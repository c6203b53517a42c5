#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace ncham {
namespace detail {

// Conventions: fwd is the plain DFT sum with e^{-2pi i kn/N} and no scaling,
// inv carries the 1/N. Standard packing: slot k holds frequency k for
// k < N/2 and k-N above. A fresh kissfft plan per call keeps every workspace
// local to the calling thread.

inline Eigen::VectorXcd fft_fwd(const Eigen::VectorXcd& in) {
  Eigen::FFT<double> fft;
  Eigen::VectorXcd out(in.size());
  fft.fwd(out, in);
  return out;
}

inline Eigen::VectorXcd fft_inv(const Eigen::VectorXcd& in) {
  Eigen::FFT<double> fft;
  Eigen::VectorXcd out(in.size());
  fft.inv(out, in);
  return out;
}

/// Band-limited 2x upsampling of periodic samples. The Nyquist coefficient is
/// split evenly between +N/2 and -N/2 so real inputs stay real.
inline Eigen::VectorXcd upsample2x(const Eigen::VectorXcd& f) {
  const int n = static_cast<int>(f.size());
  Eigen::VectorXcd coeff = fft_fwd(f) / static_cast<double>(n);
  Eigen::VectorXcd c2 = Eigen::VectorXcd::Zero(2 * n);
  for (int k = 0; k < n / 2; ++k) c2[k] = coeff[k];
  for (int k = n / 2 + 1; k < n; ++k) c2[n + k] = coeff[k];
  c2[n / 2] = 0.5 * coeff[n / 2];
  c2[2 * n - n / 2] = 0.5 * coeff[n / 2];
  return fft_fwd(c2.conjugate()).conjugate();  // unscaled inverse DFT
}

/// Doubles the number of rows; every column is upsampled independently.
inline Eigen::MatrixXcd upsample2x_rows(const Eigen::MatrixXcd& m) {
  Eigen::MatrixXcd out(2 * m.rows(), m.cols());
  for (int j = 0; j < m.cols(); ++j) out.col(j) = upsample2x(m.col(j));
  return out;
}

/// Doubles the number of columns; every row is upsampled independently.
inline Eigen::MatrixXcd upsample2x_cols(const Eigen::MatrixXcd& m) {
  Eigen::MatrixXcd out(m.rows(), 2 * m.cols());
  for (int i = 0; i < m.rows(); ++i)
    out.row(i) = upsample2x(m.row(i).transpose()).transpose();
  return out;
}

}  // namespace detail
}  // namespace ncham
