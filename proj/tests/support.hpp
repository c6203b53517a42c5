#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "ncham/algebra.hpp"
#include "ncham/rng.hpp"

namespace test {

inline double max_abs(const Eigen::MatrixXcd& m) {
  return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}

inline double gap(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return max_abs(a - b);
}

}  // namespace test
