#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace cw {

// Indices of columns of A that are linearly independent of the columns kept
// before them, scanning left to right. A column is dropped when its residual
// after projection onto the kept columns has norm below tol * its own norm.
std::vector<Eigen::Index> independent_columns(const Eigen::MatrixXd& A, double tol = 1e-7);

inline double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

}  // namespace cw
