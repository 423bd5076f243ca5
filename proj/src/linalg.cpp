#include "cw/linalg.hpp"

namespace cw {

std::vector<Eigen::Index> independent_columns(const Eigen::MatrixXd& A, double tol) {
  std::vector<Eigen::Index> kept;
  std::vector<Eigen::VectorXd> basis;
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    Eigen::VectorXd v = A.col(j);
    const double norm = v.norm();
    if (norm == 0.0) continue;
    // two passes of modified Gram-Schmidt
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) v -= q.dot(v) * q;
    const double rest = v.norm();
    if (rest <= tol * norm) continue;
    basis.push_back(v / rest);
    kept.push_back(j);
  }
  return kept;
}

}  // namespace cw
