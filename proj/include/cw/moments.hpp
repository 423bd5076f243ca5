#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cw/design.hpp"

namespace cw {

// Confounder powers 1..m used as balance constraints. Numeric columns give
// one column per power, dummies only power 1. Powers are taken of the
// standardized column and every result is re-standardized over the full
// sample; constant and linearly dependent columns are dropped.
struct MomentExpansion {
  int m = 1;
  Eigen::MatrixXd Z;
  std::vector<std::string> names;         // "x", "x^2", ...
  std::vector<std::size_t> source_column; // design column index
  std::vector<int> power;
  std::vector<std::string> dropped;
};

MomentExpansion expand_moments(const DesignMatrix& dm, int m);

// Raw powers x^k for the same (column, power) pairs, unstandardized.
Eigen::MatrixXd raw_moment_columns(const DesignMatrix& dm, const MomentExpansion& me);

}  // namespace cw
