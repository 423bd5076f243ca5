#include "cw/moments.hpp"

#include <cmath>

#include "cw/error.hpp"
#include "cw/linalg.hpp"

namespace cw {

namespace {

void standardize(Eigen::VectorXd& v) {
  const double mean = v.mean();
  v.array() -= mean;
  const double sd = std::sqrt(v.squaredNorm() / std::max<double>(1.0, static_cast<double>(v.size() - 1)));
  if (sd > 0) v /= sd;
}

}  // namespace

MomentExpansion expand_moments(const DesignMatrix& dm, int m) {
  if (m < 1 || m > 3) throw Error(ErrorKind::Input, "moment order must be 1, 2 or 3");
  const auto n = static_cast<Eigen::Index>(dm.n());

  std::vector<Eigen::VectorXd> cols;
  std::vector<std::string> names;
  std::vector<std::size_t> sources;
  std::vector<int> powers;
  MomentExpansion me;
  me.m = m;
  for (std::size_t j = 0; j < dm.p(); ++j) {
    Eigen::VectorXd base = dm.X.col(static_cast<Eigen::Index>(j));
    const double mean = base.mean();
    const double sd = std::sqrt((base.array() - mean).square().sum() / std::max<double>(1.0, static_cast<double>(n - 1)));
    if (!(sd > 0)) {
      me.dropped.push_back(dm.column_names[j] + " (constant)");
      continue;
    }
    base = (base.array() - mean) / sd;
    const int top = dm.is_dummy[j] ? 1 : m;
    for (int k = 1; k <= top; ++k) {
      Eigen::VectorXd c = base.array().pow(k);
      standardize(c);
      cols.push_back(std::move(c));
      names.push_back(k == 1 ? dm.column_names[j] : dm.column_names[j] + "^" + std::to_string(k));
      sources.push_back(j);
      powers.push_back(k);
    }
  }

  Eigen::MatrixXd A(n, static_cast<Eigen::Index>(cols.size()) + 1);
  A.col(0).setOnes();
  for (std::size_t c = 0; c < cols.size(); ++c) A.col(static_cast<Eigen::Index>(c) + 1) = cols[c];
  const auto kept = independent_columns(A);

  std::vector<bool> keep(cols.size(), false);
  for (auto k : kept)
    if (k > 0) keep[static_cast<std::size_t>(k - 1)] = true;
  me.Z.resize(n, static_cast<Eigen::Index>(kept.size()) - 1);
  Eigen::Index out = 0;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (!keep[c]) {
      me.dropped.push_back(names[c] + " (collinear)");
      continue;
    }
    me.Z.col(out++) = cols[c];
    me.names.push_back(names[c]);
    me.source_column.push_back(sources[c]);
    me.power.push_back(powers[c]);
  }
  return me;
}

Eigen::MatrixXd raw_moment_columns(const DesignMatrix& dm, const MomentExpansion& me) {
  Eigen::MatrixXd R(dm.X.rows(), me.Z.cols());
  for (Eigen::Index c = 0; c < me.Z.cols(); ++c) {
    const auto j = static_cast<Eigen::Index>(me.source_column[static_cast<std::size_t>(c)]);
    R.col(c) = dm.X.col(j).array().pow(me.power[static_cast<std::size_t>(c)]);
  }
  return R;
}

}  // namespace cw
