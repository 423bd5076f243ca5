#include "cw/outcome.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "cw/error.hpp"
#include "cw/format.hpp"
#include "cw/linalg.hpp"

namespace cw {

double t_pvalue(double t, std::size_t df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  if (df == 0) return 1.0;
  const boost::math::students_t dist(static_cast<double>(df));
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

WlsFit weighted_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              const std::vector<std::string>& names) {
  const Eigen::Index n = A.rows();
  const Eigen::Index k = A.cols();
  if (y.size() != n || w.size() != n) throw Error(ErrorKind::Input, "regression inputs differ in length");
  if (!y.allFinite()) throw Error(ErrorKind::Input, "outcome contains non-finite values");
  if ((w.array() < 0).any() || !w.allFinite() || !(w.sum() > 0))
    throw Error(ErrorKind::Input, "weights must be finite, non-negative and not all zero");
  if (n <= k) throw Error(ErrorKind::Rank, "not enough rows for the regression (" + std::to_string(n) + " rows, " +
                                              std::to_string(k) + " terms)");

  const Eigen::ArrayXd sw = w.array().sqrt();
  const Eigen::MatrixXd Aw = A.array().colwise() * sw;
  const Eigen::VectorXd yw = (y.array() * sw).matrix();

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Aw);
  if (qr.rank() < k) {
    // Rows with zero weight do not constrain the fit, so test on Aw.
    const auto kept = independent_columns(Aw);
    Eigen::Index bad = k - 1;
    for (Eigen::Index j = 0; j < k; ++j)
      if (static_cast<std::size_t>(j) >= kept.size() || kept[static_cast<std::size_t>(j)] != j) {
        bad = j;
        break;
      }
    throw Error(ErrorKind::Rank, "design is rank deficient: column '" + names.at(static_cast<std::size_t>(bad)) +
                                     "' is collinear with earlier terms");
  }

  WlsFit fit;
  fit.coefficients = qr.solve(yw);
  fit.residuals = y - A * fit.coefficients;
  fit.df = static_cast<std::size_t>(n - k);

  // Bread (A'WA)^-1 from R of the pivoted QR: A'WA = P R'R P'.
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd bread_pivoted = Rinv * Rinv.transpose();
  const auto& P = qr.colsPermutation();
  const Eigen::MatrixXd bread = P * bread_pivoted * P.transpose();

  const Eigen::ArrayXd score_scale = w.array() * fit.residuals.array();
  const Eigen::MatrixXd S = A.array().colwise() * score_scale;
  const Eigen::MatrixXd meat = S.transpose() * S;
  const Eigen::MatrixXd V = bread * meat * bread * (static_cast<double>(n) / static_cast<double>(n - k));
  fit.standard_errors = V.diagonal().array().max(0.0).sqrt();
  return fit;
}

Eigen::MatrixXd outcome_design(const DesignMatrix& dm) {
  const auto n = static_cast<Eigen::Index>(dm.n());
  const Eigen::Index p = dm.X.cols();
  Eigen::MatrixXd A(n, p + 2);
  A.col(0).setOnes();
  A.col(1) = dm.T;
  A.rightCols(p) = dm.X;
  return A;
}

std::vector<std::string> outcome_terms(const DesignMatrix& dm) {
  std::vector<std::string> names{"(Intercept)", dm.treatment_name};
  names.insert(names.end(), dm.column_names.begin(), dm.column_names.end());
  return names;
}

EffectEstimate fit_doubly_robust(const DesignMatrix& dm, const WeightSet& ws) {
  if (static_cast<std::size_t>(ws.w.size()) != dm.n()) throw Error(ErrorKind::Input, "weights do not match the design rows");
  const Eigen::MatrixXd A = outcome_design(dm);
  const std::vector<std::string> names = outcome_terms(dm);

  const WlsFit fit = weighted_least_squares(A, dm.Y, ws.w, names);

  EffectEstimate est;
  est.algorithm_used = to_string(ws.algorithm);
  est.estimand = dm.requested;
  est.n_used = dm.n();
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    CoefficientRow row;
    row.term = names[static_cast<std::size_t>(j)];
    row.estimate = fit.coefficients[j];
    row.se = fit.standard_errors[j];
    if (row.se > 0) {
      row.t = row.estimate / row.se;
    } else if (row.estimate == 0) {
      row.t = 0.0;
    } else {
      row.t = row.estimate > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    }
    row.p = row.se > 0 || row.estimate != 0 ? t_pvalue(row.t, fit.df) : 1.0;
    est.rows.push_back(row);
  }
  if (dm.flipped) {
    est.rows[1].estimate = -est.rows[1].estimate;
    est.rows[1].t = -est.rows[1].t;
  }
  est.effect = est.rows[1].estimate;
  return est;
}

std::string export_data_and_weights(const Dataset& data, const DesignMatrix& dm,
                                    const std::vector<WeightSet>& weight_sets, Separator separator) {
  const char sep = separator_char(separator);
  std::vector<std::string> header;
  for (const auto& c : data.columns()) header.push_back(c.name());
  for (const auto& ws : weight_sets) {
    if (static_cast<std::size_t>(ws.w.size()) != dm.n())
      throw Error(ErrorKind::Input, std::string("weights of ") + to_string(ws.algorithm) + " do not match the design rows");
    std::string name = to_string(ws.algorithm);
    while (data.find(name) != nullptr) name += "_w";
    header.push_back(name);
  }

  std::string out;
  append_csv_record(out, header, sep);
  std::vector<std::string> fields;
  for (std::size_t r = 0; r < dm.n(); ++r) {
    fields.clear();
    const std::size_t row = dm.row_ids[r];
    for (const auto& c : data.columns()) fields.push_back(c.text(row).value_or("NA"));
    for (const auto& ws : weight_sets) fields.push_back(format_number(ws.w[static_cast<Eigen::Index>(r)]));
    append_csv_record(out, fields, sep);
  }
  return out;
}

}  // namespace cw
