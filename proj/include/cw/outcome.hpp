#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cw/dataset.hpp"
#include "cw/design.hpp"
#include "cw/weights.hpp"

namespace cw {

struct CoefficientRow {
  std::string term;
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p = 1.0;
};

struct EffectEstimate {
  std::vector<CoefficientRow> rows;  // (Intercept), treatment, design columns
  double effect = 0.0;
  std::string algorithm_used;
  Estimand estimand = Estimand::ATT;  // as requested, ATC included
  std::size_t n_used = 0;

  const CoefficientRow& treatment_row() const { return rows.at(1); }
};

struct WlsFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd residuals;
  std::size_t df = 0;
};

// Weighted least squares of y on the columns of A with HC1 sandwich standard
// errors. A rank-deficient A raises a rank error naming the first column that
// is a combination of earlier ones.
WlsFit weighted_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              const std::vector<std::string>& names);

// Two-sided p-value of t with df degrees of freedom.
double t_pvalue(double t, std::size_t df);

// [1, T, X] and its term names "(Intercept)", treatment, design columns.
Eigen::MatrixXd outcome_design(const DesignMatrix& dm);
std::vector<std::string> outcome_terms(const DesignMatrix& dm);

// Weighted regression of Y on [1, T, X]. When the design was flipped for an
// ATC analysis the treatment row is reported in the original orientation
// (treated minus control).
EffectEstimate fit_doubly_robust(const DesignMatrix& dm, const WeightSet& ws);

// The retained rows of `data` (those in dm.row_ids) with every original column
// and one weight column per weight set, header included.
std::string export_data_and_weights(const Dataset& data, const DesignMatrix& dm,
                                    const std::vector<WeightSet>& weight_sets, Separator separator = Separator::Comma);

}  // namespace cw
