#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cw/design.hpp"
#include "cw/weights.hpp"

namespace cw {

struct LogisticOptions {
  int max_iterations = 100;
  double score_tolerance = 1e-8;
  double deviance_tolerance = 1e-10;  // relative change
};

// Propensity model fit. Coefficients are on the scale of the supplied
// columns with the intercept first; `terms` names them.
struct PropensityFit {
  PropensityVector ps;
  FitDiagnostics diagnostics;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  std::vector<std::string> terms;
};

// Maximum-likelihood logit of T on [1, X] by iteratively reweighted least
// squares. Constant and linearly dependent columns are dropped (first
// occurrence kept) and listed in diagnostics.dropped_columns; their
// coefficients are reported as 0. Quasi-separation stops the iteration at the
// last stable iterate with a warning.
PropensityFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& T,
                           const std::vector<std::string>& names, const LogisticOptions& options = {});

PropensityFit fit_logistic_ps(const DesignMatrix& dm, const LogisticOptions& options = {});

// Bernoulli deviance -2 * loglik of coefficients `beta` (intercept first).
double logistic_deviance(const Eigen::MatrixXd& X, const Eigen::VectorXd& T, const Eigen::VectorXd& beta);

}  // namespace cw
