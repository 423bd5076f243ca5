#pragma once

#include "cw/logistic.hpp"
#include "cw/moments.hpp"

namespace cw {

struct CbpsOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;  // max |mean moment| for converged
  double polish_tolerance = 1e-12;
};

// Just-identified covariate balancing propensity score.
//
// Finds logit coefficients on [1, Z] (Z = moment expansion of order m) at
// which the inverse-probability-weighted balance conditions hold exactly:
//   ATE: sum_i [T_i/p_i - (1-T_i)/(1-p_i)] z_i = 0
//   ATT: sum_i [T_i - (1-T_i) p_i/(1-p_i)] z_i = 0
// Both systems are the negative gradient of a strictly convex function of the
// coefficients, which is minimized by damped Newton from the logistic fit.
PropensityFit fit_cbps(const DesignMatrix& dm, int m, Estimand estimand, const CbpsOptions& options = {});

// Mean balance moments (one per column of [1, Z]) at the given propensities.
Eigen::VectorXd cbps_moments(const Eigen::MatrixXd& Z, const Eigen::VectorXd& T, const Eigen::VectorXd& p,
                             Estimand estimand);

}  // namespace cw
