#pragma once

#include <Eigen/Dense>

#include "cw/design.hpp"
#include "cw/moments.hpp"
#include "cw/weights.hpp"

namespace cw {

// Dual of the entropy-balancing problem for one source group:
//   D(lambda) = log( mean_i exp(-lambda . (z_i - target)) )
// is strictly convex; its gradient is the negated constraint violation
// (target - weighted mean of z) and its minimizer gives w_i ∝ exp(-lambda . z_i).
class EntropyDual {
 public:
  EntropyDual(Eigen::MatrixXd source, Eigen::VectorXd target);

  double value(const Eigen::VectorXd& lambda) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& lambda) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& lambda) const;
  // Normalized to sum to one.
  Eigen::VectorXd weights(const Eigen::VectorXd& lambda) const;

  Eigen::Index dimension() const noexcept { return deviations_.cols(); }

 private:
  Eigen::MatrixXd deviations_;  // rows z_i - target
};

struct EntropyBalanceOptions {
  int max_iterations = 500;
  double tolerance = 1e-8;       // max constraint violation, standardized scale
  double divergence_norm = 1e6;  // ||lambda|| beyond this means infeasible
};

struct DualSolution {
  Eigen::VectorXd lambda;
  Eigen::VectorXd weights;  // sum to one
  int iterations = 0;
  double max_violation = 0.0;
  bool converged = false;
};

// Newton with backtracking line search on the dual. Throws an infeasibility
// error naming `names[worst constraint]` when lambda diverges.
DualSolution solve_entropy_dual(const EntropyDual& dual, const std::vector<std::string>& names,
                                const EntropyBalanceOptions& options = {});

// ATT: control rows are tilted so their weighted moments equal the treated
// sample moments; treated weights stay 1. ATE: each group is tilted to the
// full-sample moments. Weights are normalized to sum to the group size.
WeightSet fit_entropy_balance(const DesignMatrix& dm, int m, Estimand estimand,
                              const EntropyBalanceOptions& options = {});

}  // namespace cw
