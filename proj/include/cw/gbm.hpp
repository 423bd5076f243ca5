#pragma once

#include "cw/logistic.hpp"

namespace cw {

enum class StopRule { ES, KS };

struct GbmParams {
  int max_trees = 5000;
  double shrinkage = 0.01;
  int depth = 3;
  int eval_stride = 25;
  int min_leaf = 10;
};

void validate_gbm_params(const GbmParams& params);

// Gradient boosting of regression trees on the Bernoulli deviance of T given
// the design columns. Every eval_stride trees the current propensities are
// turned into weights and scored by the stopping rule: mean |SMD| (ES) or
// max KS (KS) over the design columns. The returned propensities are those
// at the best-scoring iteration (ties go to fewer trees).
PropensityFit fit_gbm_ps(const DesignMatrix& dm, StopRule rule, Estimand estimand, const GbmParams& params = {});

struct GbmPairFit {
  PropensityFit es;
  PropensityFit ks;
};

// Both stopping rules from a single boosting path (the trees do not depend on
// the rule).
GbmPairFit fit_gbm_both(const DesignMatrix& dm, Estimand estimand, const GbmParams& params = {});

}  // namespace cw
