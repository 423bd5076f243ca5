#pragma once

#include <string>
#include <vector>

#include "cw/design.hpp"
#include "cw/gbm.hpp"
#include "cw/weights.hpp"

namespace cw {

struct EngineOptions {
  std::vector<Algorithm> algorithms{kAllAlgorithms.begin(), kAllAlgorithms.end()};
  GbmParams gbm;
  std::size_t workers = 1;
};

struct EngineFailure {
  Algorithm algorithm = Algorithm::LR;
  std::string kind;
  std::string message;
};

struct EngineRun {
  std::vector<WeightSet> weight_sets;  // successful fits, in request order
  std::vector<EngineFailure> failures;
};

// Weights of a single algorithm for dm.estimand.
WeightSet fit_weights(const DesignMatrix& dm, Algorithm algorithm, const GbmParams& gbm = {});

// Runs the requested algorithms concurrently. GBM_ES and GBM_KS share one
// boosting path. A failing engine is reported instead of aborting the run.
EngineRun run_engines(const DesignMatrix& dm, const EngineOptions& options = {});

}  // namespace cw
