#include "cw/engines.hpp"

#include <algorithm>
#include <optional>

#include "cw/cbps.hpp"
#include "cw/entropy_balance.hpp"
#include "cw/error.hpp"
#include "cw/logistic.hpp"
#include "cw/parallel.hpp"

namespace cw {

namespace {

WeightSet from_fit(const PropensityFit& fit, const DesignMatrix& dm) {
  WeightSet ws = ps_to_weights(fit.ps, dm.T, dm.estimand);
  ws.diagnostics = fit.diagnostics;
  return ws;
}

}  // namespace

WeightSet fit_weights(const DesignMatrix& dm, Algorithm algorithm, const GbmParams& gbm) {
  switch (algorithm) {
    case Algorithm::LR: return from_fit(fit_logistic_ps(dm), dm);
    case Algorithm::CBPS1:
    case Algorithm::CBPS2:
    case Algorithm::CBPS3: return from_fit(fit_cbps(dm, moment_order(algorithm), dm.estimand), dm);
    case Algorithm::GBM_ES: return from_fit(fit_gbm_ps(dm, StopRule::ES, dm.estimand, gbm), dm);
    case Algorithm::GBM_KS: return from_fit(fit_gbm_ps(dm, StopRule::KS, dm.estimand, gbm), dm);
    case Algorithm::EB1:
    case Algorithm::EB2:
    case Algorithm::EB3: return fit_entropy_balance(dm, moment_order(algorithm), dm.estimand);
  }
  throw Error(ErrorKind::Input, "unknown algorithm");
}

EngineRun run_engines(const DesignMatrix& dm, const EngineOptions& options) {
  validate_gbm_params(options.gbm);
  const auto& algos = options.algorithms;
  for (std::size_t i = 0; i < algos.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (algos[i] == algos[j]) throw Error(ErrorKind::Input, std::string("algorithm listed twice: ") + to_string(algos[i]));

  const auto has = [&](Algorithm a) { return std::find(algos.begin(), algos.end(), a) != algos.end(); };
  const bool shared_gbm = has(Algorithm::GBM_ES) && has(Algorithm::GBM_KS);

  // One task per algorithm, except a single task for both GBM rules.
  std::vector<std::vector<Algorithm>> tasks;
  for (auto a : algos) {
    if (shared_gbm && a == Algorithm::GBM_KS) continue;
    if (shared_gbm && a == Algorithm::GBM_ES)
      tasks.push_back({Algorithm::GBM_ES, Algorithm::GBM_KS});
    else
      tasks.push_back({a});
  }
  // Boosting is the slowest engine; start it first.
  std::stable_partition(tasks.begin(), tasks.end(), [](const auto& t) {
    return t.front() == Algorithm::GBM_ES || t.front() == Algorithm::GBM_KS;
  });

  std::vector<std::optional<WeightSet>> results(algos.size());
  std::vector<std::optional<EngineFailure>> failed(algos.size());
  const auto slot = [&](Algorithm a) {
    return static_cast<std::size_t>(std::find(algos.begin(), algos.end(), a) - algos.begin());
  };

  parallel_for(tasks.size(), options.workers, [&](std::size_t t) {
    const auto& task = tasks[t];
    try {
      if (task.size() == 2) {
        auto both = fit_gbm_both(dm, dm.estimand, options.gbm);
        results[slot(Algorithm::GBM_ES)] = from_fit(both.es, dm);
        results[slot(Algorithm::GBM_KS)] = from_fit(both.ks, dm);
      } else {
        results[slot(task.front())] = fit_weights(dm, task.front(), options.gbm);
      }
    } catch (const Error& e) {
      for (auto a : task) failed[slot(a)] = EngineFailure{a, to_string(e.kind()), e.what()};
    }
  });

  EngineRun run;
  for (std::size_t i = 0; i < algos.size(); ++i) {
    if (results[i]) run.weight_sets.push_back(std::move(*results[i]));
    if (failed[i]) run.failures.push_back(std::move(*failed[i]));
  }
  return run;
}

}  // namespace cw
