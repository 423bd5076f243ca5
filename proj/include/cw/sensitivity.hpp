#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cw/design.hpp"
#include "cw/outcome.hpp"
#include "cw/weights.hpp"

namespace cw {

struct SensitivityGridSpec {
  std::vector<double> es_axis;   // signed SMD of U with treatment
  std::vector<double> rho_axis;  // |correlation of U with outcome residuals|

  // 13 x 13 points over es in [-0.6, 0.6] and rho in [0, 0.6].
  static SensitivityGridSpec defaults();
  static SensitivityGridSpec linspace(double es_min, double es_max, std::size_t es_points, double rho_min,
                                      double rho_max, std::size_t rho_points);
};

void validate_grid_spec(const SensitivityGridSpec& spec);

struct ObservedPoint {
  std::string name;
  double es = 0.0;
  double rho = 0.0;
};

struct SensitivityGrid {
  std::vector<double> es_axis;
  std::vector<double> rho_axis;
  // Row-major [rho][es]; NaN where `missing` is set.
  std::vector<double> effect;
  std::vector<double> pvalue;
  std::vector<bool> missing;
  std::vector<ObservedPoint> observed_points;
  double baseline_effect = 0.0;
  double baseline_p = 1.0;
  std::size_t draws_per_cell = 0;
  std::string algorithm;
  std::uint64_t seed = 0;

  std::size_t index(std::size_t rho_i, std::size_t es_i) const { return rho_i * es_axis.size() + es_i; }
  double effect_at(std::size_t rho_i, std::size_t es_i) const { return effect[index(rho_i, es_i)]; }
  double pvalue_at(std::size_t rho_i, std::size_t es_i) const { return pvalue[index(rho_i, es_i)]; }
};

// Builds hypothetical confounders U = a*T~ + b*e~ + c*zeta for one design and
// weight set, where T~ and e~ are the standardized treatment indicator and
// baseline outcome residuals and zeta is noise orthogonal to both.
// b = rho - a*r fixes the residual correlation exactly; a is found by 1-D
// Newton until the realized weighted SMD of U (in the orientation of the
// original treatment labels) is within 1e-6 of its target.
class ConfounderSimulator {
 public:
  ConfounderSimulator(const DesignMatrix& dm, const WeightSet& ws);

  // Whether the pair fits the unit-variance budget: 1 - a0^2 (1 - r^2) - rho^2 > 0
  // with a0 the starting treatment loading. Symmetric in es.
  bool feasible(double es, double rho) const;

  // Throws an infeasibility error when the pair does not fit.
  Eigen::VectorXd simulate(double es, double rho, std::uint64_t seed) const;

  double realized_smd(const Eigen::VectorXd& u) const;
  double realized_correlation(const Eigen::VectorXd& u) const;

  const EffectEstimate& baseline() const noexcept { return baseline_; }
  const Eigen::VectorXd& residuals() const noexcept { return residuals_; }

 private:
  double starting_loading(double es) const;

  const DesignMatrix* dm_;
  Eigen::VectorXd w_;
  EffectEstimate baseline_;
  Eigen::VectorXd residuals_;
  Eigen::VectorXd t_std_;
  Eigen::VectorXd e_std_;
  Eigen::MatrixXd basis_;  // orthonormal basis of span{1, T~, e~}
  double r_ = 0.0;         // cor(T~, e~)
  double k_ = 1.0;         // 1 / sd(T)
  double orient_ = 1.0;    // -1 when the design was flipped
};

Eigen::VectorXd simulate_unobserved_confounder(const DesignMatrix& dm, const WeightSet& ws, double es, double rho,
                                               std::uint64_t seed);

// Re-weights a design with U appended as its last column. EB is refit with
// the same moment order. The propensity-score engines use a logistic model:
// the chosen weights are multiplied by w_LR(X, U) / w_LR(X), so LR itself is
// refit exactly and a U unrelated to treatment leaves CBPS and GBM weights
// where they were.
class ConfounderRefitter {
 public:
  ConfounderRefitter(const DesignMatrix& dm, const WeightSet& chosen);
  WeightSet refit(const DesignMatrix& dm_with_u) const;

 private:
  WeightSet chosen_;
  Eigen::VectorXd lr_base_;  // LR weights without U (PS engines only)
};

// Per-confounder (signed unweighted SMD, |cor(x, residuals of the fit without x)|).
std::vector<ObservedPoint> observed_confounder_points(const DesignMatrix& dm, const WeightSet& ws);

struct SensitivityControl {
  std::size_t workers = 1;
  // Called with (cells finished, total cells) from worker threads.
  std::function<void(std::size_t, std::size_t)> progress;
  const std::atomic<bool>* cancel = nullptr;
};

// Every (cell, draw) pair uses its own seed derived from (seed, es index,
// rho index, draw), so the surfaces do not depend on scheduling.
SensitivityGrid sensitivity_grid(const DesignMatrix& dm, const WeightSet& chosen, const SensitivityGridSpec& spec,
                                 std::size_t draws, std::uint64_t seed, const SensitivityControl& control = {});

}  // namespace cw
