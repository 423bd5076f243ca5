#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cw/analysis_spec.hpp"

namespace cw {

enum class Algorithm { LR, CBPS1, CBPS2, CBPS3, GBM_ES, GBM_KS, EB1, EB2, EB3 };

inline constexpr std::array<Algorithm, 9> kAllAlgorithms{
    Algorithm::LR,     Algorithm::GBM_ES, Algorithm::GBM_KS, Algorithm::CBPS1, Algorithm::CBPS2,
    Algorithm::CBPS3,  Algorithm::EB1,    Algorithm::EB2,    Algorithm::EB3};

const char* to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view id);
// Moment order for CBPS/EB variants, 0 otherwise.
int moment_order(Algorithm a);

// Propensities are kept inside [kPropensityFloor, 1 - kPropensityFloor].
inline constexpr double kPropensityFloor = 1e-6;

double clip_propensity(double p);

struct PropensityVector {
  Eigen::VectorXd p;
  Algorithm source = Algorithm::LR;
};

struct FitDiagnostics {
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
  std::optional<int> chosen_gbm_trees;
  std::vector<std::string> warnings;
  std::vector<std::string> dropped_columns;
  // (iteration, criterion) pairs for iterative engines that evaluate one
  std::vector<std::pair<int, double>> trace;
};

struct WeightSet {
  Eigen::VectorXd w;
  Algorithm algorithm = Algorithm::LR;
  Estimand estimand = Estimand::ATT;  // ATE or ATT
  FitDiagnostics diagnostics;
};

// Inverse-probability weights: ATE w = T/p + (1-T)/(1-p); ATT w = T + (1-T) p/(1-p).
WeightSet ps_to_weights(const PropensityVector& ps, const Eigen::VectorXd& T, Estimand estimand);

// Checks the WeightSet invariants (non-negative, both groups positive mass,
// treated weights 1 under ATT); throws on violation.
void check_weights(const WeightSet& ws, const Eigen::VectorXd& T);

}  // namespace cw
