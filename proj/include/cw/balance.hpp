#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "cw/design.hpp"
#include "cw/weights.hpp"

namespace cw {

// Which unweighted standard deviation standardizes mean differences. Auto
// picks the pooled sd sqrt((s1^2 + s0^2)/2) for ATE and the treated-group sd
// for ATT.
enum class SmdDenominator { Auto, Pooled, Treated };

// (weighted treated mean - weighted control mean) / reference sd. A zero
// reference sd yields 0 for equal means and +/-infinity otherwise.
double signed_weighted_smd(std::span<const double> x, std::span<const double> T, std::span<const double> w,
                           Estimand estimand, SmdDenominator denominator = SmdDenominator::Auto);
double weighted_smd(std::span<const double> x, std::span<const double> T, std::span<const double> w,
                    Estimand estimand, SmdDenominator denominator = SmdDenominator::Auto);

// Largest gap between the two groups' weighted empirical CDFs over all
// observed values (weights normalized within group).
double weighted_ks(std::span<const double> x, std::span<const double> T, std::span<const double> w);

// Kish effective sample size (sum w)^2 / sum w^2.
double ess(std::span<const double> w);

struct EssSummary {
  double total = 0.0;
  double control = 0.0;
  double treated = 0.0;
  std::size_t n = 0;
  // 100 * total / n rounded to an integer.
  long percent() const;
  std::string percent_text() const;  // "94%"
};

EssSummary ess_summary(std::span<const double> T, std::span<const double> w);
std::string ess_percent_text(double ess_total, std::size_t n);

// Precomputes per-column sort orders and reference sds so SMD and KS for many
// weight vectors over the same design are O(n) per column.
class BalanceEvaluator {
 public:
  BalanceEvaluator(const Eigen::MatrixXd& X, const Eigen::VectorXd& T, Estimand estimand,
                   SmdDenominator denominator = SmdDenominator::Auto);

  std::size_t columns() const noexcept { return order_.size(); }
  double signed_smd(std::size_t column, const Eigen::VectorXd& w) const;
  double smd(std::size_t column, const Eigen::VectorXd& w) const { return std::abs(signed_smd(column, w)); }
  double ks(std::size_t column, const Eigen::VectorXd& w) const;
  double mean_smd(const Eigen::VectorXd& w) const;
  double max_ks(const Eigen::VectorXd& w) const;

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd T_;
  std::vector<double> sd_ref_;
  std::vector<std::vector<Eigen::Index>> order_;
};

struct AlgorithmBalance {
  std::string id;  // "Unweighted" or an algorithm id
  std::vector<double> smd;
  std::vector<double> ks;
  double mean_smd = 0, max_smd = 0, mean_ks = 0, max_ks = 0;
  EssSummary ess;
};

struct Recommendation {
  std::string algorithm;
  std::string rationale;
  bool balanced = false;
};

struct BalanceOptions {
  double threshold = 0.1;
  double tie_window = 0.005;
  SmdDenominator denominator = SmdDenominator::Auto;
};

// Among algorithms with max KS and max SMD below the threshold, the smallest
// max KS wins; candidates within tie_window of it are decided by the largest
// ESS. With no balanced algorithm the smallest max KS is returned with a
// warning rationale.
Recommendation recommend(const std::vector<AlgorithmBalance>& algorithms, const BalanceOptions& options = {});

struct BalanceReport {
  std::vector<std::string> confounders;
  std::vector<AlgorithmBalance> columns;  // first column is "Unweighted"
  std::string recommended;
  std::string rationale;
  bool balanced = false;
  std::vector<std::string> warnings;  // e.g. infinite SMD entries

  const AlgorithmBalance& column(std::string_view id) const;
};

BalanceReport build_balance_report(const DesignMatrix& dm, const std::vector<WeightSet>& weight_sets,
                                   const BalanceOptions& options = {}, std::size_t workers = 1);

}  // namespace cw
