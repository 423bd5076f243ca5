#include "cw/balance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cw/error.hpp"
#include "cw/format.hpp"
#include "cw/parallel.hpp"

namespace cw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double reference_sd(double var_treated, double var_control, Estimand estimand, SmdDenominator denominator) {
  const bool pooled = denominator == SmdDenominator::Pooled ||
                      (denominator == SmdDenominator::Auto && estimand == Estimand::ATE);
  return pooled ? std::sqrt(0.5 * (var_treated + var_control)) : std::sqrt(var_treated);
}

double standardize_difference(double diff, double sd, double scale) {
  if (sd > 0) return diff / sd;
  if (std::abs(diff) <= 1e-12 * std::max(1.0, scale)) return 0.0;
  return diff > 0 ? kInf : -kInf;
}

// Two-pass unweighted variance, more accurate than the running form.
double group_variance(std::span<const double> x, std::span<const double> T, bool treated) {
  double n = 0, sum = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if ((T[i] > 0.5) == treated) {
      n += 1;
      sum += x[i];
    }
  if (n < 2) return 0.0;
  const double mean = sum / n;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if ((T[i] > 0.5) == treated) ss += (x[i] - mean) * (x[i] - mean);
  return ss / (n - 1);
}

void check_lengths(std::span<const double> x, std::span<const double> T, std::span<const double> w) {
  if (x.size() != T.size() || x.size() != w.size()) throw Error(ErrorKind::Input, "balance inputs differ in length");
}

}  // namespace

double signed_weighted_smd(std::span<const double> x, std::span<const double> T, std::span<const double> w,
                           Estimand estimand, SmdDenominator denominator) {
  check_lengths(x, T, w);
  double w1 = 0, wx1 = 0, w0 = 0, wx0 = 0, scale = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale = std::max(scale, std::abs(x[i]));
    if (T[i] > 0.5) {
      w1 += w[i];
      wx1 += w[i] * x[i];
    } else {
      w0 += w[i];
      wx0 += w[i] * x[i];
    }
  }
  if (!(w1 > 0) || !(w0 > 0)) throw Error(ErrorKind::EmptyGroup, "a group has zero total weight");
  const double sd = reference_sd(group_variance(x, T, true), group_variance(x, T, false), estimand, denominator);
  return standardize_difference(wx1 / w1 - wx0 / w0, sd, scale);
}

double weighted_smd(std::span<const double> x, std::span<const double> T, std::span<const double> w,
                    Estimand estimand, SmdDenominator denominator) {
  return std::abs(signed_weighted_smd(x, T, w, estimand, denominator));
}

namespace {

// Sweeps rows in ascending x; F_g(t) = (weight of group g with x <= t) / total.
template <typename Order>
double ks_sweep(const Order& order, std::span<const double> x, std::span<const double> T, std::span<const double> w) {
  double tot1 = 0, tot0 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) (T[i] > 0.5 ? tot1 : tot0) += w[i];
  if (!(tot1 > 0) || !(tot0 > 0)) throw Error(ErrorKind::EmptyGroup, "a group has zero total weight");
  double c1 = 0, c0 = 0, best = 0;
  const std::size_t n = order.size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(order[k]);
    (T[i] > 0.5 ? c1 : c0) += w[i];
    const bool boundary = k + 1 == n || x[static_cast<std::size_t>(order[k + 1])] != x[i];
    if (boundary) best = std::max(best, std::abs(c1 / tot1 - c0 / tot0));
  }
  return std::min(best, 1.0);
}

}  // namespace

double weighted_ks(std::span<const double> x, std::span<const double> T, std::span<const double> w) {
  check_lengths(x, T, w);
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  return ks_sweep(order, x, T, w);
}

double ess(std::span<const double> w) {
  double s = 0, s2 = 0;
  for (double v : w) {
    s += v;
    s2 += v * v;
  }
  if (!(s > 0)) throw Error(ErrorKind::Input, "ESS needs positive total weight");
  return s * s / s2;
}

long EssSummary::percent() const { return n == 0 ? 0 : std::lround(100.0 * total / static_cast<double>(n)); }

std::string EssSummary::percent_text() const { return std::to_string(percent()) + "%"; }

std::string ess_percent_text(double ess_total, std::size_t n) {
  EssSummary s;
  s.total = ess_total;
  s.n = n;
  return s.percent_text();
}

EssSummary ess_summary(std::span<const double> T, std::span<const double> w) {
  std::vector<double> w1, w0;
  for (std::size_t i = 0; i < T.size(); ++i) (T[i] > 0.5 ? w1 : w0).push_back(w[i]);
  EssSummary s;
  s.n = T.size();
  s.treated = ess(w1);
  s.control = ess(w0);
  s.total = s.treated + s.control;
  return s;
}

// ---- BalanceEvaluator -------------------------------------------------------

BalanceEvaluator::BalanceEvaluator(const Eigen::MatrixXd& X, const Eigen::VectorXd& T, Estimand estimand,
                                   SmdDenominator denominator)
    : X_(X), T_(T) {
  const auto p = static_cast<std::size_t>(X.cols());
  sd_ref_.resize(p);
  order_.resize(p);
  const std::span<const double> t(T_.data(), static_cast<std::size_t>(T_.size()));
  for (std::size_t j = 0; j < p; ++j) {
    const std::span<const double> x(X_.col(static_cast<Eigen::Index>(j)).data(), static_cast<std::size_t>(X_.rows()));
    sd_ref_[j] = reference_sd(group_variance(x, t, true), group_variance(x, t, false), estimand, denominator);
    auto& ord = order_[j];
    ord.resize(x.size());
    std::iota(ord.begin(), ord.end(), Eigen::Index{0});
    std::stable_sort(ord.begin(), ord.end(), [&](Eigen::Index a, Eigen::Index b) {
      return x[static_cast<std::size_t>(a)] < x[static_cast<std::size_t>(b)];
    });
  }
}

double BalanceEvaluator::signed_smd(std::size_t column, const Eigen::VectorXd& w) const {
  const auto x = X_.col(static_cast<Eigen::Index>(column));
  double w1 = 0, wx1 = 0, w0 = 0, wx0 = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (T_[i] > 0.5) {
      w1 += w[i];
      wx1 += w[i] * x[i];
    } else {
      w0 += w[i];
      wx0 += w[i] * x[i];
    }
  }
  if (!(w1 > 0) || !(w0 > 0)) throw Error(ErrorKind::EmptyGroup, "a group has zero total weight");
  return standardize_difference(wx1 / w1 - wx0 / w0, sd_ref_[column], x.cwiseAbs().maxCoeff());
}

double BalanceEvaluator::ks(std::size_t column, const Eigen::VectorXd& w) const {
  const auto n = static_cast<std::size_t>(X_.rows());
  const std::span<const double> x(X_.col(static_cast<Eigen::Index>(column)).data(), n);
  return ks_sweep(order_[column], x, std::span<const double>(T_.data(), n), std::span<const double>(w.data(), n));
}

double BalanceEvaluator::mean_smd(const Eigen::VectorXd& w) const {
  if (columns() == 0) return 0.0;
  double total = 0;
  for (std::size_t j = 0; j < columns(); ++j) total += smd(j, w);
  return total / static_cast<double>(columns());
}

double BalanceEvaluator::max_ks(const Eigen::VectorXd& w) const {
  double best = 0;
  for (std::size_t j = 0; j < columns(); ++j) best = std::max(best, ks(j, w));
  return best;
}

// ---- report ----------------------------------------------------------------

Recommendation recommend(const std::vector<AlgorithmBalance>& algorithms, const BalanceOptions& options) {
  if (algorithms.empty()) throw Error(ErrorKind::Input, "no algorithms to recommend from");
  std::vector<const AlgorithmBalance*> balanced;
  for (const auto& a : algorithms)
    if (a.max_ks < options.threshold && a.max_smd < options.threshold) balanced.push_back(&a);

  Recommendation rec;
  rec.balanced = !balanced.empty();
  std::vector<const AlgorithmBalance*> pool;
  if (rec.balanced) {
    pool = balanced;
  } else {
    for (const auto& a : algorithms) pool.push_back(&a);
  }
  double best_ks = kInf;
  for (const auto* a : pool) best_ks = std::min(best_ks, a->max_ks);
  std::vector<const AlgorithmBalance*> tied;
  for (const auto* a : pool)
    if (a->max_ks <= best_ks + options.tie_window) tied.push_back(a);
  const AlgorithmBalance* chosen = tied.front();
  for (const auto* a : tied)
    if (a->ess.total > chosen->ess.total) chosen = a;
  rec.algorithm = chosen->id;

  std::string names;
  for (const auto* a : tied) names += (names.empty() ? "" : ", ") + a->id;
  const std::string thr = format_fixed(options.threshold, 2);
  if (rec.balanced) {
    rec.rationale = std::to_string(balanced.size()) + " algorithm(s) reach max KS and max SMD below " + thr + ". ";
    if (tied.size() > 1) {
      rec.rationale += names + " achieve the best balance in terms of maximum KS (" + format_fixed(best_ks, 2) +
                       "); of these " + chosen->id + " has the largest ESS (" + format_fixed(chosen->ess.total, 0) +
                       "), so it is recommended.";
    } else {
      rec.rationale += chosen->id + " achieves the best balance in terms of maximum KS (" + format_fixed(best_ks, 2) +
                       ") and is recommended.";
    }
  } else {
    rec.rationale = "Warning: no algorithm achieved balance (max KS and max SMD below " + thr + "). " + chosen->id +
                    " has the smallest maximum KS (" + format_fixed(chosen->max_ks, 2) +
                    ") and is suggested, but results should be interpreted with caution.";
  }
  return rec;
}

const AlgorithmBalance& BalanceReport::column(std::string_view id) const {
  for (const auto& c : columns)
    if (c.id == id) return c;
  throw Error(ErrorKind::Name, "no balance column '" + std::string(id) + "'");
}

BalanceReport build_balance_report(const DesignMatrix& dm, const std::vector<WeightSet>& weight_sets,
                                   const BalanceOptions& options, std::size_t workers) {
  for (const auto& ws : weight_sets)
    if (static_cast<std::size_t>(ws.w.size()) != dm.n())
      throw Error(ErrorKind::Input, std::string("weights of ") + to_string(ws.algorithm) + " do not match the design rows");

  const BalanceEvaluator eval(dm.X, dm.T, dm.estimand, options.denominator);
  BalanceReport report;
  report.confounders = dm.column_names;

  std::vector<std::pair<std::string, Eigen::VectorXd>> inputs;
  inputs.emplace_back("Unweighted", Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dm.n())));
  for (const auto& ws : weight_sets) inputs.emplace_back(to_string(ws.algorithm), ws.w);

  report.columns.resize(inputs.size());
  parallel_for(inputs.size(), workers, [&](std::size_t a) {
    const auto& [id, w] = inputs[a];
    AlgorithmBalance col;
    col.id = id;
    for (std::size_t j = 0; j < dm.p(); ++j) {
      col.smd.push_back(eval.smd(j, w));
      col.ks.push_back(eval.ks(j, w));
    }
    if (!col.smd.empty()) {
      col.mean_smd = std::accumulate(col.smd.begin(), col.smd.end(), 0.0) / static_cast<double>(col.smd.size());
      col.max_smd = *std::max_element(col.smd.begin(), col.smd.end());
      col.mean_ks = std::accumulate(col.ks.begin(), col.ks.end(), 0.0) / static_cast<double>(col.ks.size());
      col.max_ks = *std::max_element(col.ks.begin(), col.ks.end());
    }
    col.ess = ess_summary(std::span<const double>(dm.T.data(), dm.n()), std::span<const double>(w.data(), dm.n()));
    report.columns[a] = std::move(col);
  });

  for (const auto& col : report.columns)
    for (std::size_t j = 0; j < col.smd.size(); ++j)
      if (std::isinf(col.smd[j]))
        report.warnings.push_back("infinite SMD for " + report.confounders[j] + " under " + col.id +
                                  " (zero reference sd with unequal means)");

  if (report.columns.size() > 1) {
    const std::vector<AlgorithmBalance> algos(report.columns.begin() + 1, report.columns.end());
    const auto rec = recommend(algos, options);
    report.recommended = rec.algorithm;
    report.rationale = rec.rationale;
    report.balanced = rec.balanced;
  }
  return report;
}

}  // namespace cw
