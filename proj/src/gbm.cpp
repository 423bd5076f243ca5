#include "cw/gbm.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "cw/balance.hpp"
#include "cw/error.hpp"
#include "cw/linalg.hpp"

namespace cw {

void validate_gbm_params(const GbmParams& params) {
  if (params.max_trees < 0) throw Error(ErrorKind::Input, "gbm max_trees must be non-negative");
  if (!(params.shrinkage > 0 && params.shrinkage <= 1)) throw Error(ErrorKind::Input, "gbm shrinkage must be in (0, 1]");
  if (params.depth < 1) throw Error(ErrorKind::Input, "gbm depth must be at least 1");
  if (params.eval_stride < 1) throw Error(ErrorKind::Input, "gbm eval_stride must be at least 1");
  if (params.min_leaf < 1) throw Error(ErrorKind::Input, "gbm min_leaf must be at least 1");
}

namespace {

// Regression-tree booster that only tracks the in-sample score F; the fitted
// trees themselves are never needed afterwards.
class TreeBooster {
 public:
  TreeBooster(const Eigen::MatrixXd& X, const GbmParams& params) : X_(X), params_(params) {
    const auto n = static_cast<std::size_t>(X.rows());
    order_.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
      auto& ord = order_[static_cast<std::size_t>(f)];
      ord.resize(n);
      std::iota(ord.begin(), ord.end(), 0);
      std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
    }
    node_of_.resize(n);
  }

  // Fits one tree to gradient r with hessian h and adds shrinkage * leaf
  // values to F.
  void add_tree(const std::vector<double>& r, const std::vector<double>& h, std::vector<double>& F) {
    const auto n = r.size();
    std::fill(node_of_.begin(), node_of_.end(), 0);
    nodes_.assign(1, Node{});
    for (std::size_t i = 0; i < n; ++i) {
      nodes_[0].sum += r[i];
      nodes_[0].count += 1;
    }
    std::size_t level_begin = 0;
    for (int d = 0; d < params_.depth; ++d) {
      const std::size_t level_end = nodes_.size();
      if (!split_level(r, level_begin, level_end)) break;
      level_begin = level_end;
    }
    // Leaf values: one Newton step on the deviance, sum r / sum h.
    std::vector<double> hsum(nodes_.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) hsum[static_cast<std::size_t>(node_of_[i])] += h[i];
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(node_of_[i]);
      const double gamma = nodes_[k].sum / std::max(hsum[k], 1e-12);
      F[i] += params_.shrinkage * gamma;
    }
  }

 private:
  struct Node {
    double sum = 0;
    int count = 0;
  };
  struct Split {
    double gain = 0;
    int feature = -1;
    double left_max = 0;  // rows with value <= left_max go left
  };

  bool split_level(const std::vector<double>& r, std::size_t begin, std::size_t end) {
    const std::size_t width = end - begin;
    std::vector<Split> best(width);
    std::vector<double> left_sum(width);
    std::vector<int> left_count(width);
    std::vector<double> last(width);
    const int min_leaf = params_.min_leaf;

    for (std::size_t f = 0; f < order_.size(); ++f) {
      std::fill(left_sum.begin(), left_sum.end(), 0.0);
      std::fill(left_count.begin(), left_count.end(), 0);
      const auto col = X_.col(static_cast<Eigen::Index>(f));
      for (int i : order_[f]) {
        const auto node = static_cast<std::size_t>(node_of_[static_cast<std::size_t>(i)]);
        if (node < begin || node >= end) continue;
        const std::size_t k = node - begin;
        const Node& parent = nodes_[node];
        const double v = col[i];
        const int nl = left_count[k];
        if (nl >= min_leaf && parent.count - nl >= min_leaf && v != last[k]) {
          const double sl = left_sum[k];
          const double sr = parent.sum - sl;
          const double gain = sl * sl / nl + sr * sr / (parent.count - nl) - parent.sum * parent.sum / parent.count;
          if (gain > best[k].gain) best[k] = Split{gain, static_cast<int>(f), last[k]};
        }
        left_sum[k] += r[static_cast<std::size_t>(i)];
        left_count[k] = nl + 1;
        last[k] = v;
      }
    }

    // Children get fresh node ids; unsplit nodes stay as leaves.
    std::vector<int> left_child(width, -1);
    bool any = false;
    for (std::size_t k = 0; k < width; ++k) {
      if (best[k].feature < 0 || !(best[k].gain > 1e-14)) continue;
      left_child[k] = static_cast<int>(nodes_.size());
      nodes_.push_back(Node{});
      nodes_.push_back(Node{});
      any = true;
    }
    if (!any) return false;
    for (std::size_t i = 0; i < node_of_.size(); ++i) {
      const auto node = static_cast<std::size_t>(node_of_[i]);
      if (node < begin || node >= end) continue;
      const std::size_t k = node - begin;
      if (left_child[k] < 0) continue;
      const bool left = X_(static_cast<Eigen::Index>(i), best[k].feature) <= best[k].left_max;
      const int child = left_child[k] + (left ? 0 : 1);
      node_of_[i] = child;
      nodes_[static_cast<std::size_t>(child)].sum += r[i];
      nodes_[static_cast<std::size_t>(child)].count += 1;
    }
    return true;
  }

  const Eigen::MatrixXd& X_;
  GbmParams params_;
  std::vector<std::vector<int>> order_;
  std::vector<int> node_of_;
  std::vector<Node> nodes_;
};

PropensityVector propensities_from(const std::vector<double>& F, Algorithm source) {
  PropensityVector ps;
  ps.source = source;
  ps.p.resize(static_cast<Eigen::Index>(F.size()));
  for (std::size_t i = 0; i < F.size(); ++i) ps.p[static_cast<Eigen::Index>(i)] = clip_propensity(logistic(F[i]));
  return ps;
}

struct Tracker {
  double best = std::numeric_limits<double>::infinity();
  int best_trees = 0;
  std::vector<double> best_F;
  std::vector<std::pair<int, double>> trace;

  void offer(int trees, double value, const std::vector<double>& F) {
    trace.emplace_back(trees, value);
    if (value < best) {
      best = value;
      best_trees = trees;
      best_F = F;
    }
  }

  PropensityFit finish(Algorithm id, const GbmParams& params, std::size_t n) const {
    PropensityFit fit;
    fit.ps = propensities_from(best_F, id);
    fit.diagnostics.converged = true;
    fit.diagnostics.iterations = params.max_trees;
    fit.diagnostics.objective = best;
    fit.diagnostics.chosen_gbm_trees = best_trees;
    fit.diagnostics.trace = trace;
    if (n < 50) fit.diagnostics.warnings.push_back("fewer than 50 rows; boosting is unreliable at this size");
    if (trace.size() >= 2 && best_trees == trace.back().first && trace.back().second < trace[trace.size() - 2].second)
      fit.diagnostics.warnings.push_back("balance criterion still decreasing at max_trees; increase max_trees");
    return fit;
  }
};

}  // namespace

GbmPairFit fit_gbm_both(const DesignMatrix& dm, Estimand estimand, const GbmParams& params) {
  validate_gbm_params(params);
  if (estimand == Estimand::ATC) throw Error(ErrorKind::Input, "ATC is run as ATT on a flipped design");
  const std::size_t n = dm.n();
  const std::size_t n1 = dm.n_treated();
  if (n1 == 0 || n1 == n) throw Error(ErrorKind::EmptyGroup, "boosting needs both treatment groups");

  const BalanceEvaluator eval(dm.X, dm.T, estimand);
  TreeBooster booster(dm.X, params);
  const double pbar = static_cast<double>(n1) / static_cast<double>(n);
  std::vector<double> F(n, std::log(pbar / (1.0 - pbar)));
  std::vector<double> r(n), h(n);

  Tracker es, ks;
  auto evaluate = [&](int trees) {
    const WeightSet ws = ps_to_weights(propensities_from(F, Algorithm::GBM_ES), dm.T, estimand);
    es.offer(trees, eval.mean_smd(ws.w), F);
    ks.offer(trees, eval.max_ks(ws.w), F);
  };

  evaluate(0);
  for (int t = 1; t <= params.max_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = logistic(F[i]);
      r[i] = dm.T[static_cast<Eigen::Index>(i)] - p;
      h[i] = p * (1.0 - p);
    }
    booster.add_tree(r, h, F);
    if (t % params.eval_stride == 0 || t == params.max_trees) evaluate(t);
  }

  return GbmPairFit{es.finish(Algorithm::GBM_ES, params, n), ks.finish(Algorithm::GBM_KS, params, n)};
}

PropensityFit fit_gbm_ps(const DesignMatrix& dm, StopRule rule, Estimand estimand, const GbmParams& params) {
  auto both = fit_gbm_both(dm, estimand, params);
  return rule == StopRule::ES ? std::move(both.es) : std::move(both.ks);
}

}  // namespace cw
