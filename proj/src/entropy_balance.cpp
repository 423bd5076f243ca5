#include "cw/entropy_balance.hpp"

#include <cmath>

#include "cw/error.hpp"
#include "cw/format.hpp"
#include "cw/linalg.hpp"

namespace cw {

EntropyDual::EntropyDual(Eigen::MatrixXd source, Eigen::VectorXd target) : deviations_(std::move(source)) {
  if (deviations_.cols() != target.size()) throw Error(ErrorKind::Input, "target length differs from moment count");
  if (deviations_.rows() == 0) throw Error(ErrorKind::EmptyGroup, "entropy balancing needs a non-empty source group");
  deviations_.rowwise() -= target.transpose();
}

double EntropyDual::value(const Eigen::VectorXd& lambda) const {
  const Eigen::VectorXd a = -(deviations_ * lambda);
  const double top = a.maxCoeff();
  return top + std::log((a.array() - top).exp().sum()) - std::log(static_cast<double>(a.size()));
}

Eigen::VectorXd EntropyDual::weights(const Eigen::VectorXd& lambda) const {
  const Eigen::VectorXd a = -(deviations_ * lambda);
  Eigen::VectorXd w = (a.array() - a.maxCoeff()).exp();
  return w / w.sum();
}

Eigen::VectorXd EntropyDual::gradient(const Eigen::VectorXd& lambda) const {
  return -(deviations_.transpose() * weights(lambda));
}

Eigen::MatrixXd EntropyDual::hessian(const Eigen::VectorXd& lambda) const {
  const Eigen::VectorXd w = weights(lambda);
  const Eigen::VectorXd mean = deviations_.transpose() * w;
  Eigen::MatrixXd H = deviations_.transpose() * w.asDiagonal() * deviations_;
  H -= mean * mean.transpose();
  return H;
}

namespace {

[[noreturn]] void throw_infeasible(const Eigen::VectorXd& violation, const std::vector<std::string>& names) {
  Eigen::Index worst = 0;
  violation.cwiseAbs().maxCoeff(&worst);
  const std::string name = static_cast<std::size_t>(worst) < names.size() ? names[static_cast<std::size_t>(worst)] : "?";
  throw Error(ErrorKind::Infeasible, "entropy balancing target is infeasible; worst constraint '" + name +
                                         "' (violation " + format_number(violation[worst]) + ")");
}

}  // namespace

DualSolution solve_entropy_dual(const EntropyDual& dual, const std::vector<std::string>& names,
                                const EntropyBalanceOptions& options) {
  const Eigen::Index k = dual.dimension();
  DualSolution sol;
  sol.lambda = Eigen::VectorXd::Zero(k);
  double f = dual.value(sol.lambda);
  Eigen::VectorXd g = dual.gradient(sol.lambda);
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (k == 0 || g.cwiseAbs().maxCoeff() < options.tolerance) break;
    Eigen::MatrixXd H = dual.hessian(sol.lambda);
    H.diagonal().array() += 1e-12 * std::max(H.diagonal().mean(), 1e-300);
    Eigen::VectorXd step = -H.ldlt().solve(g);
    if (!step.allFinite()) step = -g;
    double slope = g.dot(step);
    if (!(slope < 0)) {
      step = -g;
      slope = -g.squaredNorm();
    }
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd trial = sol.lambda + t * step;
      const double trial_f = dual.value(trial);
      if (std::isfinite(trial_f) && trial_f <= f + 1e-4 * t * slope) {
        sol.lambda = trial;
        f = trial_f;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    g = dual.gradient(sol.lambda);
    if (sol.lambda.norm() > options.divergence_norm) throw_infeasible(g, names);
    if (!accepted) break;
  }
  sol.iterations = it;
  sol.weights = dual.weights(sol.lambda);
  sol.max_violation = k == 0 ? 0.0 : g.cwiseAbs().maxCoeff();
  sol.converged = sol.max_violation < options.tolerance;
  if (!sol.converged && sol.max_violation > 1e-6) throw_infeasible(g, names);
  return sol;
}

namespace {

// Tilts `rows` of Z toward `target`; returns weights summing to rows.size().
Eigen::VectorXd tilt_group(const MomentExpansion& me, const std::vector<Eigen::Index>& rows,
                           const Eigen::VectorXd& target, const EntropyBalanceOptions& options,
                           FitDiagnostics& diag) {
  const auto ns = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd source(ns, me.Z.cols());
  for (Eigen::Index r = 0; r < ns; ++r) source.row(r) = me.Z.row(rows[static_cast<std::size_t>(r)]);

  // Constraints that are affine in others within this group are implied by
  // them (or contradict them, caught by the final check).
  Eigen::MatrixXd A(ns, source.cols() + 1);
  A.col(0).setOnes();
  A.rightCols(source.cols()) = source;
  std::vector<Eigen::Index> cols;
  for (auto c : independent_columns(A))
    if (c > 0) cols.push_back(c - 1);

  Eigen::MatrixXd kept(ns, static_cast<Eigen::Index>(cols.size()));
  Eigen::VectorXd kept_target(static_cast<Eigen::Index>(cols.size()));
  std::vector<std::string> kept_names;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    kept.col(static_cast<Eigen::Index>(c)) = source.col(cols[c]);
    kept_target[static_cast<Eigen::Index>(c)] = target[cols[c]];
    kept_names.push_back(me.names[static_cast<std::size_t>(cols[c])]);
  }

  const EntropyDual dual(kept, kept_target);
  const DualSolution sol = solve_entropy_dual(dual, kept_names, options);
  diag.iterations += sol.iterations;
  diag.objective = std::max(diag.objective, sol.max_violation);
  diag.converged = diag.converged && sol.converged;

  const Eigen::VectorXd violation = source.transpose() * sol.weights - target;
  if (violation.size() > 0 && violation.cwiseAbs().maxCoeff() > 1e-6) throw_infeasible(violation, me.names);
  return sol.weights * static_cast<double>(ns);
}

}  // namespace

WeightSet fit_entropy_balance(const DesignMatrix& dm, int m, Estimand estimand, const EntropyBalanceOptions& options) {
  if (estimand == Estimand::ATC) throw Error(ErrorKind::Input, "ATC is run as ATT on a flipped design");
  const MomentExpansion me = expand_moments(dm, m);
  std::vector<Eigen::Index> treated, control;
  for (Eigen::Index i = 0; i < dm.T.size(); ++i) (dm.T[i] > 0.5 ? treated : control).push_back(i);
  if (treated.empty() || control.empty()) throw Error(ErrorKind::EmptyGroup, "entropy balancing needs both groups");

  auto group_mean = [&](const std::vector<Eigen::Index>& rows) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(me.Z.cols());
    for (auto r : rows) mean += me.Z.row(r).transpose();
    return Eigen::VectorXd(mean / static_cast<double>(rows.size()));
  };

  const Algorithm ids[] = {Algorithm::EB1, Algorithm::EB2, Algorithm::EB3};
  WeightSet ws;
  ws.algorithm = ids[m - 1];
  ws.estimand = estimand;
  ws.w = Eigen::VectorXd::Ones(dm.T.size());
  ws.diagnostics.converged = true;
  ws.diagnostics.dropped_columns = me.dropped;

  if (estimand == Estimand::ATT) {
    const Eigen::VectorXd w = tilt_group(me, control, group_mean(treated), options, ws.diagnostics);
    for (std::size_t k = 0; k < control.size(); ++k) ws.w[control[k]] = w[static_cast<Eigen::Index>(k)];
  } else {
    const Eigen::VectorXd target = me.Z.colwise().mean().transpose();
    for (const auto* rows : {&control, &treated}) {
      const Eigen::VectorXd w = tilt_group(me, *rows, target, options, ws.diagnostics);
      for (std::size_t k = 0; k < rows->size(); ++k) ws.w[(*rows)[k]] = w[static_cast<Eigen::Index>(k)];
    }
  }
  return ws;
}

}  // namespace cw
