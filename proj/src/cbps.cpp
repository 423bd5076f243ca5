#include "cw/cbps.hpp"

#include <cmath>

#include "cw/error.hpp"
#include "cw/linalg.hpp"

namespace cw {

namespace {

struct ConvexCbps {
  const Eigen::MatrixXd& A;  // [1, Z]
  const Eigen::VectorXd& T;
  Estimand estimand;

  // Objective, and per-row curvature d2F/deta2.
  double value(const Eigen::VectorXd& eta) const {
    double f = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const bool t = T[i] > 0.5;
      if (estimand == Estimand::ATE)
        f += t ? std::exp(-eta[i]) - eta[i] : std::exp(eta[i]) + eta[i];
      else
        f += t ? -eta[i] : std::exp(eta[i]);
    }
    return f;
  }

  // Negative gradient = balance moments (sums, not means).
  Eigen::VectorXd moments(const Eigen::VectorXd& eta) const {
    // ATE rows: T/p - (1-T)/(1-p) = 1 + e^-eta for treated, -(1 + e^eta) for controls
    Eigen::VectorXd r(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const bool t = T[i] > 0.5;
      if (estimand == Estimand::ATE)
        r[i] = t ? 1.0 + std::exp(-eta[i]) : -(1.0 + std::exp(eta[i]));
      else
        r[i] = t ? 1.0 : -std::exp(eta[i]);
    }
    return A.transpose() * r;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& eta) const {
    Eigen::VectorXd c(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const bool t = T[i] > 0.5;
      if (estimand == Estimand::ATE)
        c[i] = t ? std::exp(-eta[i]) : std::exp(eta[i]);
      else
        c[i] = t ? 0.0 : std::exp(eta[i]);
    }
    return A.transpose() * c.asDiagonal() * A;
  }
};

}  // namespace

Eigen::VectorXd cbps_moments(const Eigen::MatrixXd& Z, const Eigen::VectorXd& T, const Eigen::VectorXd& p,
                             Estimand estimand) {
  const Eigen::Index n = Z.rows();
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool t = T[i] > 0.5;
    if (estimand == Estimand::ATE)
      r[i] = t ? 1.0 / p[i] : -1.0 / (1.0 - p[i]);
    else
      r[i] = t ? 1.0 : -p[i] / (1.0 - p[i]);
  }
  Eigen::VectorXd out(Z.cols() + 1);
  out[0] = r.sum();
  out.tail(Z.cols()) = Z.transpose() * r;
  return out / static_cast<double>(n);
}

PropensityFit fit_cbps(const DesignMatrix& dm, int m, Estimand estimand, const CbpsOptions& options) {
  if (estimand == Estimand::ATC) throw Error(ErrorKind::Input, "ATC is run as ATT on a flipped design");
  const MomentExpansion me = expand_moments(dm, m);
  const Eigen::Index n = me.Z.rows();
  const Eigen::Index k = me.Z.cols() + 1;
  Eigen::MatrixXd A(n, k);
  A.col(0).setOnes();
  A.rightCols(me.Z.cols()) = me.Z;

  PropensityFit fit = fit_logistic(me.Z, dm.T, me.names);
  Eigen::VectorXd beta = fit.coefficients;
  fit.diagnostics = FitDiagnostics{};
  fit.diagnostics.dropped_columns = me.dropped;

  const ConvexCbps problem{A, dm.T, estimand};
  Eigen::VectorXd eta = A * beta;
  double f = problem.value(eta);
  const double scale = 1.0 / static_cast<double>(n);
  auto worst = [&](const Eigen::VectorXd& g) { return g.cwiseAbs().maxCoeff() * scale; };

  Eigen::VectorXd g = problem.moments(eta);
  Eigen::VectorXd best_beta = beta;
  double best_violation = worst(g);
  int it = 0;
  for (; it < options.max_iterations && best_violation > options.polish_tolerance; ++it) {
    Eigen::MatrixXd H = problem.hessian(eta);
    H.diagonal().array() += 1e-12 * H.diagonal().mean();
    const Eigen::VectorXd step = H.ldlt().solve(g);
    if (!step.allFinite()) break;
    const double slope = -g.dot(step);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd trial_beta = beta + t * step;
      const Eigen::VectorXd trial_eta = A * trial_beta;
      const double trial_f = problem.value(trial_eta);
      if (std::isfinite(trial_f) && trial_f <= f + 1e-4 * t * slope) {
        beta = trial_beta;
        eta = trial_eta;
        f = trial_f;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    g = problem.moments(eta);
    const double v = worst(g);
    if (v < best_violation) {
      best_violation = v;
      best_beta = beta;
    }
  }
  beta = best_beta;
  eta = A * beta;

  fit.coefficients = beta;
  fit.standard_errors = Eigen::VectorXd::Constant(k, std::nan(""));
  fit.diagnostics.iterations = it;
  fit.diagnostics.objective = best_violation;
  fit.diagnostics.converged = best_violation < options.tolerance;
  if (!fit.diagnostics.converged)
    fit.diagnostics.warnings.push_back("CBPS Newton stagnated; returning best iterate (max |moment| = " +
                                       std::to_string(best_violation) + ")");

  const Algorithm ids[] = {Algorithm::CBPS1, Algorithm::CBPS2, Algorithm::CBPS3};
  fit.ps.source = ids[m - 1];
  fit.ps.p.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) fit.ps.p[i] = clip_propensity(logistic(eta[i]));
  return fit;
}

}  // namespace cw
