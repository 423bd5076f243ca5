#include "cw/logistic.hpp"

#include <algorithm>
#include <cmath>

#include "cw/error.hpp"
#include "cw/linalg.hpp"

namespace cw {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double deviance_from_eta(const Eigen::VectorXd& eta, const Eigen::VectorXd& T) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) dev += T[i] > 0.5 ? softplus(-eta[i]) : softplus(eta[i]);
  return 2.0 * dev;
}

// Past this linear predictor the fitted probability is within 1e-13 of 0 or 1.
constexpr double kSeparationEta = 30.0;

}  // namespace

double logistic_deviance(const Eigen::MatrixXd& X, const Eigen::VectorXd& T, const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = (X * beta.tail(X.cols())).array() + beta[0];
  return deviance_from_eta(eta, T);
}

PropensityFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& T, const std::vector<std::string>& names,
                           const LogisticOptions& options) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (T.size() != n) throw Error(ErrorKind::Input, "treatment and design lengths differ");
  const double n_treated = T.sum();
  if (n_treated < 1 || n_treated > static_cast<double>(n) - 1)
    throw Error(ErrorKind::EmptyGroup, "logistic regression needs both treatment groups");

  PropensityFit fit;
  fit.terms.push_back("(Intercept)");
  fit.terms.insert(fit.terms.end(), names.begin(), names.end());

  // Standardize, then drop constant and dependent columns.
  Eigen::VectorXd mean = X.colwise().mean();
  Eigen::VectorXd sd(p);
  Eigen::MatrixXd S(n, p + 1);
  S.col(0).setOnes();
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd c = X.col(j).array() - mean[j];
    sd[j] = std::sqrt(c.squaredNorm() / std::max<double>(1.0, static_cast<double>(n - 1)));
    S.col(j + 1) = sd[j] > 0 ? Eigen::VectorXd(c / sd[j]) : Eigen::VectorXd::Zero(n);
  }
  const auto kept = independent_columns(S);  // column 0 (intercept) is always kept
  for (Eigen::Index j = 1; j <= p; ++j) {
    if (std::find(kept.begin(), kept.end(), j) == kept.end())
      fit.diagnostics.dropped_columns.push_back(names.at(static_cast<std::size_t>(j - 1)));
  }
  const auto k = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd A(n, k);
  for (Eigen::Index c = 0; c < k; ++c) A.col(c) = S.col(kept[static_cast<std::size_t>(c)]);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  const double pbar = n_treated / static_cast<double>(n);
  beta[0] = std::log(pbar / (1.0 - pbar));
  Eigen::VectorXd eta = A * beta;
  double dev = deviance_from_eta(eta, T);
  Eigen::VectorXd prob(n), w(n);
  Eigen::MatrixXd info(k, k);

  auto refresh = [&] {
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = logistic(eta[i]);
      w[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-300);
    }
    info.noalias() = A.transpose() * w.asDiagonal() * A;
  };

  refresh();
  bool separated = false;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Eigen::VectorXd score = A.transpose() * (T - prob);
    if (score.cwiseAbs().maxCoeff() < options.score_tolerance) {
      fit.diagnostics.converged = true;
      break;
    }
    const Eigen::VectorXd step = info.ldlt().solve(score);
    if (!step.allFinite()) break;
    double scale = 1.0;
    Eigen::VectorXd next_beta, next_eta;
    double next_dev = dev;
    for (int halving = 0; halving < 30; ++halving) {
      next_beta = beta + scale * step;
      next_eta = A * next_beta;
      next_dev = deviance_from_eta(next_eta, T);
      if (std::isfinite(next_dev) && next_dev <= dev * (1.0 + 1e-12)) break;
      scale *= 0.5;
    }
    if (next_eta.cwiseAbs().maxCoeff() > kSeparationEta) {
      separated = true;
      break;
    }
    const double change = std::abs(dev - next_dev) / (std::abs(next_dev) + 0.1);
    beta = next_beta;
    eta = next_eta;
    dev = next_dev;
    refresh();
    if (change < options.deviance_tolerance) {
      fit.diagnostics.converged = true;
      ++it;
      break;
    }
  }
  fit.diagnostics.iterations = it;
  fit.diagnostics.objective = dev;
  if (separated) {
    fit.diagnostics.converged = false;
    fit.diagnostics.warnings.push_back(
        "perfect or quasi-perfect separation: coefficients diverge; kept the last stable iterate and clipped "
        "propensities");
  } else if (!fit.diagnostics.converged) {
    fit.diagnostics.warnings.push_back("IRLS did not converge in " + std::to_string(options.max_iterations) +
                                       " iterations");
  }

  // Back to the original column scale.
  Eigen::MatrixXd cov_s = info.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(p + 1, k);
  J(0, 0) = 1.0;
  for (Eigen::Index c = 1; c < k; ++c) {
    const Eigen::Index j = kept[static_cast<std::size_t>(c)] - 1;
    J(j + 1, c) = 1.0 / sd[j];
    J(0, c) = -mean[j] / sd[j];
  }
  fit.coefficients = J * beta;
  fit.standard_errors = (J * cov_s * J.transpose()).diagonal().cwiseMax(0.0).cwiseSqrt();

  fit.ps.source = Algorithm::LR;
  fit.ps.p.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) fit.ps.p[i] = clip_propensity(logistic(eta[i]));
  return fit;
}

PropensityFit fit_logistic_ps(const DesignMatrix& dm, const LogisticOptions& options) {
  return fit_logistic(dm.X, dm.T, dm.column_names, options);
}

}  // namespace cw
