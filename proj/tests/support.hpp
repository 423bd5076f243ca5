#pragma once

// Independent reference implementations and random-instance generators shared
// by the unit tests and the acceptance binary. Nothing here calls the library
// routine it checks.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "cw/design.hpp"
#include "cw/rng.hpp"

namespace cw::test {

// sup_t |F1(t) - F0(t)| by a double loop over every observed threshold.
inline double naive_ks(const std::vector<double>& x, const std::vector<double>& T, const std::vector<double>& w) {
  double tot1 = 0, tot0 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) (T[i] > 0.5 ? tot1 : tot0) += w[i];
  double best = 0;
  for (double t : x) {
    double a1 = 0, a0 = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] <= t) (T[i] > 0.5 ? a1 : a0) += w[i];
    best = std::max(best, std::abs(a1 / tot1 - a0 / tot0));
  }
  return best;
}

// Solves M b = v by Gauss-Jordan elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> M, std::vector<double> v) {
  const std::size_t k = v.size();
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r)
      if (std::abs(M[r][c]) > std::abs(M[piv][c])) piv = r;
    std::swap(M[c], M[piv]);
    std::swap(v[c], v[piv]);
    for (std::size_t r = 0; r < k; ++r) {
      if (r == c) continue;
      const double f = M[r][c] / M[c][c];
      for (std::size_t j = c; j < k; ++j) M[r][j] -= f * M[c][j];
      v[r] -= f * v[c];
    }
  }
  for (std::size_t c = 0; c < k; ++c) v[c] /= M[c][c];
  return v;
}

inline std::vector<std::vector<double>> gauss_inverse(const std::vector<std::vector<double>>& M) {
  const std::size_t k = M.size();
  std::vector<std::vector<double>> inv(k, std::vector<double>(k));
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> e(k, 0.0);
    e[c] = 1.0;
    const auto col = gauss_solve(M, e);
    for (std::size_t r = 0; r < k; ++r) inv[r][c] = col[r];
  }
  return inv;
}

struct DenseWls {
  std::vector<double> beta;
  std::vector<double> se;
};

// Weighted normal equations and the HC1 sandwich written out with loops.
inline DenseWls dense_wls(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  const auto n = static_cast<std::size_t>(A.rows());
  const auto k = static_cast<std::size_t>(A.cols());
  std::vector<std::vector<double>> xtwx(k, std::vector<double>(k, 0.0));
  std::vector<double> xtwy(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < k; ++a) {
      xtwy[a] += w(i) * A(i, a) * y(i);
      for (std::size_t b = 0; b < k; ++b) xtwx[a][b] += w(i) * A(i, a) * A(i, b);
    }
  DenseWls out;
  out.beta = gauss_solve(xtwx, xtwy);
  const auto bread = gauss_inverse(xtwx);
  std::vector<std::vector<double>> meat(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0;
    for (std::size_t a = 0; a < k; ++a) fit += A(i, a) * out.beta[a];
    const double e = y(i) - fit;
    const double s = w(i) * w(i) * e * e;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) meat[a][b] += s * A(i, a) * A(i, b);
  }
  const double scale = static_cast<double>(n) / static_cast<double>(n - k);
  out.se.resize(k);
  for (std::size_t a = 0; a < k; ++a) {
    double v = 0;
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t c = 0; c < k; ++c) v += bread[a][b] * meat[b][c] * bread[c][a];
    out.se[a] = std::sqrt(v * scale);
  }
  return out;
}

// Logistic deviance computed directly from the likelihood.
inline double brute_deviance(const Eigen::MatrixXd& X, const Eigen::VectorXd& T, const std::vector<double>& beta) {
  double dev = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double eta = beta[0];
    for (Eigen::Index j = 0; j < X.cols(); ++j) eta += beta[static_cast<std::size_t>(j) + 1] * X(i, j);
    // log(1 + exp(eta)) - T * eta, evaluated stably
    const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    dev += 2.0 * (softplus - T(i) * eta);
  }
  return dev;
}

// Nelder-Mead with restarts until a full restart no longer improves f.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, double step = 0.5, int max_restarts = 30) {
  const std::size_t d = x0.size();
  double fbest = f(x0);
  for (int restart = 0; restart < max_restarts; ++restart) {
    std::vector<std::vector<double>> s(d + 1, x0);
    for (std::size_t i = 0; i < d; ++i) s[i + 1][i] += step;
    std::vector<double> fs(d + 1);
    for (std::size_t i = 0; i <= d; ++i) fs[i] = f(s[i]);
    for (int it = 0; it < 20000; ++it) {
      std::vector<std::size_t> idx(d + 1);
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
      const std::size_t lo = idx.front(), hi = idx.back(), nh = idx[d - 1];
      if (std::abs(fs[hi] - fs[lo]) <= 1e-15 * (1.0 + std::abs(fs[lo]))) {
        double spread = 0;
        for (std::size_t i = 0; i <= d; ++i)
          for (std::size_t j = 0; j < d; ++j) spread = std::max(spread, std::abs(s[i][j] - s[lo][j]));
        if (spread < 1e-10) break;
      }
      std::vector<double> c(d, 0.0);
      for (std::size_t i = 0; i <= d; ++i)
        if (i != hi)
          for (std::size_t j = 0; j < d; ++j) c[j] += s[i][j] / static_cast<double>(d);
      const auto along = [&](double t) {
        std::vector<double> p(d);
        for (std::size_t j = 0; j < d; ++j) p[j] = c[j] + t * (s[hi][j] - c[j]);
        return p;
      };
      const auto xr = along(-1.0);
      const double fr = f(xr);
      if (fr < fs[lo]) {
        const auto xe = along(-2.0);
        const double fe = f(xe);
        if (fe < fr) {
          s[hi] = xe;
          fs[hi] = fe;
        } else {
          s[hi] = xr;
          fs[hi] = fr;
        }
      } else if (fr < fs[nh]) {
        s[hi] = xr;
        fs[hi] = fr;
      } else {
        const auto xc = fr < fs[hi] ? along(-0.5) : along(0.5);
        const double fc = f(xc);
        if (fc < std::min(fr, fs[hi])) {
          s[hi] = xc;
          fs[hi] = fc;
        } else {
          for (std::size_t i = 0; i <= d; ++i) {
            if (i == lo) continue;
            for (std::size_t j = 0; j < d; ++j) s[i][j] = s[lo][j] + 0.5 * (s[i][j] - s[lo][j]);
            fs[i] = f(s[i]);
          }
        }
      }
    }
    const std::size_t best = static_cast<std::size_t>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    const bool improved = fs[best] < fbest - 1e-13 * (1.0 + std::abs(fbest));
    x0 = s[best];
    fbest = std::min(fbest, fs[best]);
    if (!improved && restart > 0) break;
    step = std::max(step * 0.1, 1e-6);
  }
  return x0;
}

// Random design with numeric columns, treatment drawn from a logit on X and
// outcome linear in (T, X) plus noise.
struct DesignRecipe {
  std::size_t n = 200;
  std::size_t p = 3;
  double logit_scale = 0.5;
  double effect = 2.0;
  double noise = 1.0;
  Estimand estimand = Estimand::ATT;
};

inline DesignMatrix random_design(Rng& rng, const DesignRecipe& r) {
  DesignMatrix dm;
  const auto n = static_cast<Eigen::Index>(r.n);
  const auto p = static_cast<Eigen::Index>(r.p);
  dm.X.resize(n, p);
  dm.T.resize(n);
  dm.Y.resize(n);
  std::vector<double> beta(r.p), gamma(r.p);
  for (auto& b : beta) b = rng.uniform(-r.logit_scale, r.logit_scale);
  for (auto& g : gamma) g = rng.uniform(-2, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = 0, mu = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      dm.X(i, j) = rng.normal();
      eta += beta[static_cast<std::size_t>(j)] * dm.X(i, j);
      mu += gamma[static_cast<std::size_t>(j)] * dm.X(i, j);
    }
    dm.T(i) = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0;
    // both groups need at least two rows
    if (i < 4) dm.T(i) = i < 2 ? 1.0 : 0.0;
    dm.Y(i) = 1.0 + r.effect * dm.T(i) + mu + r.noise * rng.normal();
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    dm.column_names.push_back("x" + std::to_string(j + 1));
    dm.column_sources.push_back(dm.column_names.back());
    dm.is_dummy.push_back(false);
  }
  dm.row_ids.resize(r.n);
  std::iota(dm.row_ids.begin(), dm.row_ids.end(), 0);
  dm.treatment_name = "T";
  dm.outcome_name = "Y";
  dm.requested = r.estimand;
  dm.estimand = r.estimand == Estimand::ATC ? Estimand::ATT : r.estimand;
  return dm;
}

inline double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

inline double sample_sd(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace cw::test
