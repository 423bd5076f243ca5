#include "cw/sensitivity.hpp"

#include <cmath>
#include <limits>

#include "cw/balance.hpp"
#include "cw/entropy_balance.hpp"
#include "cw/error.hpp"
#include "cw/format.hpp"
#include "cw/logistic.hpp"
#include "cw/parallel.hpp"
#include "cw/rng.hpp"

namespace cw {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

Eigen::VectorXd standardized(const Eigen::VectorXd& v) {
  const double sd = sample_sd(v);
  if (!(sd > 0)) return Eigen::VectorXd::Zero(v.size());
  return (v.array() - v.mean()) / sd;
}

double correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::ArrayXd dx = x.array() - x.mean();
  const Eigen::ArrayXd dy = y.array() - y.mean();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (!(sxx > 0) || !(syy > 0)) return 0.0;
  return (dx * dy).sum() / std::sqrt(sxx * syy);
}

std::string unused_name(const DesignMatrix& dm, std::string name) {
  const auto taken = [&](const std::string& s) {
    for (const auto& c : dm.column_names)
      if (c == s) return true;
    return s == dm.treatment_name || s == dm.outcome_name;
  };
  while (taken(name)) name += "_";
  return name;
}

}  // namespace

SensitivityGridSpec SensitivityGridSpec::defaults() { return linspace(-0.6, 0.6, 13, 0.0, 0.6, 13); }

SensitivityGridSpec SensitivityGridSpec::linspace(double es_min, double es_max, std::size_t es_points, double rho_min,
                                                  double rho_max, std::size_t rho_points) {
  const auto axis = [](double lo, double hi, std::size_t k) {
    std::vector<double> v;
    for (std::size_t i = 0; i < k; ++i)
      v.push_back(k == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1));
    return v;
  };
  return SensitivityGridSpec{axis(es_min, es_max, es_points), axis(rho_min, rho_max, rho_points)};
}

void validate_grid_spec(const SensitivityGridSpec& spec) {
  std::vector<FieldError> errors;
  if (spec.es_axis.empty()) errors.push_back({"es_axis", "needs at least one point"});
  if (spec.rho_axis.empty()) errors.push_back({"rho_axis", "needs at least one point"});
  for (double es : spec.es_axis)
    if (!std::isfinite(es)) errors.push_back({"es_axis", "values must be finite"});
  for (double rho : spec.rho_axis)
    if (!(rho >= 0 && rho < 0.95)) errors.push_back({"rho_axis", "values must lie in [0, 0.95)"});
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

// ---- ConfounderSimulator --------------------------------------------------

ConfounderSimulator::ConfounderSimulator(const DesignMatrix& dm, const WeightSet& ws) : dm_(&dm), w_(ws.w) {
  if (dm.n_treated() == 0 || dm.n_control() == 0) throw Error(ErrorKind::EmptyGroup, "both groups must be non-empty");
  baseline_ = fit_doubly_robust(dm, ws);
  const WlsFit fit = weighted_least_squares(outcome_design(dm), dm.Y, ws.w, outcome_terms(dm));
  residuals_ = fit.residuals;

  t_std_ = standardized(dm.T);
  e_std_ = standardized(residuals_);
  k_ = 1.0 / sample_sd(dm.T);
  r_ = t_std_.dot(e_std_) / static_cast<double>(dm.n() - 1);
  orient_ = dm.flipped ? -1.0 : 1.0;

  Eigen::MatrixXd span(static_cast<Eigen::Index>(dm.n()), 3);
  span.col(0).setOnes();
  span.col(1) = t_std_;
  span.col(2) = e_std_;
  const Eigen::Index cols = e_std_.isZero() ? 2 : 3;
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(span.leftCols(cols));
  basis_ = qr.householderQ() * Eigen::MatrixXd::Identity(span.rows(), cols);
}

double ConfounderSimulator::starting_loading(double es) const {
  const double target = orient_ * es;
  return target / std::sqrt(k_ * k_ + target * target);
}

bool ConfounderSimulator::feasible(double es, double rho) const {
  if (!(std::abs(rho) < 0.95)) return false;
  if (e_std_.isZero() && rho != 0.0) return false;
  const double a = starting_loading(es);
  return 1.0 - a * a * (1.0 - r_ * r_) - rho * rho > 1e-9;
}

double ConfounderSimulator::realized_smd(const Eigen::VectorXd& u) const {
  const auto n = dm_->n();
  return orient_ * signed_weighted_smd(std::span<const double>(u.data(), n), std::span<const double>(dm_->T.data(), n),
                                       std::span<const double>(w_.data(), n), dm_->estimand);
}

double ConfounderSimulator::realized_correlation(const Eigen::VectorXd& u) const { return correlation(u, residuals_); }

Eigen::VectorXd ConfounderSimulator::simulate(double es, double rho, std::uint64_t seed) const {
  if (!feasible(es, rho))
    throw Error(ErrorKind::Infeasible, "confounder with es=" + format_number(es) + " and rho=" + format_number(rho) +
                                           " exceeds the unit variance budget");
  const auto n = static_cast<Eigen::Index>(dm_->n());
  Rng rng(seed);
  Eigen::VectorXd zeta(n);
  for (Eigen::Index i = 0; i < n; ++i) zeta[i] = rng.normal();
  zeta -= basis_ * (basis_.transpose() * zeta);
  zeta = standardized(zeta);

  // With b = rho - a r the correlation with the residuals is exactly rho and
  // the variance is 1 for any admissible a, so only the SMD needs solving.
  const double a_max = std::sqrt((1.0 - rho * rho) / (1.0 - r_ * r_)) * (1.0 - 1e-9);
  const auto build = [&](double a) {
    const double b = rho - a * r_;
    const double c = std::sqrt(std::max(0.0, 1.0 - a * a * (1.0 - r_ * r_) - rho * rho));
    return Eigen::VectorXd(a * t_std_ + b * e_std_ + c * zeta);
  };
  const auto gap = [&](double a) { return realized_smd(build(a)) - es; };

  double a = std::clamp(starting_loading(es), -a_max, a_max);
  double g = gap(a);
  for (int iter = 0; iter < 50 && std::abs(g) > 1e-10; ++iter) {
    const double h = 1e-6;
    const double slope = (gap(std::clamp(a + h, -a_max, a_max)) - gap(std::clamp(a - h, -a_max, a_max))) /
                         (std::clamp(a + h, -a_max, a_max) - std::clamp(a - h, -a_max, a_max));
    if (!(std::abs(slope) > 0) || !std::isfinite(slope)) break;
    double step = -g / slope;
    // Halve until the gap shrinks and the loading stays admissible.
    for (int half = 0; half < 30; ++half) {
      const double trial = std::clamp(a + step, -a_max, a_max);
      const double gt = gap(trial);
      if (std::abs(gt) < std::abs(g)) {
        a = trial;
        g = gt;
        break;
      }
      step *= 0.5;
    }
  }
  if (!(std::abs(g) < 1e-6))
    throw Error(ErrorKind::Infeasible, "could not reach es=" + format_number(es) + " with rho=" + format_number(rho));
  return build(a);
}

Eigen::VectorXd simulate_unobserved_confounder(const DesignMatrix& dm, const WeightSet& ws, double es, double rho,
                                               std::uint64_t seed) {
  return ConfounderSimulator(dm, ws).simulate(es, rho, seed);
}

namespace {

Eigen::VectorXd lr_weights(const DesignMatrix& dm) {
  return ps_to_weights(fit_logistic_ps(dm).ps, dm.T, dm.estimand).w;
}

bool is_eb(Algorithm a) { return a == Algorithm::EB1 || a == Algorithm::EB2 || a == Algorithm::EB3; }

}  // namespace

ConfounderRefitter::ConfounderRefitter(const DesignMatrix& dm, const WeightSet& chosen) : chosen_(chosen) {
  if (!is_eb(chosen.algorithm)) lr_base_ = lr_weights(dm);
}

WeightSet ConfounderRefitter::refit(const DesignMatrix& dm_with_u) const {
  if (is_eb(chosen_.algorithm)) {
    WeightSet ws = fit_entropy_balance(dm_with_u, moment_order(chosen_.algorithm), dm_with_u.estimand);
    ws.algorithm = chosen_.algorithm;
    return ws;
  }
  const PropensityFit fit = fit_logistic_ps(dm_with_u);
  WeightSet ws = ps_to_weights(fit.ps, dm_with_u.T, dm_with_u.estimand);
  ws.w = chosen_.w.cwiseProduct(ws.w).cwiseQuotient(lr_base_);
  ws.algorithm = chosen_.algorithm;
  ws.diagnostics = fit.diagnostics;
  return ws;
}

std::vector<ObservedPoint> observed_confounder_points(const DesignMatrix& dm, const WeightSet& ws) {
  std::vector<ObservedPoint> points;
  const auto n = dm.n();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  const Eigen::MatrixXd A = outcome_design(dm);
  const std::vector<std::string> terms = outcome_terms(dm);
  const double orient = dm.flipped ? -1.0 : 1.0;
  for (std::size_t j = 0; j < dm.p(); ++j) {
    const Eigen::VectorXd x = dm.X.col(static_cast<Eigen::Index>(j));
    ObservedPoint pt;
    pt.name = dm.column_names[j];
    pt.es = orient * signed_weighted_smd(std::span<const double>(x.data(), n), std::span<const double>(dm.T.data(), n),
                                         std::span<const double>(ones.data(), n), dm.estimand);
    if (!std::isfinite(pt.es)) continue;
    // Residuals of the weighted outcome fit that leaves x out; with x in the
    // fit they would be orthogonal to it by construction.
    Eigen::MatrixXd reduced(A.rows(), A.cols() - 1);
    std::vector<std::string> names;
    for (Eigen::Index c = 0, out = 0; c < A.cols(); ++c) {
      if (c == static_cast<Eigen::Index>(j) + 2) continue;
      reduced.col(out++) = A.col(c);
      names.push_back(terms[static_cast<std::size_t>(c)]);
    }
    try {
      const WlsFit fit = weighted_least_squares(reduced, dm.Y, ws.w, names);
      pt.rho = std::abs(correlation(x, fit.residuals));
    } catch (const Error&) {
      continue;
    }
    points.push_back(pt);
  }
  return points;
}

SensitivityGrid sensitivity_grid(const DesignMatrix& dm, const WeightSet& chosen, const SensitivityGridSpec& spec,
                                 std::size_t draws, std::uint64_t seed, const SensitivityControl& control) {
  validate_grid_spec(spec);
  if (draws == 0) throw ValidationError(std::vector<FieldError>{{"draws", "must be at least 1"}});

  const ConfounderSimulator sim(dm, chosen);
  SensitivityGrid grid;
  grid.es_axis = spec.es_axis;
  grid.rho_axis = spec.rho_axis;
  grid.draws_per_cell = draws;
  grid.algorithm = to_string(chosen.algorithm);
  grid.seed = seed;
  grid.baseline_effect = sim.baseline().effect;
  grid.baseline_p = sim.baseline().treatment_row().p;
  grid.observed_points = observed_confounder_points(dm, chosen);

  const std::size_t n_es = spec.es_axis.size();
  const std::size_t cells = n_es * spec.rho_axis.size();
  const std::size_t tasks = cells * draws;
  const std::string u_name = unused_name(dm, "U");
  const ConfounderRefitter refitter(dm, chosen);

  std::vector<double> effect(tasks, kNaN), pvalue(tasks, kNaN);
  std::vector<char> ok(tasks, 0);
  std::vector<std::atomic<std::size_t>> finished_draws(cells);
  std::atomic<std::size_t> finished_cells{0};

  parallel_for(tasks, control.workers, [&](std::size_t t) {
    const std::size_t cell = t / draws;
    const std::size_t draw = t % draws;
    const std::size_t rho_i = cell / n_es;
    const std::size_t es_i = cell % n_es;
    const bool cancelled = control.cancel != nullptr && control.cancel->load();
    if (!cancelled) {
      const double es = spec.es_axis[es_i];
      const double rho = spec.rho_axis[rho_i];
      if (sim.feasible(es, rho)) {
        try {
          const Eigen::VectorXd u = sim.simulate(es, rho, derive_seed({seed, es_i, rho_i, draw}));
          const DesignMatrix dm_u = dm.with_column(u_name, u);
          const WeightSet ws_u = refitter.refit(dm_u);
          const EffectEstimate est = fit_doubly_robust(dm_u, ws_u);
          effect[t] = est.effect;
          pvalue[t] = est.treatment_row().p;
          ok[t] = std::isfinite(est.effect) && std::isfinite(pvalue[t]) ? 1 : 0;
        } catch (const Error&) {
          ok[t] = 0;
        }
      }
    }
    if (finished_draws[cell].fetch_add(1) + 1 == draws) {
      const std::size_t done = finished_cells.fetch_add(1) + 1;
      if (control.progress && !cancelled) control.progress(done, cells);
    }
  });
  if (control.cancel != nullptr && control.cancel->load()) throw Error(ErrorKind::Cancelled, "sensitivity run cancelled");

  grid.effect.assign(cells, kNaN);
  grid.pvalue.assign(cells, kNaN);
  grid.missing.assign(cells, true);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    double se = 0, sp = 0;
    bool all = true;
    for (std::size_t d = 0; d < draws; ++d) {
      const std::size_t t = cell * draws + d;
      if (!ok[t]) {
        all = false;
        break;
      }
      se += effect[t];
      sp += pvalue[t];
    }
    if (!all) continue;
    grid.effect[cell] = se / static_cast<double>(draws);
    grid.pvalue[cell] = sp / static_cast<double>(draws);
    grid.missing[cell] = false;
  }
  return grid;
}

}  // namespace cw
