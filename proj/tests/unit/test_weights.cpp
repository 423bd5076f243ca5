#include "unit/unit.hpp"

#include <cmath>

#include "cw/cbps.hpp"
#include "cw/engines.hpp"
#include "cw/entropy_balance.hpp"
#include "cw/gbm.hpp"
#include "cw/logistic.hpp"
#include "cw/moments.hpp"
#include "support.hpp"

using namespace cw;
using namespace cw::test;

namespace {

// One numeric column; treated rows first.
DesignMatrix one_column(const std::vector<double>& treated, const std::vector<double>& control) {
  DesignMatrix dm;
  const auto n = static_cast<Eigen::Index>(treated.size() + control.size());
  dm.X.resize(n, 1);
  dm.T.resize(n);
  dm.Y = Eigen::VectorXd::Zero(n);
  Eigen::Index i = 0;
  for (double v : treated) {
    dm.X(i, 0) = v;
    dm.T(i++) = 1;
  }
  for (double v : control) {
    dm.X(i, 0) = v;
    dm.T(i++) = 0;
  }
  dm.column_names = {"x"};
  dm.column_sources = {"x"};
  dm.is_dummy = {false};
  for (Eigen::Index r = 0; r < n; ++r) dm.row_ids.push_back(static_cast<std::size_t>(r));
  return dm;
}

GbmParams quick_gbm() {
  GbmParams g;
  g.max_trees = 300;
  g.shrinkage = 0.05;
  g.eval_stride = 10;
  g.min_leaf = 5;
  return g;
}

}  // namespace

TEST_SUITE("weights") {

TEST_CASE("propensity to weight formulas") {
  PropensityVector ps;
  ps.p = Eigen::Vector2d(0.25, 0.25);
  const Eigen::Vector2d T(1, 0);
  const WeightSet ate = ps_to_weights(ps, T, Estimand::ATE);
  CHECK(ate.w(0) == doctest::Approx(4.0));
  CHECK(ate.w(1) == doctest::Approx(4.0 / 3.0));
  const WeightSet att = ps_to_weights(ps, T, Estimand::ATT);
  CHECK(att.w(0) == 1.0);
  CHECK(att.w(1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("propensities are clipped away from 0 and 1") {
  CHECK(clip_propensity(0.0) == kPropensityFloor);
  CHECK(clip_propensity(1.0) == 1.0 - kPropensityFloor);
  CHECK(clip_propensity(0.3) == 0.3);
}

TEST_CASE("weight invariants are enforced") {
  WeightSet ws;
  ws.estimand = Estimand::ATT;
  const Eigen::Vector3d T(1, 0, 0);
  ws.w = Eigen::Vector3d(1, 0.5, 0.5);
  CHECK_NOTHROW(check_weights(ws, T));
  ws.w = Eigen::Vector3d(2, 0.5, 0.5);
  CHECK_THROWS_AS(check_weights(ws, T), Error);
  ws.w = Eigen::Vector3d(1, -0.5, 0.5);
  CHECK_THROWS_AS(check_weights(ws, T), Error);
  ws.w = Eigen::Vector3d(1, 0, 0);
  CHECK_THROWS_AS(check_weights(ws, T), Error);
}

TEST_CASE("logistic fit on one binary column reproduces cell proportions") {
  // x = 0: 3 treated of 4; x = 1: 1 treated of 5
  const DesignMatrix dm = one_column({0, 0, 0, 1}, {0, 1, 1, 1, 1});
  const PropensityFit f = fit_logistic_ps(dm);
  CHECK(f.diagnostics.converged);
  CHECK(f.ps.p(0) == doctest::Approx(0.75).epsilon(1e-8));
  CHECK(f.ps.p(3) == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(f.coefficients(0) == doctest::Approx(std::log(3.0)).epsilon(1e-7));
  CHECK(f.coefficients(1) == doctest::Approx(std::log(0.25) - std::log(3.0)).epsilon(1e-7));
}

TEST_CASE("logistic fit drops a duplicated column") {
  Rng rng(2);
  DesignMatrix dm = random_design(rng, {});
  dm = dm.with_column("copy", dm.X.col(0));
  const PropensityFit f = fit_logistic_ps(dm);
  CHECK(f.diagnostics.dropped_columns == std::vector<std::string>{"copy"});
  CHECK(f.coefficients(f.coefficients.size() - 1) == 0.0);
}

TEST_CASE("logistic fit is a deviance minimum") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const DesignMatrix dm = random_design(rng, {});
    const PropensityFit f = fit_logistic_ps(dm);
    const double best = logistic_deviance(dm.X, dm.T, f.coefficients);
    std::vector<double> beta(f.coefficients.data(), f.coefficients.data() + f.coefficients.size());
    CHECK(best == doctest::Approx(brute_deviance(dm.X, dm.T, beta)).epsilon(1e-10));
    for (int k = 0; k < 10; ++k) {
      Eigen::VectorXd moved = f.coefficients;
      moved(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(moved.size())))) += rng.uniform(-0.05, 0.05);
      CHECK(logistic_deviance(dm.X, dm.T, moved) >= best - 1e-9);
    }
  }
}

TEST_CASE("CBPS balances its moments exactly") {
  Rng rng(6);
  for (int m = 1; m <= 3; ++m) {
    for (Estimand est : {Estimand::ATT, Estimand::ATE}) {
      DesignRecipe r;
      r.n = 400;
      r.estimand = est;
      const DesignMatrix dm = random_design(rng, r);
      const PropensityFit f = fit_cbps(dm, m, est);
      CHECK(f.diagnostics.converged);
      const MomentExpansion me = expand_moments(dm, m);
      Eigen::MatrixXd Z(dm.X.rows(), me.Z.cols() + 1);
      Z << Eigen::VectorXd::Ones(dm.X.rows()), me.Z;
      CHECK(cbps_moments(Z, dm.T, f.ps.p, est).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("entropy balancing worked examples") {
  // controls {0, 2} already have the treated mean 1: equal weights
  const WeightSet even = fit_entropy_balance(one_column({0.5, 1.5}, {0, 2}), 1, Estimand::ATT);
  CHECK(even.w(2) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(even.w(3) == doctest::Approx(1.0).epsilon(1e-8));
  // controls {0, 3}: w0 * 0 + w1 * 3 = 1 with w0 + w1 = 1, rescaled to the group size
  const WeightSet tilted = fit_entropy_balance(one_column({0.5, 1.5}, {0, 3}), 1, Estimand::ATT);
  CHECK(tilted.w(0) == 1.0);
  CHECK(tilted.w(2) == doctest::Approx(4.0 / 3.0).epsilon(1e-8));
  CHECK(tilted.w(3) == doctest::Approx(2.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("entropy balancing matches treated moments") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    DesignRecipe r;
    r.n = 300;
    const DesignMatrix dm = random_design(rng, r);
    const int m = 1 + trial % 3;
    const WeightSet ws = fit_entropy_balance(dm, m, Estimand::ATT);
    const Eigen::MatrixXd raw = raw_moment_columns(dm, expand_moments(dm, m));
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      double t = 0, c = 0, wc = 0;
      for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        if (dm.T(i) > 0.5) t += raw(i, j);
        else {
          c += ws.w(i) * raw(i, j);
          wc += ws.w(i);
        }
      }
      const double target = t / static_cast<double>(dm.n_treated());
      CHECK(c / wc == doctest::Approx(target).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("entropy balancing reports an unreachable target") {
  const DesignMatrix dm = one_column({5, 6, 7}, {0, 1, 2});
  try {
    fit_entropy_balance(dm, 1, Estimand::ATT);
    FAIL("expected infeasibility");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Infeasible);
    CHECK(std::string(e.what()).find('x') != std::string::npos);
  }
}

TEST_CASE("GBM keeps the best-scoring tree count") {
  Rng rng(12);
  DesignRecipe r;
  r.n = 300;
  r.logit_scale = 1.0;
  const DesignMatrix dm = random_design(rng, r);
  const GbmPairFit both = fit_gbm_both(dm, Estimand::ATT, quick_gbm());
  for (const PropensityFit* f : {&both.es, &both.ks}) {
    const auto& trace = f->diagnostics.trace;
    REQUIRE_FALSE(trace.empty());
    auto best = trace.front();
    for (const auto& step : trace)
      if (step.second < best.second) best = step;
    REQUIRE(f->diagnostics.chosen_gbm_trees.has_value());
    CHECK(*f->diagnostics.chosen_gbm_trees == best.first);
  }
  // the stopping rule does not change the trees, so one path serves both
  const PropensityFit alone = fit_gbm_ps(dm, StopRule::KS, Estimand::ATT, quick_gbm());
  CHECK(alone.ps.p == both.ks.ps.p);
}

TEST_CASE("GBM parameter validation") {
  GbmParams g;
  g.shrinkage = 0.0;
  CHECK_THROWS_AS(validate_gbm_params(g), Error);
  g = GbmParams{};
  g.depth = 0;
  CHECK_THROWS_AS(validate_gbm_params(g), Error);
  CHECK_NOTHROW(validate_gbm_params(GbmParams{}));
}

TEST_CASE("every algorithm leaves treated weights at one under ATT") {
  Rng rng(14);
  DesignRecipe r;
  r.n = 400;
  const DesignMatrix dm = random_design(rng, r);
  EngineOptions o;
  o.gbm = quick_gbm();
  const EngineRun run = run_engines(dm, o);
  CHECK(run.failures.empty());
  CHECK(run.weight_sets.size() == kAllAlgorithms.size());
  for (const WeightSet& ws : run.weight_sets) {
    CAPTURE(to_string(ws.algorithm));
    CHECK_NOTHROW(check_weights(ws, dm.T));
    for (Eigen::Index i = 0; i < dm.T.size(); ++i)
      if (dm.T(i) > 0.5) CHECK(ws.w(i) == 1.0);
  }
}

TEST_CASE("one failing engine does not stop the others") {
  DesignMatrix dm = one_column({5, 6, 7, 8, 9, 5.5, 6.5}, {0, 1, 2, 3, 4, 4.5, 0.5});
  EngineOptions o;
  o.algorithms = {Algorithm::LR, Algorithm::EB1};
  const EngineRun run = run_engines(dm, o);
  REQUIRE(run.failures.size() == 1);
  CHECK(run.failures[0].algorithm == Algorithm::EB1);
  REQUIRE(run.weight_sets.size() == 1);
  CHECK(run.weight_sets[0].algorithm == Algorithm::LR);
}

TEST_CASE("algorithm ids round trip") {
  for (Algorithm a : kAllAlgorithms) CHECK(parse_algorithm(to_string(a)) == a);
  CHECK(moment_order(Algorithm::EB3) == 3);
  CHECK(moment_order(Algorithm::GBM_ES) == 0);
  CHECK_THROWS_AS(parse_algorithm("XYZ"), Error);
}

}
