#include "unit/unit.hpp"

#include <cmath>

#include "cw/dataset.hpp"
#include "cw/design.hpp"
#include "cw/engines.hpp"
#include "cw/outcome.hpp"
#include "support.hpp"

using namespace cw;
using namespace cw::test;

namespace {

WeightSet unit_weights(const DesignMatrix& dm) {
  WeightSet ws;
  ws.w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dm.n()));
  ws.estimand = dm.estimand;
  return ws;
}

const char* kSmall =
    "t,y,x,g\n"
    "a,1.5,0.2,u\n"
    "b,2.5,1.1,v\n"
    "a,0.7,-0.4,v\n"
    "b,3.1,0.9,u\n"
    "a,1.1,0.3,u\n"
    "b,2.0,0.0,v\n"
    "a,NA,0.5,u\n"
    "b,2.2,0.6,u\n";

AnalysisSpec small_spec() {
  AnalysisSpec s;
  s.treatment_var = "t";
  s.control_label = "a";
  s.treatment_label = "b";
  s.outcome_var = "y";
  s.numeric_confounders = {"x"};
  s.categorical_confounders = {{"g", "u"}};
  return s;
}

}  // namespace

TEST_SUITE("outcome") {

TEST_CASE("noise-free outcome recovers the effect exactly") {
  Rng rng(41);
  DesignRecipe r;
  r.noise = 0.0;
  r.effect = 2.0;
  const DesignMatrix dm = random_design(rng, r);
  const EffectEstimate e = fit_doubly_robust(dm, unit_weights(dm));
  CHECK(e.effect == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(e.rows[0].term == "(Intercept)");
  CHECK(e.treatment_row().term == "T");
  CHECK(e.rows.size() == dm.p() + 2);
  CHECK(e.n_used == dm.n());
}

TEST_CASE("coefficients and HC1 errors match the dense oracle") {
  Rng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    DesignRecipe r;
    r.n = 20 + rng.below(200);
    r.p = 1 + rng.below(4);
    const DesignMatrix dm = random_design(rng, r);
    Eigen::VectorXd w(static_cast<Eigen::Index>(dm.n()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(0.1, 4.0);
    const Eigen::MatrixXd A = outcome_design(dm);
    const WlsFit fit = weighted_least_squares(A, dm.Y, w, outcome_terms(dm));
    const DenseWls oracle = dense_wls(A, dm.Y, w);
    CHECK(fit.df == dm.n() - dm.p() - 2);
    for (std::size_t k = 0; k < oracle.beta.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      CHECK(fit.coefficients(kk) == doctest::Approx(oracle.beta[k]).epsilon(1e-10).scale(1.0));
      CHECK(fit.standard_errors(kk) == doctest::Approx(oracle.se[k]).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("rescaling the weights changes nothing") {
  Rng rng(45);
  for (int trial = 0; trial < 50; ++trial) {
    const DesignMatrix dm = random_design(rng, {});
    WeightSet ws = unit_weights(dm);
    for (Eigen::Index i = 0; i < ws.w.size(); ++i) ws.w(i) = rng.uniform(0.2, 3.0);
    WeightSet scaled = ws;
    scaled.w *= rng.uniform(0.01, 100.0);
    const EffectEstimate a = fit_doubly_robust(dm, ws);
    const EffectEstimate b = fit_doubly_robust(dm, scaled);
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
      CHECK(b.rows[k].estimate == doctest::Approx(a.rows[k].estimate).epsilon(1e-9).scale(1.0));
      CHECK(b.rows[k].se == doctest::Approx(a.rows[k].se).epsilon(1e-9));
      CHECK(b.rows[k].p == doctest::Approx(a.rows[k].p).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("t p-values") {
  CHECK(t_pvalue(0.0, 10) == doctest::Approx(1.0));
  CHECK(t_pvalue(2.228138851986, 10) == doctest::Approx(0.05).epsilon(1e-8));
  CHECK(t_pvalue(-2.228138851986, 10) == doctest::Approx(0.05).epsilon(1e-8));
  CHECK(t_pvalue(1.959963984540, 1000000) == doctest::Approx(0.05).epsilon(1e-5));
}

TEST_CASE("collinear design names the offending column") {
  Rng rng(47);
  DesignMatrix dm = random_design(rng, {});
  dm = dm.with_column("x1_again", dm.X.col(0) * 2.0);
  try {
    fit_doubly_robust(dm, unit_weights(dm));
    FAIL("expected a rank error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Rank);
    CHECK(std::string(e.what()).find("x1_again") != std::string::npos);
  }
}

TEST_CASE("ATC effect is reported as treated minus control") {
  const Dataset d = load_csv(kSmall);
  AnalysisSpec atc = small_spec();
  atc.estimand = Estimand::ATC;
  AnalysisSpec swapped = small_spec();
  std::swap(swapped.control_label, swapped.treatment_label);
  const DesignMatrix a = encode_design(d, atc);
  const DesignMatrix s = encode_design(d, swapped);
  REQUIRE(a.T == s.T);
  const EffectEstimate ea = fit_doubly_robust(a, unit_weights(a));
  const EffectEstimate es = fit_doubly_robust(s, unit_weights(s));
  CHECK(ea.effect == doctest::Approx(-es.effect).epsilon(1e-12));
  CHECK(ea.estimand == Estimand::ATC);
  CHECK(ea.treatment_row().se == doctest::Approx(es.treatment_row().se));
}

TEST_CASE("export has the retained rows, every column and one weight column per set") {
  const Dataset d = load_csv(kSmall);
  const DesignMatrix dm = encode_design(d, small_spec());
  WeightSet lr = unit_weights(dm);
  lr.w(2) = 0.123456789012345;
  WeightSet eb = unit_weights(dm);
  eb.algorithm = Algorithm::EB2;
  eb.w(0) = 2.5;
  const std::string csv = export_data_and_weights(d, dm, {lr, eb});
  const Dataset back = load_csv(csv);
  CHECK(back.n_rows() == dm.n());
  CHECK(back.n_rows() == 7);
  CHECK(back.n_cols() == d.n_cols() + 2);
  CHECK(back.column(d.n_cols()).name() == "LR");
  CHECK(back.column(d.n_cols() + 1).name() == "EB2");
  CHECK(back.column("LR").number(2) == lr.w(2));
  CHECK(back.column("EB2").number(0) == 2.5);
  for (std::size_t r = 0; r < dm.n(); ++r)
    for (std::size_t c = 0; c < d.n_cols(); ++c) CHECK(back.column(c).text(r) == d.column(c).text(dm.row_ids[r]));

  CsvOptions tab;
  tab.separator = Separator::Tab;
  CHECK(load_csv(export_data_and_weights(d, dm, {lr, eb}, Separator::Tab), tab) == back);
}

TEST_CASE("export avoids clashing with a data column") {
  const Dataset d = load_csv("LR,y,x,g\na,1,0.1,u\nb,2,0.2,v\na,1.5,0.3,v\nb,2.5,0.4,u\n");
  AnalysisSpec s = small_spec();
  s.treatment_var = "LR";
  const DesignMatrix dm = encode_design(d, s);
  const Dataset back = load_csv(export_data_and_weights(d, dm, {unit_weights(dm)}));
  CHECK(back.column(d.n_cols()).name() == "LR_w");
}

}
