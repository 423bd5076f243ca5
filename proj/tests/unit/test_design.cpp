#include "unit/unit.hpp"

#include <set>

#include "cw/analysis_spec.hpp"
#include "cw/dataset.hpp"
#include "cw/design.hpp"
#include "cw/example_data.hpp"
#include "cw/rng.hpp"

using namespace cw;
using namespace cw::test;

namespace {

AnalysisSpec basic_spec() {
  AnalysisSpec s;
  s.treatment_var = "t";
  s.control_label = "0";
  s.treatment_label = "1";
  s.outcome_var = "y";
  s.numeric_confounders = {"x"};
  s.categorical_confounders = {{"c", "0"}};
  s.estimand = Estimand::ATT;
  return s;
}

const char* kBasic =
    "t,y,x,c\n"
    "0,1.0,0.5,0\n"
    "1,2.0,1.5,1\n"
    "0,1.5,0.1,2\n"
    "1,2.5,2.0,0\n"
    "0,0.5,0.3,1\n"
    "1,3.0,1.1,2\n";

}  // namespace

TEST_SUITE("design") {

TEST_CASE("three-level categorical gives var.1 and var.2") {
  const DesignMatrix dm = encode_design(load_csv(kBasic), basic_spec());
  CHECK(dm.column_names == std::vector<std::string>{"x", "c.1", "c.2"});
  CHECK(dm.is_dummy == std::vector<bool>{false, true, true});
  CHECK(dm.X(1, 1) == 1.0);
  CHECK(dm.X(1, 2) == 0.0);
  CHECK(dm.X(0, 1) + dm.X(0, 2) == 0.0);
}

TEST_CASE("example data dummy names") {
  const DesignMatrix dm = encode_design(generate_example_dataset(1, 100), example_analysis_spec());
  CHECK(dm.column_index("mhtrt_0_categorical.1") < dm.p());
  CHECK(dm.column_index("mhtrt_0_categorical.2") < dm.p());
  CHECK_THROWS_AS(dm.column_index("mhtrt_0_categorical.0"), Error);
}

TEST_CASE("binary numeric confounder passes through unchanged") {
  AnalysisSpec s = basic_spec();
  s.numeric_confounders = {"x", "b"};
  const Dataset d = load_csv("t,y,x,b,c\n0,1,0.5,1,0\n1,2,1.5,0,1\n0,1,0.2,1,1\n1,3,0.9,0,0\n");
  const DesignMatrix dm = encode_design(d, s);
  const auto j = dm.column_index("b");
  CHECK(dm.X(0, static_cast<Eigen::Index>(j)) == 1.0);
  CHECK(dm.X(1, static_cast<Eigen::Index>(j)) == 0.0);
  CHECK_FALSE(dm.is_dummy[j]);
}

TEST_CASE("one missing outcome in ten rows is dropped and counted") {
  std::string csv = "t,y,x,c\n";
  for (int i = 0; i < 10; ++i)
    csv += std::to_string(i % 2) + "," + (i == 4 ? std::string("NA") : std::to_string(i)) + "," +
           std::to_string(i * 0.5) + "," + std::to_string(i % 3) + "\n";
  const DesignMatrix dm = encode_design(load_csv(csv), basic_spec());
  CHECK(dm.n() == 9);
  CHECK(dm.dropped_count == 1);
  CHECK(std::find(dm.row_ids.begin(), dm.row_ids.end(), 4u) == dm.row_ids.end());
}

TEST_CASE("treatment with three values is a multi-group error") {
  const Dataset d = load_csv("t,y,x,c\n0,1,1,0\n1,2,2,1\n2,3,3,0\n0,1,2,1\n1,1,1,0\n");
  CHECK(kind_of([&] { encode_design(d, basic_spec()); }) == ErrorKind::MultiGroup);
}

TEST_CASE("categorical left with one level after dropping rows is degenerate") {
  const Dataset d = load_csv("t,y,x,c\n0,1,1,0\n1,2,2,0\n0,3,3,0\n1,NA,2,1\n");
  CHECK(kind_of([&] { encode_design(d, basic_spec()); }) == ErrorKind::Degenerate);
}

TEST_CASE("spec validation names every offending field") {
  const Dataset d = load_csv(kBasic);
  AnalysisSpec s = basic_spec();
  s.outcome_var = "missing";
  s.numeric_confounders = {};
  s.categorical_confounders = {{"c", "9"}};
  s.treatment_label = "0";
  const auto errors = validate(s, d);
  CHECK(has_field(errors, "outcome_var"));
  CHECK(has_field(errors, "confounders"));
  CHECK(has_field(errors, "categorical_confounders[0].reference_level"));
  CHECK(has_field(errors, "treatment_label"));
  CHECK_THROWS_AS(require_valid(s, d), ValidationError);
  CHECK(validate(basic_spec(), d).empty());
}

TEST_CASE("two confounders are the minimum") {
  const Dataset d = load_csv(kBasic);
  AnalysisSpec s = basic_spec();
  s.categorical_confounders.clear();
  CHECK_FALSE(validate(s, d).empty());
}

TEST_CASE("model formulas echo the encoded terms") {
  const ModelFormulas f = describe_models(basic_spec(), load_csv(kBasic));
  CHECK(f.treatment_model == "t ~ x + c.1 + c.2");
  CHECK(f.outcome_model == "y ~ t + x + c.1 + c.2");
  CHECK(f.reference_levels == std::vector<std::string>{"c.0"});
}

TEST_CASE("ATC flips the indicator and runs as ATT") {
  AnalysisSpec s = basic_spec();
  const DesignMatrix att = encode_design(load_csv(kBasic), s);
  s.estimand = Estimand::ATC;
  const DesignMatrix atc = encode_design(load_csv(kBasic), s);
  CHECK(atc.flipped);
  CHECK(atc.estimand == Estimand::ATT);
  CHECK(atc.requested == Estimand::ATC);
  // flipping the labels once more gives back the original indicator
  CHECK((Eigen::VectorXd::Ones(atc.n()) - atc.T) == att.T);
  std::swap(s.control_label, s.treatment_label);
  const DesignMatrix twice = encode_design(load_csv(kBasic), s);
  CHECK(twice.T == att.T);
}

TEST_CASE("dummy blocks are complete and decode losslessly") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int levels = 2 + static_cast<int>(rng.below(4));
    const std::size_t n = 12 + rng.below(30);
    std::string csv = "t,y,x,c\n";
    std::vector<int> code(n);
    for (std::size_t i = 0; i < n; ++i) {
      code[i] = i < static_cast<std::size_t>(levels) ? static_cast<int>(i) : static_cast<int>(rng.below(levels));
      csv += std::to_string(i % 2) + "," + std::to_string(rng.normal()) + "," + std::to_string(rng.normal()) + ",L" +
             std::to_string(code[i]) + "\n";
    }
    AnalysisSpec s = basic_spec();
    const int ref = static_cast<int>(rng.below(levels));
    s.categorical_confounders = {{"c", "L" + std::to_string(ref)}};
    const DesignMatrix dm = encode_design(load_csv(csv), s);
    REQUIRE(dm.p() == static_cast<std::size_t>(levels));  // x plus levels - 1 dummies
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0;
      int decoded = ref;
      for (std::size_t j = 1; j < dm.p(); ++j) {
        const double v = dm.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        sum += v;
        if (v == 1.0) decoded = std::stoi(dm.column_names[j].substr(3));
      }
      CHECK((sum == 0.0 || sum == 1.0));
      CHECK(decoded == code[i]);
    }
  }
}

TEST_CASE("adding a fully observed row never changes which rows are dropped") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::string csv = "t,y,x,c\n";
    const std::size_t n = 8 + rng.below(10);
    for (std::size_t i = 0; i < n; ++i) {
      const auto cell = [&](const std::string& v) { return rng.bernoulli(0.15) ? std::string("NA") : v; };
      csv += std::to_string(i % 2) + "," + cell(std::to_string(rng.normal())) + "," +
             cell(std::to_string(rng.normal())) + "," + std::to_string(i % 3) + "\n";
    }
    DesignMatrix before;
    try {
      before = encode_design(load_csv(csv), basic_spec());
    } catch (const Error&) {
      continue;  // too few complete rows for this draw
    }
    const std::string extra = csv + "1,0.5,0.25,2\n";
    const DesignMatrix after = encode_design(load_csv(extra), basic_spec());
    std::vector<std::size_t> kept(after.row_ids.begin(), after.row_ids.end() - 1);
    CHECK(kept == before.row_ids);
    CHECK(after.row_ids.back() == n);
  }
}

TEST_CASE("select_rows and with_column keep fields aligned") {
  const DesignMatrix dm = encode_design(load_csv(kBasic), basic_spec());
  const DesignMatrix sub = dm.select_rows({0, 2, 4});
  CHECK(sub.n() == 3);
  CHECK(sub.row_ids == std::vector<std::size_t>{0, 2, 4});
  CHECK(sub.Y(1) == dm.Y(2));
  const DesignMatrix wide = dm.with_column("U", Eigen::VectorXd::Constant(dm.n(), 2.0));
  CHECK(wide.p() == dm.p() + 1);
  CHECK(wide.column_names.back() == "U");
  CHECK(wide.X(3, static_cast<Eigen::Index>(dm.p())) == 2.0);
}

}
