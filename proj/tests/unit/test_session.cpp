#include "unit/unit.hpp"

#include "cw/example_data.hpp"
#include "cw/rng.hpp"
#include "cw/session.hpp"

using namespace cw;
using namespace cw::test;

namespace {

EngineOptions fast_engines() {
  EngineOptions o;
  o.algorithms = {Algorithm::LR, Algorithm::CBPS1, Algorithm::EB1};
  return o;
}

SensitivityRequest tiny_grid() {
  SensitivityRequest r;
  r.grid = SensitivityGridSpec::linspace(-0.2, 0.2, 2, 0.0, 0.2, 2);
  r.draws = 1;
  return r;
}

std::vector<TrimRule> wide_trim() { return {{"tss_0", -1e9, std::nullopt}}; }

// Artifacts present exactly for the stages that produce them.
void check_consistent(const Session& s) {
  s.read([](const SessionState& st) {
    CHECK(st.dataset.has_value() == (st.stage >= Stage::DataLoaded));
    CHECK(st.spec.has_value() == (st.stage >= Stage::SpecSet));
    CHECK(st.design.has_value() == (st.stage >= Stage::SpecSet));
    CHECK(!st.trims.rules.empty() == (st.stage >= Stage::Trimmed && !st.trims.rules.empty()));
    CHECK(!st.weight_sets.empty() == (st.stage >= Stage::Weighted));
    CHECK(st.balance.has_value() == (st.stage >= Stage::Weighted));
    CHECK(st.effect.has_value() == (st.stage >= Stage::Estimated));
    CHECK(st.sensitivity.has_value() == (st.stage >= Stage::SensitivityDone));
    return 0;
  });
}

}  // namespace

TEST_SUITE("session") {

TEST_CASE("estimating before weighting names the missing stage") {
  Session s("a");
  s.load_data(generate_example_dataset(1, 150), "example");
  try {
    s.estimate("auto");
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.kind() == ErrorKind::Conflict);
    CHECK(e.required() == Stage::Weighted);
    CHECK(e.current() == Stage::DataLoaded);
    CHECK(std::string(to_string(e.required())) == "WEIGHTED");
  }
}

TEST_CASE("changing trims drops weights and effect") {
  Session s("b");
  s.load_data(generate_example_dataset(2, 150), "example");
  s.set_spec(example_analysis_spec());
  s.compute_weights(fast_engines());
  const EffectEstimate e = s.estimate("auto");
  CHECK(s.stage() == Stage::Estimated);
  CHECK(e.algorithm_used == s.read([](const SessionState& st) { return st.chosen_algorithm; }));
  s.set_trims(wide_trim());
  CHECK(s.stage() == Stage::Trimmed);
  check_consistent(s);
  s.load_data(generate_example_dataset(3, 150), "example");
  CHECK(s.stage() == Stage::DataLoaded);
  check_consistent(s);
}

TEST_CASE("a failed step leaves the session as it was") {
  Session s("c");
  s.load_data(generate_example_dataset(4, 150), "example");
  AnalysisSpec bad = example_analysis_spec();
  bad.outcome_var = "nope";
  CHECK_THROWS_AS(s.set_spec(bad), ValidationError);
  CHECK(s.stage() == Stage::DataLoaded);
  s.set_spec(example_analysis_spec());
  CHECK_THROWS(s.set_trims({{"nope", 0.0, std::nullopt}}));
  CHECK(s.stage() == Stage::SpecSet);
  s.compute_weights(fast_engines());
  CHECK_THROWS(s.estimate("GBM_ES"));
  CHECK(s.stage() == Stage::Weighted);
}

TEST_CASE("random call sequences keep stage and artifacts in step") {
  Rng rng(71);
  const Dataset data = generate_example_dataset(5, 120);
  for (int seq = 0; seq < 25; ++seq) {
    Session s("r" + std::to_string(seq));
    Stage model = Stage::Empty;
    for (int step = 0; step < 10; ++step) {
      const auto op = rng.below(6);
      const Stage needs[] = {Stage::Empty, Stage::DataLoaded, Stage::SpecSet, Stage::SpecSet, Stage::Weighted,
                             Stage::Estimated};
      const Stage gives[] = {Stage::DataLoaded, Stage::SpecSet, Stage::Trimmed, Stage::Weighted, Stage::Estimated,
                             Stage::SensitivityDone};
      const bool allowed = model >= needs[op];
      try {
        switch (op) {
          case 0: s.load_data(data, "example"); break;
          case 1: s.set_spec(example_analysis_spec()); break;
          case 2: s.set_trims(wide_trim()); break;
          case 3: s.compute_weights(fast_engines()); break;
          case 4: s.estimate("auto"); break;
          default:
            s.start_sensitivity(tiny_grid());
            s.wait_sensitivity();
        }
        CHECK(allowed);
        model = gives[op];
      } catch (const StageError& e) {
        CHECK_FALSE(allowed);
        CHECK(e.required() == needs[op]);
      }
      CHECK(s.stage() == model);
      check_consistent(s);
    }
  }
}

TEST_CASE("sensitivity job runs to completion") {
  Session s("d", 2);
  s.load_data(generate_example_dataset(6, 150), "example");
  s.set_spec(example_analysis_spec());
  s.compute_weights(fast_engines());
  s.estimate("LR");
  const auto id = s.start_sensitivity(tiny_grid());
  s.wait_sensitivity();
  const SensitivityJobView v = s.sensitivity_job();
  CHECK(v.job_id == id);
  CHECK(v.status == JobStatus::Done);
  CHECK(v.cells_done == 4);
  CHECK(s.stage() == Stage::SensitivityDone);
  CHECK(s.read([](const SessionState& st) { return st.sensitivity->algorithm; }) == "LR");
}

TEST_CASE("cancelling a job leaves the session estimated") {
  Session s("e");
  s.load_data(generate_example_dataset(7, 300), "example");
  s.set_spec(example_analysis_spec());
  s.compute_weights(fast_engines());
  s.estimate("auto");
  SensitivityRequest big;
  big.draws = 50;
  s.start_sensitivity(big);
  s.cancel_sensitivity();
  s.wait_sensitivity();
  CHECK(s.sensitivity_job().status == JobStatus::Cancelled);
  CHECK(s.stage() == Stage::Estimated);
  check_consistent(s);
  CHECK(kind_of([&] { s.cancel_sensitivity(); }) == ErrorKind::Conflict);
}

TEST_CASE("new data cancels a running job") {
  Session s("f");
  s.load_data(generate_example_dataset(8, 300), "example");
  s.set_spec(example_analysis_spec());
  s.compute_weights(fast_engines());
  s.estimate("auto");
  SensitivityRequest big;
  big.draws = 50;
  s.start_sensitivity(big);
  s.load_data(generate_example_dataset(9, 100), "example");
  s.wait_sensitivity();
  CHECK(s.stage() == Stage::DataLoaded);
  CHECK(s.sensitivity_job().status == JobStatus::Cancelled);
}

TEST_CASE("archive restores the same analysis") {
  Session s("g");
  s.load_data(generate_example_dataset(10, 150), "example");
  s.set_spec(example_analysis_spec());
  s.set_trims(wide_trim());
  s.compute_weights(fast_engines());
  const EffectEstimate e = s.estimate("EB1");
  Session t("h");
  t.restore(s.archive());
  CHECK(t.stage() == Stage::Estimated);
  t.read([&](const SessionState& st) {
    CHECK(st.effect->effect == e.effect);
    CHECK(st.chosen_algorithm == "EB1");
    CHECK(st.trims.rules == wide_trim());
    CHECK(st.weights("EB1").w == s.read([](const SessionState& o) { return o.weights("EB1").w; }));
    return 0;
  });
  CHECK(t.archive() == s.archive());
}

TEST_CASE("session manager lookup") {
  SessionManager m;
  const auto a = m.create();
  const auto b = m.create();
  CHECK(a->id() != b->id());
  CHECK(m.size() == 2);
  CHECK(m.get(a->id()) == a);
  m.remove(a->id());
  CHECK(kind_of([&] { m.get(a->id()); }) == ErrorKind::NotFound);
  CHECK(kind_of([&] { m.remove("missing"); }) == ErrorKind::NotFound);
}

}
