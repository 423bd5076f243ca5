#include "unit/unit.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "cw/json_io.hpp"
#include "cw/pipeline.hpp"

using namespace cw;
using namespace cw::test;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cw_unit_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

json example_config() {
  return json::parse(R"({
    "example": {"seed": 5, "n_per_group": 150},
    "spec": {
      "treatment_var": "treat", "control_label": "0", "treatment_label": "1", "outcome_var": "ada_6",
      "numeric_confounders": ["tss_0", "sfs8p_0", "eps7p_0", "ias5p_0", "dss9_0", "satl_0"],
      "categorical_confounders": [
        {"name": "mhtrt_0_categorical", "reference_level": "0"},
        {"name": "subsgrps_n_categorical", "reference_level": "1"}],
      "estimand": "ATT"},
    "algorithms": ["LR", "CBPS1", "EB1"],
    "sensitivity": {"enabled": true, "grid": {"es_axis": [0.0, 0.3], "rho_axis": [0.0, 0.3]}, "draws": 1}
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config without an outcome names the field") {
  json cfg = example_config();
  cfg["spec"].erase("outcome_var");
  try {
    run_config_from_json(cfg, ".");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(has_field(e.errors(), "spec.outcome_var"));
  }
}

TEST_CASE("config errors are collected, not stopped at the first") {
  json cfg = example_config();
  cfg["chosen"] = "XYZ";
  cfg["workers"] = 0;
  cfg["bogus"] = 1;
  try {
    run_config_from_json(cfg, ".");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(has_field(e.errors(), "chosen"));
    CHECK(has_field(e.errors(), "workers"));
    CHECK(has_field(e.errors(), "bogus"));
  }
  json both = example_config();
  both["input_path"] = "x.csv";
  CHECK_THROWS_AS(run_config_from_json(both, "."), ValidationError);
}

TEST_CASE("relative paths resolve against the config directory") {
  json cfg = example_config();
  cfg.erase("example");
  cfg["input_path"] = "data/in.csv";
  cfg["output"] = "out";
  const RunConfig c = run_config_from_json(cfg, "/base");
  CHECK(*c.input_path == fs::path("/base/data/in.csv"));
  CHECK(c.output == fs::path("/base/out"));
}

TEST_CASE("seed override reaches every seed") {
  RunConfig c = run_config_from_json(example_config(), ".");
  override_seed(c, 77);
  CHECK(c.example->seed == 77);
  CHECK(c.sensitivity.request.seed == 77);
}

TEST_CASE("unknown outcome column is a config-phase error with exit code 2") {
  TempDir dir("cfg");
  json cfg = example_config();
  cfg["spec"]["outcome_var"] = "nope";
  cfg["output"] = dir.path.string();
  const RunConfig c = run_config_from_json(cfg, dir.path);
  try {
    run_pipeline(c);
    FAIL("expected a run error");
  } catch (const RunError& e) {
    CHECK(e.phase() == RunPhase::Config);
    CHECK(exit_code(e.phase()) == 2);
    CHECK(has_field(e.fields(), "spec.outcome_var"));
  }
}

TEST_CASE("malformed input file is a data-phase error with exit code 3") {
  TempDir dir("data");
  {
    std::ofstream(dir.path / "bad.csv") << "a,b\n1,2\n3\n";
  }
  json cfg = example_config();
  cfg.erase("example");
  cfg["input_path"] = "bad.csv";
  cfg["output"] = "out";
  try {
    run_pipeline(run_config_from_json(cfg, dir.path));
    FAIL("expected a run error");
  } catch (const RunError& e) {
    CHECK(e.phase() == RunPhase::Data);
    CHECK(exit_code(e.phase()) == 3);
    CHECK(e.kind() == ErrorKind::Parse);
  }
}

TEST_CASE("full run writes every artifact and the manifest hashes them") {
  TempDir dir("run");
  json cfg = example_config();
  cfg["output"] = "out";
  std::vector<std::string> log;
  const RunResult r = run_pipeline(run_config_from_json(cfg, dir.path), [&](const std::string& m) { log.push_back(m); });
  CHECK_FALSE(log.empty());
  REQUIRE(r.files.size() == 10);
  CHECK(r.files.back().filename() == "manifest.json");
  const json manifest = json::parse(slurp(dir.path / "out" / "manifest.json"));
  CHECK(manifest == r.manifest);
  for (const auto& a : manifest["artifacts"]) {
    const std::string bytes = slurp(dir.path / "out" / a["file"].get<std::string>());
    CHECK(a["fnv1a64"] == hex64(fnv1a64(bytes)));
    CHECK(a["bytes"] == bytes.size());
  }
  const json effect = json::parse(slurp(dir.path / "out" / "effect.json"));
  CHECK(manifest["effect"]["estimate"] == effect["effect"]);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

}
