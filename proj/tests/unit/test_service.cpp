#include "unit/unit.hpp"

#include "cw/format.hpp"
#include "cw/json_io.hpp"
#include "cw/service.hpp"

using namespace cw;
using namespace cw::test;

namespace {

struct Client {
  Api api;

  ApiResponse call(std::string method, std::string path, const json& body = nullptr,
                   std::map<std::string, std::string> query = {}) {
    ApiRequest r;
    r.method = std::move(method);
    r.path = std::move(path);
    r.query = std::move(query);
    if (!body.is_null()) {
      r.body = body.dump();
      r.content_type = "application/json";
    }
    return api.handle(r);
  }

  std::string new_session() {
    const ApiResponse r = call("POST", "/v1/sessions");
    REQUIRE(r.status == 201);
    return json::parse(r.body)["id"].get<std::string>();
  }
};

json example_spec() {
  return {{"treatment_var", "treat"},
          {"control_label", "0"},
          {"treatment_label", "1"},
          {"outcome_var", "ada_6"},
          {"numeric_confounders", {"tss_0", "sfs8p_0", "eps7p_0", "ias5p_0", "dss9_0", "satl_0"}},
          {"categorical_confounders",
           {{{"name", "mhtrt_0_categorical"}, {"reference_level", "0"}},
            {{"name", "subsgrps_n_categorical"}, {"reference_level", "1"}}}},
          {"estimand", "ATT"}};
}

const json kFast = {{"algorithms", {"LR", "CBPS1", "EB1"}}};

}  // namespace

TEST_SUITE("service") {

TEST_CASE("health") {
  Client c;
  const ApiResponse r = c.call("GET", "/v1/health");
  CHECK(r.status == 200);
  const json j = json::parse(r.body);
  CHECK(j["status"] == "ok");
  CHECK(j["version"] == kVersion);
}

TEST_CASE("happy path from example data to report") {
  Client c;
  const std::string id = c.new_session();
  const std::string base = "/v1/sessions/" + id;
  CHECK(c.call("POST", base + "/data/example", {{"seed", 3}, {"n_per_group", 200}}).status == 200);
  const ApiResponse spec = c.call("PUT", base + "/spec", example_spec());
  REQUIRE(spec.status == 200);
  CHECK(json::parse(spec.body)["stage"] == "SPEC_SET");
  CHECK(c.call("GET", base + "/overlap", nullptr, {{"grid", "64"}}).status == 200);
  CHECK(c.call("PUT", base + "/trims", json::array({{{"confounder", "tss_0"}, {"lower_cut", -100.0}}})).status == 200);

  const ApiResponse w = c.call("POST", base + "/weights", kFast);
  REQUIRE(w.status == 200);
  const json balance = json::parse(w.body)["balance"];
  CHECK(balance["columns"].size() == 4);
  CHECK(balance["columns"][0]["id"] == "Unweighted");

  const ApiResponse e = c.call("POST", base + "/estimate", {{"algorithm", "auto"}});
  REQUIRE(e.status == 200);
  const json effect = json::parse(e.body);
  CHECK(effect["algorithm"] == balance["recommended"]);
  CHECK(json::parse(c.call("GET", base + "/estimate").body) == effect);

  const ApiResponse rep = c.call("GET", base + "/report");
  REQUIRE(rep.status == 200);
  CHECK(rep.content_type.find("text/html") == 0);
  CHECK(rep.body.find("Balance evaluation") != std::string::npos);
  CHECK(rep.body.find("Standardized mean differences") != std::string::npos);
  CHECK(rep.body.find("Effective sample size") != std::string::npos);
  CHECK(rep.body.find(format_fixed(effect["effect"].get<double>(), 3)) != std::string::npos);
  CHECK(rep.body.find("Sensitivity to unobserved confounding") == std::string::npos);

  const ApiResponse csv = c.call("GET", base + "/export", nullptr, {{"format", "tsv"}});
  CHECK(csv.status == 200);
  CHECK(csv.headers.at("Content-Disposition").find("data_and_weights.tsv") != std::string::npos);

  const ApiResponse s = c.call("POST", base + "/sensitivity",
                               {{"grid", {{"es_axis", {0.0, 0.2}}, {"rho_axis", {0.0, 0.2}}}}, {"draws", 1}});
  CHECK(s.status == 202);
  c.api.sessions().get(id)->wait_sensitivity();
  const json job = json::parse(c.call("GET", base + "/sensitivity").body);
  CHECK(job["status"] == "done");
  CHECK(job.contains("grid"));
  CHECK(c.call("GET", base + "/report").body.find("Sensitivity to unobserved confounding") != std::string::npos);
}

TEST_CASE("balance before weighting is a 409 naming WEIGHTED") {
  Client c;
  const std::string base = "/v1/sessions/" + c.new_session();
  c.call("POST", base + "/data/example", {{"n_per_group", 100}});
  const ApiResponse r = c.call("GET", base + "/balance");
  CHECK(r.status == 409);
  const json j = json::parse(r.body);
  CHECK(j["required_stage"] == "WEIGHTED");
  CHECK(j["current_stage"] == "DATA_LOADED");
}

TEST_CASE("unknown session, route and method") {
  Client c;
  CHECK(c.call("GET", "/v1/sessions/nope").status == 404);
  CHECK(c.call("GET", "/v1/nothing").status == 404);
  CHECK(c.call("GET", "/elsewhere").status == 404);
  const std::string base = "/v1/sessions/" + c.new_session();
  CHECK(c.call("GET", base + "/unknown").status == 404);
  CHECK(c.call("PATCH", base + "/spec").status == 405);
  CHECK(c.call("DELETE", base).status == 204);
  CHECK(c.call("GET", base).status == 404);
}

TEST_CASE("bad spec is a 422 listing the fields") {
  Client c;
  const std::string base = "/v1/sessions/" + c.new_session();
  c.call("POST", base + "/data/example", {{"n_per_group", 100}});
  json spec = example_spec();
  spec["outcome_var"] = "nope";
  spec["numeric_confounders"] = json::array();
  const ApiResponse r = c.call("PUT", base + "/spec", spec);
  CHECK(r.status == 422);
  const json j = json::parse(r.body);
  std::vector<std::string> fields;
  for (const auto& f : j["fields"]) fields.push_back(f["field"]);
  CHECK(std::find(fields.begin(), fields.end(), "outcome_var") != fields.end());
  CHECK(std::find(fields.begin(), fields.end(), "confounders") != fields.end());
  CHECK(c.call("PUT", base + "/spec", nullptr).status == 422);
  ApiRequest broken;
  broken.method = "PUT";
  broken.path = base + "/spec";
  broken.body = "{not json";
  CHECK(c.api.handle(broken).status == 422);
}

TEST_CASE("uploads: ragged csv, oversize and re-upload reset") {
  ServiceConfig cfg;
  cfg.max_upload_bytes = 64;
  Client c{Api(cfg)};
  const std::string base = "/v1/sessions/" + c.new_session();

  ApiRequest up;
  up.method = "POST";
  up.path = base + "/data";
  up.files.push_back({"file", "d.csv", "a,b\n1,x\n2"});
  const ApiResponse ragged = c.api.handle(up);
  CHECK(ragged.status == 422);
  CHECK(json::parse(ragged.body)["row"] == 3);

  up.files[0].content = std::string(100, '1');
  CHECK(c.api.handle(up).status == 413);

  up.files[0].content = "a;b\n1;2\n3;4\n";
  up.form["separator"] = "semicolon";
  const ApiResponse ok = c.api.handle(up);
  REQUIRE(ok.status == 200);
  CHECK(json::parse(ok.body)["columns"] == 2);
  CHECK(json::parse(c.call("GET", base).body)["stage"] == "DATA_LOADED");
}

TEST_CASE("uploading new data resets a finished analysis") {
  Client c;
  const std::string base = "/v1/sessions/" + c.new_session();
  c.call("POST", base + "/data/example", {{"n_per_group", 120}});
  c.call("PUT", base + "/spec", example_spec());
  c.call("POST", base + "/weights", kFast);
  REQUIRE(c.call("POST", base + "/estimate").status == 200);
  c.call("POST", base + "/data/example", {{"n_per_group", 120}, {"seed", 9}});
  CHECK(json::parse(c.call("GET", base).body)["stage"] == "DATA_LOADED");
  CHECK(c.call("GET", base + "/estimate").status == 409);
  CHECK(c.call("GET", base + "/report").status == 409);
}

TEST_CASE("archive and restore through the API") {
  Client c;
  const std::string base = "/v1/sessions/" + c.new_session();
  c.call("POST", base + "/data/example", {{"n_per_group", 120}});
  c.call("PUT", base + "/spec", example_spec());
  c.call("POST", base + "/weights", kFast);
  c.call("POST", base + "/estimate", {{"algorithm", "LR"}});
  const ApiResponse archive = c.call("GET", base + "/archive");
  REQUIRE(archive.status == 200);
  ApiRequest restore;
  restore.method = "POST";
  restore.path = "/v1/sessions/restore";
  restore.body = archive.body;
  const ApiResponse r = c.api.handle(restore);
  REQUIRE(r.status == 201);
  const std::string other = "/v1/sessions/" + json::parse(r.body)["id"].get<std::string>();
  CHECK(c.call("GET", other + "/estimate").body == c.call("GET", base + "/estimate").body);
  CHECK(c.call("GET", other + "/report").body == c.call("GET", base + "/report").body);
}

}
