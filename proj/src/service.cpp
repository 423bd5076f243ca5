#include "cw/service.hpp"

#include <algorithm>
#include <charconv>
#include <climits>
#include <cstdlib>
#include <string_view>

#include "cw/example_data.hpp"
#include "cw/format.hpp"
#include "cw/report.hpp"

namespace cw {

namespace {

std::size_t env_size(const char* name, std::size_t fallback, std::size_t min, std::size_t max) {
  const char* raw = std::getenv(name);
  if (raw == nullptr || *raw == '\0') return fallback;
  std::size_t value = 0;
  const std::string_view text(raw);
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || value < min || value > max)
    throw Error(ErrorKind::Input, std::string(name) + " must be an integer in [" + std::to_string(min) + ", " +
                                      std::to_string(max) + "], got '" + std::string(text) + "'");
  return value;
}

ApiResponse json_response(int status, const json& body) {
  ApiResponse r;
  r.status = status;
  r.body = body.dump();
  return r;
}

ApiResponse error_response(const Error& e) {
  json body = error_json(e);
  int status = 422;
  switch (e.kind()) {
    case ErrorKind::NotFound: status = 404; break;
    case ErrorKind::Conflict:
    case ErrorKind::Cancelled: status = 409; break;
    default: break;
  }
  if (const auto* s = dynamic_cast<const StageError*>(&e)) {
    body["required_stage"] = to_string(s->required());
    body["current_stage"] = to_string(s->current());
  }
  return json_response(status, body);
}

ApiResponse plain_error(int status, const std::string& kind, const std::string& message) {
  return json_response(status, {{"error", kind}, {"message", message}});
}

json parse_body(const ApiRequest& req) {
  if (trim(req.body).empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::vector<FieldError>{{"body", std::string("invalid JSON: ") + e.what()}});
  }
}

std::size_t query_size(const ApiRequest& req, const char* key, std::size_t fallback, std::size_t max) {
  const auto it = req.query.find(key);
  if (it == req.query.end()) return fallback;
  std::size_t value = 0;
  const std::string& text = it->second;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || value > max)
    throw ValidationError(std::vector<FieldError>{
        {key, "must be an integer in [0, " + std::to_string(max) + "]"}});
  return value;
}

json data_view(const SessionState& s, std::size_t head_rows) {
  return {{"stage", to_string(s.stage)},
          {"source", s.data_source},
          {"rows", s.dataset->n_rows()},
          {"columns", s.dataset->n_cols()},
          {"summary", to_json(summarize(*s.dataset))},
          {"head", head_preview(*s.dataset, head_rows)}};
}

json trim_log_json(const TrimLog& t) {
  json rules = json::array();
  for (const auto& r : t.rules) rules.push_back(to_json(r));
  return {{"rules", rules},
          {"rows_before", t.rows_before},
          {"rows_after", t.rows_after},
          {"removed_by_trims", t.rows_before - t.rows_after},
          {"missing_dropped", t.missing_dropped},
          {"removed_row_ids", t.removed_row_ids}};
}

json overlap_view(const SessionState& s, std::size_t grid_size, std::size_t workers) {
  const DesignMatrix& dm = *s.design;
  const Dataset final_rows = s.dataset->subset(dm.row_ids);
  json curves = json::array();
  for (const auto& g : group_densities(dm, grid_size, workers)) curves.push_back(to_json(g));
  json flags = json::array();
  for (const auto& f : overlap_flags(dm)) flags.push_back(to_json(f));
  return {{"stage", to_string(s.stage)},
          {"group_summaries", to_json(summarize(final_rows, s.spec->treatment_var))},
          {"densities", curves},
          {"flags", flags},
          {"trims", trim_log_json(s.trims)}};
}

json weights_view(const SessionState& s, bool include_weights) {
  json sets = json::array();
  for (const auto& ws : s.weight_sets) sets.push_back(to_json(ws, include_weights));
  json failures = json::array();
  for (const auto& f : s.engine_failures) failures.push_back(to_json(f));
  return {{"stage", to_string(s.stage)}, {"weight_sets", sets}, {"failures", failures}};
}

json job_view(const SensitivityJobView& v) {
  json j = {{"status", to_string(v.status)},
            {"job_id", v.job_id},
            {"cells_done", v.cells_done},
            {"cells_total", v.cells_total}};
  if (!v.error.empty()) j["error"] = v.error;
  return j;
}

CsvOptions csv_options_from_form(const std::map<std::string, std::string>& fields) {
  json j = json::object();
  for (const auto& [k, v] : fields) {
    if (k == "header")
      j[k] = !(v == "false" || v == "0" || v == "no");
    else
      j[k] = v;
  }
  return csv_options_from_json(j, "options");
}

EngineOptions engine_options_from_json(const json& body) {
  std::vector<FieldError> errors;
  JsonReader r(body, "", errors);
  r.reject_unknown({"algorithms", "gbm"});
  raise_if(errors);
  EngineOptions options;
  if (body.contains("algorithms")) options.algorithms = algorithms_from_json(body["algorithms"], "algorithms");
  if (body.contains("gbm")) options.gbm = gbm_params_from_json(body["gbm"], "gbm");
  return options;
}

SensitivityRequest sensitivity_request_from_json(const json& body) {
  std::vector<FieldError> errors;
  JsonReader r(body, "", errors);
  SensitivityRequest req;
  r.reject_unknown({"grid", "draws", "seed"});
  req.draws = static_cast<std::size_t>(r.integer("draws", false, 1, 100000).value_or(20));
  req.seed = static_cast<std::uint64_t>(r.integer("seed", false, 0, LLONG_MAX).value_or(1));
  raise_if(errors);
  if (body.contains("grid")) req.grid = grid_spec_from_json(body["grid"], "grid");
  return req;
}

}  // namespace

ServiceConfig service_config_from_env() {
  ServiceConfig c;
  if (const char* bind = std::getenv("CW_BIND"); bind != nullptr && *bind != '\0') c.bind = bind;
  c.port = static_cast<int>(env_size("CW_PORT", static_cast<std::size_t>(c.port), 1, 65535));
  c.max_upload_bytes = env_size("CW_MAX_UPLOAD_MB", 50, 1, 1u << 20) * 1024u * 1024u;
  c.workers = env_size("CW_WORKERS", c.workers, 1, 256);
  return c;
}

Api::Api(ServiceConfig config) : config_(std::move(config)), sessions_(config_.workers) {}

ApiResponse Api::handle(const ApiRequest& request) {
  try {
    return route(request);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return plain_error(500, "internal", e.what());
  }
}

ApiResponse Api::route(const ApiRequest& req) {
  std::vector<std::string> parts;
  std::string_view path = req.path;
  while (!path.empty()) {
    const auto slash = path.find('/');
    const std::string_view seg = path.substr(0, slash);
    if (!seg.empty()) parts.emplace_back(seg);
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash + 1);
  }
  if (parts.empty() || parts[0] != "v1") return plain_error(404, "not_found", "unknown path " + req.path);
  const auto method_not_allowed = [&] {
    return plain_error(405, "method_not_allowed", req.method + " is not supported on " + req.path);
  };

  if (parts.size() == 2 && parts[1] == "health") {
    if (req.method != "GET") return method_not_allowed();
    return json_response(200, {{"status", "ok"}, {"version", kVersion}, {"sessions", sessions_.size()}});
  }
  if (parts.size() < 2 || parts[1] != "sessions") return plain_error(404, "not_found", "unknown path " + req.path);

  if (parts.size() == 2) {
    if (req.method != "POST") return method_not_allowed();
    auto session = sessions_.create();
    return json_response(201, {{"id", session->id()}, {"stage", to_string(session->stage())}});
  }
  if (parts.size() == 3 && parts[2] == "restore") {
    if (req.method != "POST") return method_not_allowed();
    const json archive = parse_body(req);
    auto session = sessions_.create();
    try {
      session->restore(archive);
    } catch (...) {
      sessions_.remove(session->id());
      throw;
    }
    return json_response(201, {{"id", session->id()}, {"stage", to_string(session->stage())}});
  }
  auto session = sessions_.get(parts[2]);
  return session_route(req, session, std::vector<std::string>(parts.begin() + 3, parts.end()));
}

ApiResponse Api::session_route(const ApiRequest& req, const std::shared_ptr<Session>& session,
                               const std::vector<std::string>& rest) {
  const std::string& m = req.method;
  const auto method_not_allowed = [&] {
    return plain_error(405, "method_not_allowed", m + " is not supported on " + req.path);
  };
  const std::string what = rest.empty() ? "" : rest[0];

  if (rest.empty()) {
    if (m == "GET") {
      json j = session->read([&](const SessionState& s) {
        json out = {{"id", session->id()}, {"stage", to_string(s.stage)}};
        if (!s.chosen_algorithm.empty()) out["chosen_algorithm"] = s.chosen_algorithm;
        return out;
      });
      j["sensitivity_job"] = job_view(session->sensitivity_job());
      return json_response(200, j);
    }
    if (m == "DELETE") {
      sessions_.remove(session->id());
      return ApiResponse{204, "application/json", "", {}};
    }
    return method_not_allowed();
  }

  if (what == "data" && rest.size() == 2 && rest[1] == "example") {
    if (m != "POST") return method_not_allowed();
    const json body = parse_body(req);
    std::vector<FieldError> errors;
    JsonReader r(body, "", errors);
    r.reject_unknown({"seed", "n_per_group", "head"});
    const auto seed = static_cast<std::uint64_t>(r.integer("seed", false, 0, LLONG_MAX).value_or(20240601));
    const auto n = static_cast<std::size_t>(r.integer("n_per_group", false, 50, 1000000).value_or(2000));
    const auto head = static_cast<std::size_t>(r.integer("head", false, 0, 1000).value_or(10));
    raise_if(errors);
    session->load_data(generate_example_dataset(seed, n),
                       "example dataset (seed " + std::to_string(seed) + ", " + std::to_string(n) + " per group)");
    return json_response(200, session->read([&](const SessionState& s) { return data_view(s, head); }));
  }

  if (what == "data" && rest.size() == 1) {
    if (m == "GET") {
      const std::size_t head = query_size(req, "head", 10, 100000);
      return json_response(200, session->read([&](const SessionState& s) {
        Session::require(s, Stage::DataLoaded);
        return data_view(s, head);
      }));
    }
    if (m != "POST") return method_not_allowed();
    std::string bytes;
    std::string source = "upload";
    CsvOptions options;
    if (!req.files.empty()) {
      const UploadedFile* file = &req.files.front();
      for (const auto& f : req.files)
        if (f.field == "file") file = &f;
      bytes = file->content;
      if (!file->filename.empty()) source = file->filename;
      options = csv_options_from_form(req.form);
    } else {
      bytes = req.body;
      std::map<std::string, std::string> fields;
      for (const char* key : {"header", "separator", "quote"})
        if (auto it = req.query.find(key); it != req.query.end()) fields[key] = it->second;
      options = csv_options_from_form(fields);
    }
    if (bytes.size() > config_.max_upload_bytes)
      return plain_error(413, "payload_too_large",
                         "upload exceeds " + std::to_string(config_.max_upload_bytes / (1024 * 1024)) + " MB");
    const std::size_t head = query_size(req, "head", 10, 100000);
    session->load_data(load_csv(bytes, options), source);
    return json_response(200, session->read([&](const SessionState& s) { return data_view(s, head); }));
  }

  if (what == "spec" && rest.size() == 1) {
    if (m == "GET") {
      return json_response(200, session->read([&](const SessionState& s) {
        Session::require(s, Stage::SpecSet);
        return json{{"stage", to_string(s.stage)},
                    {"spec", to_json(*s.spec)},
                    {"formulas", to_json(describe_models(*s.spec, *s.dataset))}};
      }));
    }
    if (m != "PUT") return method_not_allowed();
    const json body = parse_body(req);
    const AnalysisSpec spec = spec_from_json(body.contains("spec") ? body["spec"] : body, "spec");
    const ModelFormulas formulas = session->set_spec(spec);
    return json_response(200, session->read([&](const SessionState& s) {
      return json{{"stage", to_string(s.stage)},
                  {"formulas", to_json(formulas)},
                  {"rows_used", s.design->n()},
                  {"missing_dropped", s.trims.missing_dropped}};
    }));
  }

  if (what == "overlap" && rest.size() == 1) {
    if (m != "GET") return method_not_allowed();
    const std::size_t grid = query_size(req, "grid", 512, 8192);
    return json_response(200, session->read([&](const SessionState& s) {
      Session::require(s, Stage::SpecSet);
      return overlap_view(s, std::max<std::size_t>(grid, 2), config_.workers);
    }));
  }

  if (what == "trims" && rest.size() == 1) {
    if (m == "GET") {
      return json_response(200, session->read([&](const SessionState& s) {
        Session::require(s, Stage::SpecSet);
        return trim_log_json(s.trims);
      }));
    }
    if (m != "PUT") return method_not_allowed();
    const json body = parse_body(req);
    const json& list = body.is_object() && body.contains("trims") ? body["trims"] : body;
    session->set_trims(list.is_object() && list.empty() ? std::vector<TrimRule>{} : trims_from_json(list, "trims"));
    return json_response(200, session->read([&](const SessionState& s) {
      return overlap_view(s, 512, config_.workers);
    }));
  }

  if (what == "weights" && rest.size() == 1) {
    if (m == "GET") {
      const bool include = req.query.count("include_weights") && req.query.at("include_weights") != "false";
      return json_response(200, session->read([&](const SessionState& s) {
        Session::require(s, Stage::Weighted);
        return weights_view(s, include);
      }));
    }
    if (m != "POST") return method_not_allowed();
    session->compute_weights(engine_options_from_json(parse_body(req)));
    return json_response(200, session->read([&](const SessionState& s) {
      json j = weights_view(s, false);
      j["balance"] = to_json(*s.balance);
      return j;
    }));
  }

  if (what == "balance" && rest.size() == 1) {
    if (m != "GET") return method_not_allowed();
    return json_response(200, session->read([&](const SessionState& s) {
      Session::require(s, Stage::Weighted);
      return to_json(*s.balance);
    }));
  }

  if (what == "estimate" && rest.size() == 1) {
    if (m == "GET") {
      return json_response(200, session->read([&](const SessionState& s) {
        Session::require(s, Stage::Estimated);
        return to_json(*s.effect);
      }));
    }
    if (m != "POST") return method_not_allowed();
    const json body = parse_body(req);
    std::vector<FieldError> errors;
    JsonReader r(body, "", errors);
    r.reject_unknown({"algorithm"});
    const std::string algorithm = r.string("algorithm", false).value_or("auto");
    raise_if(errors);
    return json_response(200, to_json(session->estimate(algorithm)));
  }

  if (what == "sensitivity" && rest.size() == 1) {
    if (m == "POST") {
      const std::uint64_t job = session->start_sensitivity(sensitivity_request_from_json(parse_body(req)));
      json j = job_view(session->sensitivity_job());
      j["job_id"] = job;
      return json_response(202, j);
    }
    if (m == "GET") {
      json j = job_view(session->sensitivity_job());
      session->read([&](const SessionState& s) {
        if (s.sensitivity) j["grid"] = to_json(*s.sensitivity);
        return 0;
      });
      return json_response(200, j);
    }
    if (m == "DELETE") {
      session->cancel_sensitivity();
      return json_response(200, job_view(session->sensitivity_job()));
    }
    return method_not_allowed();
  }

  if (what == "report" && rest.size() == 1) {
    if (m != "GET") return method_not_allowed();
    ApiResponse r;
    r.content_type = "text/html; charset=utf-8";
    r.body = session->read([](const SessionState& s) { return render_report(s); });
    return r;
  }

  if (what == "export" && rest.size() == 1) {
    if (m != "GET") return method_not_allowed();
    const auto it = req.query.find("format");
    const std::string format = it == req.query.end() ? "csv" : it->second;
    if (format != "csv" && format != "tsv")
      throw ValidationError(std::vector<FieldError>{{"format", "must be csv or tsv"}});
    ApiResponse r;
    r.content_type = format == "csv" ? "text/csv; charset=utf-8" : "text/tab-separated-values; charset=utf-8";
    r.headers["Content-Disposition"] = "attachment; filename=\"data_and_weights." + format + "\"";
    r.body = session->read([&](const SessionState& s) {
      Session::require(s, Stage::Weighted);
      return export_data_and_weights(*s.dataset, *s.design, s.weight_sets,
                                     format == "csv" ? Separator::Comma : Separator::Tab);
    });
    return r;
  }

  if (what == "archive" && rest.size() == 1) {
    if (m != "GET") return method_not_allowed();
    ApiResponse r = json_response(200, session->archive());
    r.headers["Content-Disposition"] = "attachment; filename=\"session.json\"";
    return r;
  }

  return plain_error(404, "not_found", "unknown path " + req.path);
}

}  // namespace cw
