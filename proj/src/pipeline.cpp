#include "cw/pipeline.hpp"

#include <climits>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cw/example_data.hpp"
#include "cw/format.hpp"
#include "cw/report.hpp"
#include "cw/service.hpp"

namespace cw {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace {

std::vector<FieldError> fields_of(const Error& e) {
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) return v->errors();
  return {};
}

// Runs a sub-reader and folds its field errors into `errors`.
template <typename F>
void collect(std::vector<FieldError>& errors, F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    errors.insert(errors.end(), e.errors().begin(), e.errors().end());
  } catch (const Error& e) {
    errors.push_back({"(config)", e.what()});
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(std::vector<FieldError>{{"input_path", "cannot open " + path.string()}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError(std::vector<FieldError>{{"output", "cannot write " + path.string()}});
}

json config_echo(const RunConfig& c) {
  json j = json::object();
  if (c.example) j["example"] = {{"seed", c.example->seed}, {"n_per_group", c.example->n_per_group}};
  j["parse"] = {{"header", c.parse.header},
                {"separator", std::string(1, separator_char(c.parse.separator))},
                {"quote", c.parse.quote == Quote::None ? "none" : c.parse.quote == Quote::Double ? "double" : "single"}};
  j["spec"] = to_json(c.spec);
  json trims = json::array();
  for (const auto& t : c.trims) trims.push_back(to_json(t));
  j["trims"] = trims;
  json algs = json::array();
  for (Algorithm a : c.engines.algorithms) algs.push_back(to_string(a));
  j["algorithms"] = algs;
  const GbmParams& g = c.engines.gbm;
  j["gbm"] = {{"max_trees", g.max_trees},
              {"shrinkage", g.shrinkage},
              {"depth", g.depth},
              {"eval_stride", g.eval_stride},
              {"min_leaf", g.min_leaf}};
  j["chosen"] = c.chosen;
  j["sensitivity"] = {{"enabled", c.sensitivity.enabled},
                      {"es_axis", c.sensitivity.request.grid.es_axis},
                      {"rho_axis", c.sensitivity.request.grid.rho_axis},
                      {"draws", c.sensitivity.request.draws},
                      {"seed", c.sensitivity.request.seed}};
  return j;
}

std::string metric_csv(const BalanceReport& b, bool smd) {
  std::string out;
  std::vector<std::string> row{"confounder"};
  for (const auto& c : b.columns) row.push_back(c.id);
  append_csv_record(out, row, ',');
  for (std::size_t j = 0; j < b.confounders.size(); ++j) {
    row = {b.confounders[j]};
    for (const auto& c : b.columns) row.push_back(format_number(smd ? c.smd[j] : c.ks[j]));
    append_csv_record(out, row, ',');
  }
  row = {"Mean"};
  for (const auto& c : b.columns) row.push_back(format_number(smd ? c.mean_smd : c.mean_ks));
  append_csv_record(out, row, ',');
  row = {"Max"};
  for (const auto& c : b.columns) row.push_back(format_number(smd ? c.max_smd : c.max_ks));
  append_csv_record(out, row, ',');
  return out;
}

std::string ess_csv(const BalanceReport& b) {
  std::string out;
  append_csv_record(out, {"algorithm", "ess_total", "ess_control", "ess_treatment", "n", "percent"}, ',');
  for (const auto& c : b.columns)
    append_csv_record(out,
                      {c.id, format_number(c.ess.total), format_number(c.ess.control), format_number(c.ess.treated),
                       std::to_string(c.ess.n), c.ess.percent_text()},
                      ',');
  return out;
}

std::string effect_csv(const EffectEstimate& e) {
  std::string out;
  append_csv_record(out, {"term", "estimate", "std_error", "t_value", "p_value"}, ',');
  for (const auto& r : e.rows)
    append_csv_record(out, {r.term, format_number(r.estimate), format_number(r.se), format_number(r.t), format_number(r.p)},
                      ',');
  return out;
}

}  // namespace

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  std::vector<FieldError> errors;
  RunConfig c;
  JsonReader r(j, "", errors);
  if (!r.ok()) raise_if(errors);
  r.reject_unknown({"input_path", "example", "parse", "spec", "trims", "algorithms", "gbm", "chosen", "sensitivity",
                    "output", "workers"});

  const bool has_input = r.has("input_path"), has_example = r.has("example");
  if (has_input == has_example) r.error("input_path", "exactly one of input_path and example must be given");
  if (const auto p = r.string("input_path", false)) {
    fs::path path(*p);
    c.input_path = path.is_absolute() ? path : base_dir / path;
  }
  if (const json* ex = r.object("example", false)) {
    JsonReader e(*ex, "example", errors);
    e.reject_unknown({"seed", "n_per_group"});
    ExampleSource src;
    src.seed = static_cast<std::uint64_t>(e.integer("seed", false, 0, LLONG_MAX).value_or(static_cast<long long>(src.seed)));
    src.n_per_group = static_cast<std::size_t>(e.integer("n_per_group", false, 50, 1000000).value_or(2000));
    c.example = src;
  }
  if (r.has("parse")) collect(errors, [&] { c.parse = csv_options_from_json(j["parse"], "parse"); });
  if (r.object("spec", true)) collect(errors, [&] { c.spec = spec_from_json(j["spec"], "spec"); });
  if (r.has("trims")) collect(errors, [&] { c.trims = trims_from_json(j["trims"], "trims"); });
  if (r.has("algorithms"))
    collect(errors, [&] { c.engines.algorithms = algorithms_from_json(j["algorithms"], "algorithms"); });
  if (r.has("gbm")) collect(errors, [&] { c.engines.gbm = gbm_params_from_json(j["gbm"], "gbm"); });
  c.chosen = r.string("chosen", false).value_or("auto");
  if (c.chosen != "auto") {
    try {
      parse_algorithm(c.chosen);
    } catch (const Error& e) {
      r.error("chosen", e.what());
    }
  }
  if (const json* s = r.object("sensitivity", false)) {
    JsonReader sr(*s, "sensitivity", errors);
    sr.reject_unknown({"enabled", "grid", "draws", "seed"});
    c.sensitivity.enabled = sr.boolean("enabled", false).value_or(true);
    c.sensitivity.request.draws = static_cast<std::size_t>(sr.integer("draws", false, 1, 100000).value_or(20));
    c.sensitivity.request.seed = static_cast<std::uint64_t>(sr.integer("seed", false, 0, LLONG_MAX).value_or(1));
    if (sr.has("grid")) collect(errors, [&] {
        c.sensitivity.request.grid = grid_spec_from_json((*s)["grid"], "sensitivity.grid");
      });
    try {
      validate_grid_spec(c.sensitivity.request.grid);
    } catch (const ValidationError& e) {
      for (const auto& f : e.errors()) errors.push_back({"sensitivity.grid." + f.field, f.message});
    }
  }
  if (const auto o = r.string("output", false)) {
    fs::path path(*o);
    c.output = path.is_absolute() ? path : base_dir / path;
  } else {
    c.output = base_dir / c.output;
  }
  c.workers = static_cast<std::size_t>(r.integer("workers", false, 1, 256).value_or(1));
  raise_if(errors);
  return c;
}

void override_seed(RunConfig& config, std::uint64_t seed) {
  if (config.example) config.example->seed = seed;
  config.sensitivity.request.seed = seed;
}

RunError::RunError(RunPhase phase, const Error& cause)
    : std::runtime_error(cause.what()), phase_(phase), kind_(cause.kind()), fields_(fields_of(cause)) {}

int exit_code(RunPhase phase) {
  switch (phase) {
    case RunPhase::Config: return 2;
    case RunPhase::Data: return 3;
    case RunPhase::Numeric: return 4;
  }
  return 1;
}

RunResult run_pipeline(const RunConfig& config, const RunLog& log) {
  const auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  const auto config_kind = [](ErrorKind k) {
    return k == ErrorKind::Validation || k == ErrorKind::Name || k == ErrorKind::Input || k == ErrorKind::NotFound;
  };
  // Runs one step and tags failures with the phase they belong to.
  const auto step = [&](RunPhase phase, auto&& f) {
    try {
      return f();
    } catch (const Error& e) {
      throw RunError(config_kind(e.kind()) ? RunPhase::Config : phase, e);
    }
  };

  const json echo = config_echo(config);
  std::uint64_t hash = fnv1a64(echo.dump());

  Session session("cli", config.workers);
  step(RunPhase::Data, [&] {
    if (config.input_path) {
      const std::string bytes = read_file(*config.input_path);
      hash = fnv1a64(bytes, hash);
      say("loading " + config.input_path->filename().string());
      session.load_data(load_csv(bytes, config.parse), config.input_path->filename().string());
    } else {
      const ExampleSource& ex = *config.example;
      say("generating example data");
      session.load_data(generate_example_dataset(ex.seed, ex.n_per_group),
                        "example dataset (seed " + std::to_string(ex.seed) + ", " + std::to_string(ex.n_per_group) +
                            " per group)");
    }
  });
  step(RunPhase::Data, [&] {
    try {
      session.set_spec(config.spec);
    } catch (const ValidationError& e) {
      std::vector<FieldError> prefixed;
      for (const auto& f : e.errors())
        prefixed.push_back({f.field.rfind("spec", 0) == 0 ? f.field : "spec." + f.field, f.message});
      throw ValidationError(std::move(prefixed));
    }
    if (!config.trims.empty()) session.set_trims(config.trims);
  });
  say("fitting weights");
  step(RunPhase::Numeric, [&] { session.compute_weights(config.engines); });
  say("estimating effect");
  step(RunPhase::Numeric, [&] { session.estimate(config.chosen); });
  if (config.sensitivity.enabled) {
    say("running sensitivity grid");
    step(RunPhase::Numeric, [&] {
      session.start_sensitivity(config.sensitivity.request);
      session.wait_sensitivity();
      const SensitivityJobView job = session.sensitivity_job();
      if (job.status != JobStatus::Done) throw Error(ErrorKind::Infeasible, "sensitivity analysis failed: " + job.error);
    });
  }

  RunResult result;
  step(RunPhase::Config, [&] {
    std::error_code ec;
    fs::create_directories(config.output, ec);
    if (ec) throw ValidationError(std::vector<FieldError>{{"output", "cannot create " + config.output.string()}});
  });
  json artifacts = json::array();
  const auto emit = [&](const std::string& name, const std::string& bytes) {
    step(RunPhase::Config, [&] { write_file(config.output / name, bytes); });
    artifacts.push_back({{"file", name}, {"fnv1a64", hex64(fnv1a64(bytes))}, {"bytes", bytes.size()}});
    result.files.push_back(config.output / name);
  };

  session.read([&](const SessionState& s) {
    emit("report.html", render_report(s));
    emit("data_and_weights.csv", export_data_and_weights(*s.dataset, *s.design, s.weight_sets, Separator::Comma));
    emit("balance.json", to_json(*s.balance).dump(2) + "\n");
    emit("balance_smd.csv", metric_csv(*s.balance, true));
    emit("balance_ks.csv", metric_csv(*s.balance, false));
    emit("balance_ess.csv", ess_csv(*s.balance));
    emit("effect.json", to_json(*s.effect).dump(2) + "\n");
    emit("effect.csv", effect_csv(*s.effect));
    if (s.sensitivity) emit("sensitivity.json", to_json(*s.sensitivity).dump(2) + "\n");

    const CoefficientRow& t = s.effect->treatment_row();
    json failures = json::array();
    for (const auto& f : s.engine_failures) failures.push_back(to_json(f));
    json seeds = json::object();
    if (config.example) seeds["example"] = config.example->seed;
    if (config.sensitivity.enabled) seeds["sensitivity"] = config.sensitivity.request.seed;
    result.manifest = {{"tool", "cw_run"},
                       {"version", kVersion},
                       {"inputs_hash", hex64(hash)},
                       {"config", echo},
                       {"seeds", seeds},
                       {"rows", {{"loaded", s.dataset->n_rows()},
                                 {"missing_dropped", s.trims.missing_dropped},
                                 {"trimmed", s.trims.rows_before - s.trims.rows_after},
                                 {"analyzed", s.design->n()}}},
                       {"recommended_algorithm", s.balance->recommended},
                       {"chosen_algorithm", s.chosen_algorithm},
                       {"effect", {{"term", t.term}, {"estimate", t.estimate}, {"se", t.se}, {"p", t.p}}},
                       {"failures", failures},
                       {"artifacts", artifacts}};
    return 0;
  });
  step(RunPhase::Config, [&] { write_file(config.output / "manifest.json", result.manifest.dump(2) + "\n"); });
  result.files.push_back(config.output / "manifest.json");
  return result;
}

}  // namespace cw
