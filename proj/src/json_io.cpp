#include "cw/json_io.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <limits>

namespace cw {

// ---- JsonReader -----------------------------------------------------------

JsonReader::JsonReader(const json& object, std::string path, std::vector<FieldError>& errors)
    : path_(std::move(path)), errors_(&errors) {
  if (object.is_object())
    object_ = &object;
  else
    errors.push_back({path_.empty() ? "(root)" : path_, "must be an object"});
}

bool JsonReader::has(const char* key) const { return object_ != nullptr && object_->contains(key); }

std::string JsonReader::path(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

void JsonReader::error(const char* key, std::string message) { errors_->push_back({path(key), std::move(message)}); }

std::optional<std::string> JsonReader::string(const char* key, bool required) {
  if (!has(key) || (*object_)[key].is_null()) {
    if (required && object_ != nullptr) error(key, "is required");
    return std::nullopt;
  }
  const json& v = (*object_)[key];
  if (v.is_string()) return v.get<std::string>();
  // Labels such as 0/1 are commonly written as JSON numbers.
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  error(key, "must be a string");
  return std::nullopt;
}

std::optional<double> JsonReader::number(const char* key, bool required) {
  if (!has(key) || (*object_)[key].is_null()) {
    if (required && object_ != nullptr) error(key, "is required");
    return std::nullopt;
  }
  const json& v = (*object_)[key];
  if (!v.is_number()) {
    error(key, "must be a number");
    return std::nullopt;
  }
  return v.get<double>();
}

std::optional<long long> JsonReader::integer(const char* key, bool required, long long min, long long max) {
  if (!has(key) || (*object_)[key].is_null()) {
    if (required && object_ != nullptr) error(key, "is required");
    return std::nullopt;
  }
  const json& v = (*object_)[key];
  if (!v.is_number_integer()) {
    error(key, "must be an integer");
    return std::nullopt;
  }
  const bool huge = v.is_number_unsigned() && v.get<unsigned long long>() > static_cast<unsigned long long>(LLONG_MAX);
  const long long x = huge ? LLONG_MAX : v.get<long long>();
  if (huge || x < min || x > max) {
    error(key, "must be between " + std::to_string(min) + " and " + std::to_string(max));
    return std::nullopt;
  }
  return x;
}

std::optional<bool> JsonReader::boolean(const char* key, bool required) {
  if (!has(key) || (*object_)[key].is_null()) {
    if (required && object_ != nullptr) error(key, "is required");
    return std::nullopt;
  }
  const json& v = (*object_)[key];
  if (!v.is_boolean()) {
    error(key, "must be true or false");
    return std::nullopt;
  }
  return v.get<bool>();
}

std::optional<std::vector<std::string>> JsonReader::strings(const char* key, bool required) {
  const json* a = array(key, required);
  if (a == nullptr) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& v : *a) {
    if (v.is_string())
      out.push_back(v.get<std::string>());
    else if (v.is_number_integer())
      out.push_back(std::to_string(v.get<long long>()));
    else {
      error(key, "must be an array of strings");
      return std::nullopt;
    }
  }
  return out;
}

std::optional<std::vector<double>> JsonReader::numbers(const char* key, bool required) {
  const json* a = array(key, required);
  if (a == nullptr) return std::nullopt;
  std::vector<double> out;
  for (const auto& v : *a) {
    if (!v.is_number()) {
      error(key, "must be an array of numbers");
      return std::nullopt;
    }
    out.push_back(v.get<double>());
  }
  return out;
}

const json* JsonReader::object(const char* key, bool required) {
  if (!has(key) || (*object_)[key].is_null()) {
    if (required && object_ != nullptr) error(key, "is required");
    return nullptr;
  }
  const json& v = (*object_)[key];
  if (!v.is_object()) {
    error(key, "must be an object");
    return nullptr;
  }
  return &v;
}

const json* JsonReader::array(const char* key, bool required) {
  if (!has(key) || (*object_)[key].is_null()) {
    if (required && object_ != nullptr) error(key, "is required");
    return nullptr;
  }
  const json& v = (*object_)[key];
  if (!v.is_array()) {
    error(key, "must be an array");
    return nullptr;
  }
  return &v;
}

void JsonReader::reject_unknown(std::initializer_list<const char*> known) {
  if (object_ == nullptr) return;
  for (const auto& [k, v] : object_->items()) {
    bool found = false;
    for (const char* name : known)
      if (k == name) found = true;
    if (!found) errors_->push_back({path(k.c_str()), "unknown field"});
  }
}

void raise_if(std::vector<FieldError>& errors) {
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

// ---- data -----------------------------------------------------------------

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const NumericSummary& s) {
  return {{"name", s.name},
          {"n", s.n},
          {"mean", optional_number(s.mean)},
          {"sd", optional_number(s.sd)},
          {"median", optional_number(s.median)},
          {"min", optional_number(s.min)},
          {"max", optional_number(s.max)}};
}

json to_json(const SummaryTable& table) {
  json numeric = json::array();
  for (const auto& s : table.numeric) numeric.push_back(to_json(s));
  json categorical = json::array();
  for (const auto& c : table.categorical) {
    json counts = json::array();
    for (const auto& [level, count] : c.counts) counts.push_back({{"level", level}, {"count", count}});
    categorical.push_back({{"name", c.name}, {"counts", counts}, {"missing", c.missing}});
  }
  return {{"n_rows", table.n_rows}, {"numeric", numeric}, {"categorical", categorical}};
}

json to_json(const GroupedSummary& grouped) {
  json groups = json::array();
  for (const auto& [value, table] : grouped.groups) groups.push_back({{"group", value}, {"summary", to_json(table)}});
  return {{"group_by", grouped.group_by}, {"groups", groups}};
}

json head_preview(const Dataset& data, std::size_t rows) {
  json columns = json::array();
  for (const auto& c : data.columns())
    columns.push_back({{"name", c.name()}, {"type", c.is_numeric() ? "numeric" : "categorical"}});
  json out_rows = json::array();
  const std::size_t n = std::min(rows, data.n_rows());
  for (std::size_t r = 0; r < n; ++r) {
    json row = json::array();
    for (const auto& c : data.columns()) {
      const auto text = c.text(r);
      row.push_back(text ? json(*text) : json(nullptr));
    }
    out_rows.push_back(row);
  }
  return {{"columns", columns}, {"rows", out_rows}, {"n_rows", data.n_rows()}};
}

// ---- spec -----------------------------------------------------------------

json to_json(const AnalysisSpec& spec) {
  json cats = json::array();
  for (const auto& c : spec.categorical_confounders) cats.push_back({{"name", c.name}, {"reference_level", c.reference_level}});
  return {{"treatment_var", spec.treatment_var},
          {"control_label", spec.control_label},
          {"treatment_label", spec.treatment_label},
          {"outcome_var", spec.outcome_var},
          {"numeric_confounders", spec.numeric_confounders},
          {"categorical_confounders", cats},
          {"estimand", to_string(spec.estimand)}};
}

AnalysisSpec spec_from_json(const json& j, const std::string& path) {
  std::vector<FieldError> errors;
  JsonReader r(j, path, errors);
  AnalysisSpec spec;
  if (r.ok()) {
    r.reject_unknown({"treatment_var", "control_label", "treatment_label", "outcome_var", "numeric_confounders",
                      "categorical_confounders", "estimand"});
    spec.treatment_var = r.string("treatment_var", true).value_or("");
    spec.control_label = r.string("control_label", true).value_or("");
    spec.treatment_label = r.string("treatment_label", true).value_or("");
    spec.outcome_var = r.string("outcome_var", true).value_or("");
    spec.numeric_confounders = r.strings("numeric_confounders", false).value_or(std::vector<std::string>{});
    if (const json* cats = r.array("categorical_confounders", false)) {
      for (std::size_t i = 0; i < cats->size(); ++i) {
        JsonReader c((*cats)[i], r.path("categorical_confounders") + "[" + std::to_string(i) + "]", errors);
        if (!c.ok()) continue;
        CategoricalConfounder cc;
        cc.name = c.string("name", true).value_or("");
        cc.reference_level = c.string("reference_level", true).value_or("");
        spec.categorical_confounders.push_back(cc);
      }
    }
    if (const auto e = r.string("estimand", false)) {
      try {
        spec.estimand = parse_estimand(*e);
      } catch (const Error& ex) {
        r.error("estimand", ex.what());
      }
    }
  }
  raise_if(errors);
  return spec;
}

json to_json(const ModelFormulas& f) {
  return {{"treatment_model", f.treatment_model},
          {"outcome_model", f.outcome_model},
          {"dummy_columns", f.dummy_columns},
          {"reference_levels", f.reference_levels},
          {"estimand", f.estimand_text}};
}

CsvOptions csv_options_from_json(const json& j, const std::string& path) {
  std::vector<FieldError> errors;
  JsonReader r(j, path, errors);
  CsvOptions options;
  if (r.ok()) {
    r.reject_unknown({"header", "separator", "quote"});
    options.header = r.boolean("header", false).value_or(true);
    if (const auto s = r.string("separator", false)) {
      try {
        options.separator = parse_separator(*s);
      } catch (const Error& e) {
        r.error("separator", e.what());
      }
    }
    if (const auto q = r.string("quote", false)) {
      try {
        options.quote = parse_quote(*q);
      } catch (const Error& e) {
        r.error("quote", e.what());
      }
    }
  }
  raise_if(errors);
  return options;
}

// ---- overlap --------------------------------------------------------------

json to_json(const TrimRule& rule) {
  return {{"confounder", rule.confounder},
          {"lower_cut", optional_number(rule.lower_cut)},
          {"upper_cut", optional_number(rule.upper_cut)}};
}

std::vector<TrimRule> trims_from_json(const json& j, const std::string& path) {
  std::vector<FieldError> errors;
  std::vector<TrimRule> rules;
  if (!j.is_array()) {
    errors.push_back({path, "must be an array"});
  } else {
    for (std::size_t i = 0; i < j.size(); ++i) {
      JsonReader r(j[i], path + "[" + std::to_string(i) + "]", errors);
      if (!r.ok()) continue;
      r.reject_unknown({"confounder", "lower_cut", "upper_cut"});
      TrimRule rule;
      rule.confounder = r.string("confounder", true).value_or("");
      rule.lower_cut = r.number("lower_cut", false);
      rule.upper_cut = r.number("upper_cut", false);
      try {
        validate_trim_rule(rule);
      } catch (const Error& e) {
        errors.push_back({r.path("confounder"), e.what()});
      }
      rules.push_back(rule);
    }
  }
  raise_if(errors);
  return rules;
}

json to_json(const DensityCurve& curve) {
  return {{"confounder", curve.confounder},
          {"group", curve.group},
          {"bandwidth", curve.bandwidth},
          {"x", curve.grid},
          {"density", curve.density}};
}

json to_json(const GroupDensities& d) {
  return {{"confounder", d.confounder},
          {"control", d.control ? to_json(*d.control) : json(nullptr)},
          {"treated", d.treated ? to_json(*d.treated) : json(nullptr)}};
}

json to_json(const OverlapFlag& f) {
  return {{"confounder", f.confounder},
          {"control_range", {f.control_low, f.control_high}},
          {"treated_range", {f.treated_low, f.treated_high}},
          {"flagged", f.flagged}};
}

// ---- weights --------------------------------------------------------------

json to_json(const FitDiagnostics& d) {
  json trace = json::array();
  for (const auto& [it, value] : d.trace) trace.push_back({it, value});
  return {{"converged", d.converged},
          {"iterations", d.iterations},
          {"objective", d.objective},
          {"chosen_gbm_trees", d.chosen_gbm_trees ? json(*d.chosen_gbm_trees) : json(nullptr)},
          {"warnings", d.warnings},
          {"dropped_columns", d.dropped_columns},
          {"trace", trace}};
}

json to_json(const WeightSet& ws, bool include_weights) {
  json j = {{"algorithm", to_string(ws.algorithm)},
            {"estimand", to_string(ws.estimand)},
            {"diagnostics", to_json(ws.diagnostics)}};
  if (include_weights) j["weights"] = std::vector<double>(ws.w.data(), ws.w.data() + ws.w.size());
  return j;
}

WeightSet weight_set_from_json(const json& j, const std::string& path) {
  std::vector<FieldError> errors;
  JsonReader r(j, path, errors);
  WeightSet ws;
  if (r.ok()) {
    try {
      ws.algorithm = parse_algorithm(r.string("algorithm", true).value_or(""));
    } catch (const Error& e) {
      r.error("algorithm", e.what());
    }
    try {
      ws.estimand = parse_estimand(r.string("estimand", true).value_or("ATT"));
    } catch (const Error& e) {
      r.error("estimand", e.what());
    }
    const auto w = r.numbers("weights", true).value_or(std::vector<double>{});
    ws.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    if (const json* d = r.object("diagnostics", false)) {
      JsonReader dr(*d, r.path("diagnostics"), errors);
      ws.diagnostics.converged = dr.boolean("converged", false).value_or(false);
      ws.diagnostics.iterations = static_cast<int>(dr.integer("iterations", false, 0, INT32_MAX).value_or(0));
      ws.diagnostics.objective = dr.number("objective", false).value_or(0.0);
      if (const auto t = dr.integer("chosen_gbm_trees", false, 0, INT32_MAX)) ws.diagnostics.chosen_gbm_trees = static_cast<int>(*t);
      ws.diagnostics.warnings = dr.strings("warnings", false).value_or(std::vector<std::string>{});
      ws.diagnostics.dropped_columns = dr.strings("dropped_columns", false).value_or(std::vector<std::string>{});
      if (const json* tr = dr.array("trace", false))
        for (const auto& p : *tr)
          if (p.is_array() && p.size() == 2 && p[0].is_number_integer() && p[1].is_number())
            ws.diagnostics.trace.emplace_back(p[0].get<int>(), p[1].get<double>());
    }
  }
  raise_if(errors);
  return ws;
}

json to_json(const EngineFailure& f) {
  return {{"algorithm", to_string(f.algorithm)}, {"error", f.kind}, {"message", f.message}};
}

GbmParams gbm_params_from_json(const json& j, const std::string& path) {
  std::vector<FieldError> errors;
  JsonReader r(j, path, errors);
  GbmParams p;
  if (r.ok()) {
    r.reject_unknown({"max_trees", "shrinkage", "depth", "eval_stride", "min_leaf"});
    p.max_trees = static_cast<int>(r.integer("max_trees", false, 0, 100000).value_or(p.max_trees));
    p.shrinkage = r.number("shrinkage", false).value_or(p.shrinkage);
    p.depth = static_cast<int>(r.integer("depth", false, 1, 10).value_or(p.depth));
    p.eval_stride = static_cast<int>(r.integer("eval_stride", false, 1, 100000).value_or(p.eval_stride));
    p.min_leaf = static_cast<int>(r.integer("min_leaf", false, 1, 100000).value_or(p.min_leaf));
    if (!(p.shrinkage > 0 && p.shrinkage <= 1)) r.error("shrinkage", "must be in (0, 1]");
  }
  raise_if(errors);
  return p;
}

std::vector<Algorithm> algorithms_from_json(const json& j, const std::string& path) {
  std::vector<FieldError> errors;
  std::vector<Algorithm> out;
  if (!j.is_array() || j.empty()) {
    errors.push_back({path, "must be a non-empty array of algorithm ids"});
  } else {
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      if (!j[i].is_string()) {
        errors.push_back({p, "must be a string"});
        continue;
      }
      try {
        const Algorithm a = parse_algorithm(j[i].get<std::string>());
        if (std::find(out.begin(), out.end(), a) != out.end())
          errors.push_back({p, "algorithm listed twice"});
        else
          out.push_back(a);
      } catch (const Error& e) {
        errors.push_back({p, e.what()});
      }
    }
  }
  raise_if(errors);
  return out;
}

// ---- balance and outcome --------------------------------------------------

json to_json(const AlgorithmBalance& c) {
  return {{"id", c.id},
          {"smd", c.smd},
          {"ks", c.ks},
          {"mean_smd", c.mean_smd},
          {"max_smd", c.max_smd},
          {"mean_ks", c.mean_ks},
          {"max_ks", c.max_ks},
          {"ess",
           {{"total", c.ess.total},
            {"control", c.ess.control},
            {"treated", c.ess.treated},
            {"n", c.ess.n},
            {"percent", c.ess.percent()},
            {"percent_text", c.ess.percent_text()}}}};
}

json to_json(const BalanceReport& report) {
  json columns = json::array();
  for (const auto& c : report.columns) columns.push_back(to_json(c));
  return {{"confounders", report.confounders},
          {"columns", columns},
          {"recommended", report.recommended},
          {"rationale", report.rationale},
          {"balanced", report.balanced},
          {"warnings", report.warnings}};
}

json to_json(const EffectEstimate& est) {
  json rows = json::array();
  for (const auto& r : est.rows)
    rows.push_back({{"term", r.term}, {"estimate", r.estimate}, {"se", r.se}, {"t", r.t}, {"p", r.p}});
  return {{"rows", rows},
          {"effect", est.effect},
          {"algorithm", est.algorithm_used},
          {"estimand", to_string(est.estimand)},
          {"n_used", est.n_used}};
}

// ---- sensitivity ----------------------------------------------------------

SensitivityGridSpec grid_spec_from_json(const json& j, const std::string& path) {
  std::vector<FieldError> errors;
  JsonReader r(j, path, errors);
  SensitivityGridSpec spec = SensitivityGridSpec::defaults();
  if (r.ok()) {
    r.reject_unknown({"es_axis", "rho_axis", "es_min", "es_max", "es_points", "rho_min", "rho_max", "rho_points"});
    if (r.has("es_axis")) {
      spec.es_axis = r.numbers("es_axis", true).value_or(std::vector<double>{});
    } else if (r.has("es_min") || r.has("es_max") || r.has("es_points")) {
      const double lo = r.number("es_min", true).value_or(0);
      const double hi = r.number("es_max", true).value_or(0);
      const auto k = r.integer("es_points", true, 1, 101).value_or(1);
      spec.es_axis = SensitivityGridSpec::linspace(lo, hi, static_cast<std::size_t>(k), 0, 0, 1).es_axis;
    }
    if (r.has("rho_axis")) {
      spec.rho_axis = r.numbers("rho_axis", true).value_or(std::vector<double>{});
    } else if (r.has("rho_min") || r.has("rho_max") || r.has("rho_points")) {
      const double lo = r.number("rho_min", true).value_or(0);
      const double hi = r.number("rho_max", true).value_or(0);
      const auto k = r.integer("rho_points", true, 1, 101).value_or(1);
      spec.rho_axis = SensitivityGridSpec::linspace(0, 0, 1, lo, hi, static_cast<std::size_t>(k)).rho_axis;
    }
  }
  raise_if(errors);
  validate_grid_spec(spec);
  return spec;
}

json to_json(const SensitivityGrid& g) {
  json points = json::array();
  for (const auto& p : g.observed_points) points.push_back({{"name", p.name}, {"es", p.es}, {"rho", p.rho}});
  // NaN cells are serialized as null; `missing` marks them explicitly.
  return {{"es_axis", g.es_axis},
          {"rho_axis", g.rho_axis},
          {"shape", {g.rho_axis.size(), g.es_axis.size()}},
          {"effect", g.effect},
          {"pvalue", g.pvalue},
          {"missing", g.missing},
          {"observed_points", points},
          {"baseline", {{"effect", g.baseline_effect}, {"p", g.baseline_p}}},
          {"draws_per_cell", g.draws_per_cell},
          {"algorithm", g.algorithm},
          {"seed", g.seed},
          {"p_levels", {0.05, 0.01}}};
}

SensitivityGrid sensitivity_grid_from_json(const json& j, const std::string& path) {
  std::vector<FieldError> errors;
  JsonReader r(j, path, errors);
  SensitivityGrid g;
  if (r.ok()) {
    g.es_axis = r.numbers("es_axis", true).value_or(std::vector<double>{});
    g.rho_axis = r.numbers("rho_axis", true).value_or(std::vector<double>{});
    const std::size_t cells = g.es_axis.size() * g.rho_axis.size();
    const auto read_surface = [&](const char* key, std::vector<double>& out) {
      const json* a = r.array(key, true);
      if (a == nullptr) return;
      for (const auto& v : *a) out.push_back(v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN());
      if (out.size() != cells) r.error(key, "does not match the axes");
    };
    read_surface("effect", g.effect);
    read_surface("pvalue", g.pvalue);
    if (const json* m = r.array("missing", true)) {
      for (const auto& v : *m) g.missing.push_back(v.is_boolean() && v.get<bool>());
      if (g.missing.size() != cells) r.error("missing", "does not match the axes");
    }
    if (const json* pts = r.array("observed_points", false))
      for (const auto& p : *pts)
        if (p.is_object() && p.contains("name") && p.contains("es") && p.contains("rho"))
          g.observed_points.push_back({p["name"].get<std::string>(), p["es"].get<double>(), p["rho"].get<double>()});
    if (const json* b = r.object("baseline", true)) {
      JsonReader br(*b, r.path("baseline"), errors);
      g.baseline_effect = br.number("effect", true).value_or(0);
      g.baseline_p = br.number("p", true).value_or(1);
    }
    g.draws_per_cell = static_cast<std::size_t>(r.integer("draws_per_cell", true, 1, 1000000).value_or(1));
    g.algorithm = r.string("algorithm", false).value_or("");
    if (r.has("seed") && j["seed"].is_number_unsigned()) g.seed = j["seed"].get<std::uint64_t>();
  }
  raise_if(errors);
  return g;
}

json error_json(const Error& error) {
  json j = {{"error", to_string(error.kind())}, {"message", error.what()}};
  if (const auto* v = dynamic_cast<const ValidationError*>(&error)) {
    json fields = json::array();
    for (const auto& f : v->errors()) fields.push_back({{"field", f.field}, {"message", f.message}});
    j["fields"] = fields;
  }
  if (const auto* p = dynamic_cast<const ParseError*>(&error)) j["row"] = p->row();
  return j;
}

}  // namespace cw
