#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cw/analysis_spec.hpp"
#include "cw/balance.hpp"
#include "cw/dataset.hpp"
#include "cw/engines.hpp"
#include "cw/error.hpp"
#include "cw/gbm.hpp"
#include "cw/outcome.hpp"
#include "cw/overlap.hpp"
#include "cw/sensitivity.hpp"

namespace cw {

using json = nlohmann::json;

// Reads typed members of a JSON object, recording a FieldError with the full
// member path (e.g. "spec.outcome_var") for every missing or mistyped value.
class JsonReader {
 public:
  JsonReader(const json& object, std::string path, std::vector<FieldError>& errors);

  bool ok() const noexcept { return object_ != nullptr; }
  bool has(const char* key) const;
  std::string path(const char* key) const;

  std::optional<std::string> string(const char* key, bool required);
  std::optional<double> number(const char* key, bool required);
  std::optional<long long> integer(const char* key, bool required, long long min, long long max);
  std::optional<bool> boolean(const char* key, bool required);
  std::optional<std::vector<std::string>> strings(const char* key, bool required);
  std::optional<std::vector<double>> numbers(const char* key, bool required);
  // Nested object or array, nullptr when absent or mistyped.
  const json* object(const char* key, bool required);
  const json* array(const char* key, bool required);
  void error(const char* key, std::string message);
  // Flags members not in `known`.
  void reject_unknown(std::initializer_list<const char*> known);

 private:
  const json* object_ = nullptr;
  std::string path_;
  std::vector<FieldError>* errors_;
};

// Throws ValidationError when errors is non-empty.
void raise_if(std::vector<FieldError>& errors);

json to_json(const NumericSummary& s);
json to_json(const SummaryTable& table);
json to_json(const GroupedSummary& grouped);
// First `rows` rows of the dataset as text cells (null for missing).
json head_preview(const Dataset& data, std::size_t rows);

json to_json(const AnalysisSpec& spec);
AnalysisSpec spec_from_json(const json& j, const std::string& path);
json to_json(const ModelFormulas& formulas);

CsvOptions csv_options_from_json(const json& j, const std::string& path);

json to_json(const TrimRule& rule);
std::vector<TrimRule> trims_from_json(const json& j, const std::string& path);
json to_json(const DensityCurve& curve);
json to_json(const GroupDensities& densities);
json to_json(const OverlapFlag& flag);

json to_json(const FitDiagnostics& diagnostics);
json to_json(const WeightSet& ws, bool include_weights);
WeightSet weight_set_from_json(const json& j, const std::string& path);
json to_json(const EngineFailure& failure);
GbmParams gbm_params_from_json(const json& j, const std::string& path);
std::vector<Algorithm> algorithms_from_json(const json& j, const std::string& path);

json to_json(const AlgorithmBalance& column);
json to_json(const BalanceReport& report);

json to_json(const EffectEstimate& estimate);

SensitivityGridSpec grid_spec_from_json(const json& j, const std::string& path);
json to_json(const SensitivityGrid& grid);
SensitivityGrid sensitivity_grid_from_json(const json& j, const std::string& path);

json error_json(const Error& error);

}  // namespace cw
