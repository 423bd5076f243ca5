#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cw/json_io.hpp"
#include "cw/session.hpp"

namespace cw {

struct ExampleSource {
  std::uint64_t seed = 20240601;
  std::size_t n_per_group = 2000;
};

struct SensitivityConfig {
  bool enabled = false;
  SensitivityRequest request;
};

// Batch run description. Exactly one of input_path and example is set.
struct RunConfig {
  std::optional<std::filesystem::path> input_path;
  std::optional<ExampleSource> example;
  CsvOptions parse;
  AnalysisSpec spec;
  std::vector<TrimRule> trims;
  EngineOptions engines;
  std::string chosen = "auto";
  SensitivityConfig sensitivity;
  std::filesystem::path output = "cw_output";
  std::size_t workers = 1;
};

// Relative input paths resolve against base_dir. Every problem is reported as
// a FieldError keyed by its config path.
RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir);

// Applies a seed override to every seed the run uses.
void override_seed(RunConfig& config, std::uint64_t seed);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

enum class RunPhase { Config, Data, Numeric };

// Error annotated with the pipeline phase that raised it.
class RunError : public std::runtime_error {
 public:
  RunError(RunPhase phase, const Error& cause);
  RunPhase phase() const noexcept { return phase_; }
  ErrorKind kind() const noexcept { return kind_; }
  const std::vector<FieldError>& fields() const noexcept { return fields_; }

 private:
  RunPhase phase_;
  ErrorKind kind_;
  std::vector<FieldError> fields_;
};

int exit_code(RunPhase phase);

struct RunResult {
  json manifest;
  std::vector<std::filesystem::path> files;  // written artifacts, manifest last
};

using RunLog = std::function<void(const std::string&)>;

// Executes the whole workflow and writes the artifacts into config.output.
// Throws RunError.
RunResult run_pipeline(const RunConfig& config, const RunLog& log = {});

}  // namespace cw
