#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "cw/balance.hpp"
#include "cw/dataset.hpp"
#include "cw/design.hpp"
#include "cw/engines.hpp"
#include "cw/error.hpp"
#include "cw/json_io.hpp"
#include "cw/outcome.hpp"
#include "cw/overlap.hpp"
#include "cw/sensitivity.hpp"

namespace cw {

enum class Stage { Empty, DataLoaded, SpecSet, Trimmed, Weighted, Estimated, SensitivityDone };

const char* to_string(Stage s);

// Raised when an operation needs a later stage than the session has reached.
class StageError : public Error {
 public:
  StageError(Stage required, Stage current);
  Stage required() const noexcept { return required_; }
  Stage current() const noexcept { return current_; }

 private:
  Stage required_;
  Stage current_;
};

struct TrimLog {
  std::vector<TrimRule> rules;
  std::size_t rows_before = 0;  // complete cases before trimming
  std::size_t rows_after = 0;
  std::size_t missing_dropped = 0;
  std::vector<std::size_t> removed_row_ids;
};

// Every artifact a session can hold. Later artifacts are only present when
// the earlier ones they were computed from are unchanged.
struct SessionState {
  Stage stage = Stage::Empty;
  std::optional<Dataset> dataset;
  std::string data_source;
  std::optional<AnalysisSpec> spec;
  std::optional<DesignMatrix> encoded;  // after complete-case filtering
  std::optional<DesignMatrix> design;   // after trims
  TrimLog trims;
  std::vector<WeightSet> weight_sets;
  std::vector<EngineFailure> engine_failures;
  std::optional<BalanceReport> balance;
  std::string chosen_algorithm;
  std::optional<EffectEstimate> effect;
  std::optional<SensitivityGrid> sensitivity;

  const WeightSet& weights(std::string_view algorithm) const;
};

enum class JobStatus { None, Running, Done, Failed, Cancelled };

const char* to_string(JobStatus s);

struct SensitivityJobView {
  JobStatus status = JobStatus::None;
  std::uint64_t job_id = 0;
  std::size_t cells_done = 0;
  std::size_t cells_total = 0;
  std::string error;
};

struct SensitivityRequest {
  SensitivityGridSpec grid = SensitivityGridSpec::defaults();
  std::size_t draws = 20;
  std::uint64_t seed = 1;
};

// One analysis. Mutations are serialized by an exclusive lock; reads share
// it. Any change to data, spec or trims drops every later artifact and
// cancels a running sensitivity job.
class Session {
 public:
  explicit Session(std::string id, std::size_t workers = 1);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const noexcept { return id_; }

  void load_data(Dataset data, std::string source);
  ModelFormulas set_spec(const AnalysisSpec& spec);
  void set_trims(const std::vector<TrimRule>& rules);
  void compute_weights(const EngineOptions& options);
  // "auto" picks the balance recommendation.
  EffectEstimate estimate(const std::string& algorithm);
  std::uint64_t start_sensitivity(const SensitivityRequest& request);
  void cancel_sensitivity();
  SensitivityJobView sensitivity_job() const;
  // Blocks until no job is running.
  void wait_sensitivity() const;

  // Runs `f` with a consistent read-only view.
  template <typename F>
  auto read(F&& f) const {
    std::shared_lock lock(mutex_);
    return f(state_);
  }

  Stage stage() const;
  json archive() const;
  void restore(const json& archive);

  std::chrono::system_clock::time_point created_at() const noexcept { return created_; }
  std::chrono::system_clock::time_point last_touched() const;

  static void require(const SessionState& state, Stage stage);

 private:
  void reset_after(Stage stage);  // caller holds the write lock
  void stop_job();                // caller holds the write lock
  void touch();

  std::string id_;
  std::size_t workers_;
  mutable std::shared_mutex mutex_;
  SessionState state_;
  std::chrono::system_clock::time_point created_;
  std::atomic<std::int64_t> touched_{0};

  struct Job {
    std::uint64_t id = 0;
    std::uint64_t generation = 0;
    std::atomic<bool> cancel{false};
    std::atomic<std::size_t> done{0};
    std::atomic<std::size_t> total{0};
    std::atomic<JobStatus> status{JobStatus::Running};
    std::string error;
    std::jthread thread;
  };
  std::shared_ptr<Job> job_;
  std::uint64_t generation_ = 0;
  std::uint64_t next_job_ = 1;
};

class SessionManager {
 public:
  explicit SessionManager(std::size_t workers = 1) : workers_(workers) {}

  std::shared_ptr<Session> create();
  std::shared_ptr<Session> get(const std::string& id) const;  // throws not-found
  void remove(const std::string& id);
  std::size_t size() const;
  std::size_t workers() const noexcept { return workers_; }

 private:
  std::size_t workers_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace cw
