#include "cw/session.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "cw/format.hpp"

namespace cw {

const char* to_string(Stage s) {
  switch (s) {
    case Stage::Empty: return "EMPTY";
    case Stage::DataLoaded: return "DATA_LOADED";
    case Stage::SpecSet: return "SPEC_SET";
    case Stage::Trimmed: return "TRIMMED";
    case Stage::Weighted: return "WEIGHTED";
    case Stage::Estimated: return "ESTIMATED";
    case Stage::SensitivityDone: return "SENSITIVITY_DONE";
  }
  return "EMPTY";
}

const char* to_string(JobStatus s) {
  switch (s) {
    case JobStatus::None: return "none";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
    case JobStatus::Cancelled: return "cancelled";
  }
  return "none";
}

StageError::StageError(Stage required, Stage current)
    : Error(ErrorKind::Conflict, std::string("this step requires stage ") + to_string(required) +
                                     " (session is at " + to_string(current) + ")"),
      required_(required),
      current_(current) {}

const WeightSet& SessionState::weights(std::string_view algorithm) const {
  for (const auto& ws : weight_sets)
    if (algorithm == to_string(ws.algorithm)) return ws;
  throw Error(ErrorKind::NotFound, "no weights computed for algorithm '" + std::string(algorithm) + "'");
}

// ---- Session --------------------------------------------------------------

Session::Session(std::string id, std::size_t workers)
    : id_(std::move(id)), workers_(std::max<std::size_t>(1, workers)), created_(std::chrono::system_clock::now()) {
  touch();
}

Session::~Session() {
  std::shared_ptr<Job> job;
  {
    std::unique_lock lock(mutex_);
    ++generation_;
    job = job_;
    if (job) job->cancel = true;
  }
  // Joined without the lock so the worker can finish its final section.
  if (job && job->thread.joinable()) job->thread.join();
}

void Session::touch() {
  touched_ = std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::system_clock::now().time_since_epoch())
                 .count();
}

std::chrono::system_clock::time_point Session::last_touched() const {
  return std::chrono::system_clock::time_point(std::chrono::milliseconds(touched_.load()));
}

Stage Session::stage() const {
  std::shared_lock lock(mutex_);
  return state_.stage;
}

void Session::require(const SessionState& state, Stage stage) {
  if (state.stage < stage) throw StageError(stage, state.stage);
}

void Session::stop_job() {
  ++generation_;
  if (job_ && job_->status == JobStatus::Running) job_->cancel = true;
}

void Session::reset_after(Stage stage) {
  stop_job();
  if (stage < Stage::DataLoaded) {
    state_.dataset.reset();
    state_.data_source.clear();
  }
  if (stage < Stage::SpecSet) {
    state_.spec.reset();
    state_.encoded.reset();
    state_.design.reset();
    state_.trims = TrimLog{};
  }
  if (stage < Stage::Trimmed && stage >= Stage::SpecSet) {
    state_.design = state_.encoded;
    state_.trims.rules.clear();
    state_.trims.removed_row_ids.clear();
    state_.trims.rows_after = state_.trims.rows_before;
  }
  if (stage < Stage::Weighted) {
    state_.weight_sets.clear();
    state_.engine_failures.clear();
    state_.balance.reset();
  }
  if (stage < Stage::Estimated) {
    state_.chosen_algorithm.clear();
    state_.effect.reset();
  }
  state_.sensitivity.reset();
  state_.stage = std::min(state_.stage, stage);
}

void Session::load_data(Dataset data, std::string source) {
  if (data.n_rows() == 0) throw Error(ErrorKind::EmptyData, "dataset has no rows");
  std::unique_lock lock(mutex_);
  touch();
  reset_after(Stage::Empty);
  state_.dataset = std::move(data);
  state_.data_source = std::move(source);
  state_.stage = Stage::DataLoaded;
}

ModelFormulas Session::set_spec(const AnalysisSpec& spec) {
  std::unique_lock lock(mutex_);
  touch();
  require(state_, Stage::DataLoaded);
  DesignMatrix encoded = encode_design(*state_.dataset, spec);
  ModelFormulas formulas = describe_models(spec, *state_.dataset);
  reset_after(Stage::DataLoaded);
  state_.spec = spec;
  state_.trims = TrimLog{};
  state_.trims.rows_before = encoded.n();
  state_.trims.rows_after = encoded.n();
  state_.trims.missing_dropped = encoded.dropped_count;
  state_.design = encoded;
  state_.encoded = std::move(encoded);
  state_.stage = Stage::SpecSet;
  return formulas;
}

void Session::set_trims(const std::vector<TrimRule>& rules) {
  std::unique_lock lock(mutex_);
  touch();
  require(state_, Stage::SpecSet);
  TrimResult result = apply_trims(*state_.encoded, rules);
  reset_after(Stage::SpecSet);
  state_.trims.rules = rules;
  state_.trims.removed_row_ids = std::move(result.removed_row_ids);
  state_.trims.rows_after = result.design.n();
  state_.design = std::move(result.design);
  state_.stage = Stage::Trimmed;
}

void Session::compute_weights(const EngineOptions& options) {
  std::unique_lock lock(mutex_);
  touch();
  require(state_, Stage::SpecSet);
  EngineOptions opts = options;
  opts.workers = workers_;
  EngineRun run = run_engines(*state_.design, opts);
  if (run.weight_sets.empty()) {
    std::string message = "every weighting algorithm failed";
    for (const auto& f : run.failures) message += std::string("; ") + to_string(f.algorithm) + ": " + f.message;
    throw Error(ErrorKind::Degenerate, message);
  }
  BalanceReport report = build_balance_report(*state_.design, run.weight_sets, BalanceOptions{}, workers_);
  reset_after(Stage::Trimmed);
  state_.weight_sets = std::move(run.weight_sets);
  state_.engine_failures = std::move(run.failures);
  state_.balance = std::move(report);
  state_.stage = Stage::Weighted;
}

EffectEstimate Session::estimate(const std::string& algorithm) {
  std::unique_lock lock(mutex_);
  touch();
  require(state_, Stage::Weighted);
  const std::string id = algorithm.empty() || algorithm == "auto" ? state_.balance->recommended : algorithm;
  const WeightSet& ws = state_.weights(id);
  EffectEstimate est = fit_doubly_robust(*state_.design, ws);
  reset_after(Stage::Weighted);
  state_.chosen_algorithm = id;
  state_.effect = est;
  state_.stage = Stage::Estimated;
  return est;
}

std::uint64_t Session::start_sensitivity(const SensitivityRequest& request) {
  validate_grid_spec(request.grid);
  if (request.draws == 0) throw ValidationError(std::vector<FieldError>{{"draws", "must be at least 1"}});

  std::unique_lock lock(mutex_);
  touch();
  require(state_, Stage::Estimated);
  reset_after(Stage::Estimated);

  // Retire a finished job; its worker no longer needs the lock.
  if (job_ && job_->thread.joinable() && job_->status != JobStatus::Running) job_->thread.join();
  if (job_ && job_->status == JobStatus::Running) {
    throw Error(ErrorKind::Conflict, "a sensitivity job is still shutting down; retry shortly");
  }

  auto job = std::make_shared<Job>();
  job->id = next_job_++;
  job->generation = generation_;
  job->total = request.grid.es_axis.size() * request.grid.rho_axis.size();
  auto design = std::make_shared<const DesignMatrix>(*state_.design);
  auto chosen = std::make_shared<const WeightSet>(state_.weights(state_.chosen_algorithm));
  const std::size_t workers = workers_;

  // The worker sees the job through a raw pointer: job_ keeps it alive until
  // the thread is joined, and a self-owning functor could not join itself.
  Job* raw = job.get();
  job->thread = std::jthread([this, job = raw, design, chosen, request, workers] {
    SensitivityControl control;
    control.workers = workers;
    control.cancel = &job->cancel;
    control.progress = [job](std::size_t done, std::size_t) { job->done = std::max(job->done.load(), done); };
    JobStatus final_status = JobStatus::Done;
    try {
      SensitivityGrid grid = sensitivity_grid(*design, *chosen, request.grid, request.draws, request.seed, control);
      std::unique_lock lock(mutex_);
      if (job->generation == generation_ && !job->cancel) {
        state_.sensitivity = std::move(grid);
        state_.stage = Stage::SensitivityDone;
      } else {
        final_status = JobStatus::Cancelled;
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Cancelled || job->cancel) {
        final_status = JobStatus::Cancelled;
      } else {
        job->error = e.what();
        final_status = JobStatus::Failed;
      }
    } catch (const std::exception& e) {
      job->error = e.what();
      final_status = JobStatus::Failed;
    }
    job->status = final_status;
  });
  job_ = job;
  return job->id;
}

void Session::cancel_sensitivity() {
  std::unique_lock lock(mutex_);
  touch();
  if (!job_ || job_->status != JobStatus::Running) throw Error(ErrorKind::Conflict, "no sensitivity job is running");
  job_->cancel = true;
}

SensitivityJobView Session::sensitivity_job() const {
  std::shared_lock lock(mutex_);
  SensitivityJobView view;
  if (!job_) return view;
  view.job_id = job_->id;
  view.status = job_->status;
  view.cells_done = job_->done;
  view.cells_total = job_->total;
  if (view.status == JobStatus::Failed) view.error = job_->error;
  return view;
}

void Session::wait_sensitivity() const {
  while (sensitivity_job().status == JobStatus::Running) std::this_thread::sleep_for(std::chrono::milliseconds(5));
}

// ---- archive --------------------------------------------------------------

namespace {

json dataset_json(const Dataset& data) {
  json cols = json::array();
  for (const auto& c : data.columns()) {
    json values = json::array();
    for (std::size_t r = 0; r < c.size(); ++r) {
      if (c.is_missing(r))
        values.push_back(nullptr);
      else if (c.is_numeric())
        values.push_back(c.number(r));
      else
        values.push_back(*c.text(r));
    }
    cols.push_back({{"name", c.name()}, {"type", c.is_numeric() ? "numeric" : "categorical"}, {"values", values}});
  }
  return cols;
}

Dataset dataset_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError(std::vector<FieldError>{{"dataset", "must be an array of columns"}});
  std::vector<Column> cols;
  for (const auto& c : j) {
    if (!c.is_object() || !c.contains("name") || !c.contains("type") || !c.contains("values") || !c["values"].is_array())
      throw ValidationError(std::vector<FieldError>{{"dataset", "malformed column"}});
    const std::string name = c["name"].get<std::string>();
    if (c["type"] == "numeric") {
      std::vector<double> v;
      for (const auto& x : c["values"]) v.push_back(x.is_number() ? x.get<double>() : std::numeric_limits<double>::quiet_NaN());
      cols.push_back(Column::numeric(name, std::move(v)));
    } else {
      std::vector<std::optional<std::string>> v;
      for (const auto& x : c["values"]) v.push_back(x.is_string() ? std::optional(x.get<std::string>()) : std::nullopt);
      cols.push_back(Column::categorical(name, v));
    }
  }
  return Dataset(std::move(cols));
}

}  // namespace

json Session::archive() const {
  std::shared_lock lock(mutex_);
  json j = {{"format", "cw-session-archive"}, {"version", 1}, {"stage", to_string(state_.stage)}};
  if (state_.dataset) {
    j["dataset"] = dataset_json(*state_.dataset);
    j["data_source"] = state_.data_source;
  }
  if (state_.spec) j["spec"] = to_json(*state_.spec);
  if (state_.stage >= Stage::Trimmed) {
    json rules = json::array();
    for (const auto& r : state_.trims.rules) rules.push_back(to_json(r));
    j["trims"] = rules;
  }
  if (!state_.weight_sets.empty()) {
    json sets = json::array();
    for (const auto& ws : state_.weight_sets) sets.push_back(to_json(ws, true));
    j["weight_sets"] = sets;
    json failures = json::array();
    for (const auto& f : state_.engine_failures) failures.push_back(to_json(f));
    j["engine_failures"] = failures;
  }
  if (state_.effect) j["chosen_algorithm"] = state_.chosen_algorithm;
  if (state_.sensitivity) j["sensitivity"] = to_json(*state_.sensitivity);
  return j;
}

void Session::restore(const json& archive) {
  if (!archive.is_object() || archive.value("format", "") != "cw-session-archive")
    throw ValidationError(std::vector<FieldError>{{"format", "not a session archive"}});
  if (!archive.contains("dataset")) {
    std::unique_lock lock(mutex_);
    reset_after(Stage::Empty);
    return;
  }
  load_data(dataset_from_json(archive["dataset"]), archive.value("data_source", "archive"));
  if (!archive.contains("spec")) return;
  set_spec(spec_from_json(archive["spec"], "spec"));
  if (archive.contains("trims")) set_trims(trims_from_json(archive["trims"], "trims"));
  if (!archive.contains("weight_sets")) return;

  {
    std::unique_lock lock(mutex_);
    std::vector<WeightSet> sets;
    const json& arr = archive["weight_sets"];
    for (std::size_t i = 0; i < arr.size(); ++i) {
      WeightSet ws = weight_set_from_json(arr[i], "weight_sets[" + std::to_string(i) + "]");
      if (static_cast<std::size_t>(ws.w.size()) != state_.design->n())
        throw ValidationError(std::vector<FieldError>{{"weight_sets[" + std::to_string(i) + "].weights",
                                                       "does not match the design rows"}});
      check_weights(ws, state_.design->T);
      sets.push_back(std::move(ws));
    }
    state_.balance = build_balance_report(*state_.design, sets, BalanceOptions{}, workers_);
    state_.weight_sets = std::move(sets);
    if (archive.contains("engine_failures"))
      for (const auto& f : archive["engine_failures"])
        state_.engine_failures.push_back(
            {parse_algorithm(f.value("algorithm", "LR")), f.value("error", ""), f.value("message", "")});
    state_.stage = Stage::Weighted;
  }
  if (!archive.contains("chosen_algorithm")) return;
  estimate(archive["chosen_algorithm"].get<std::string>());
  if (archive.contains("sensitivity")) {
    SensitivityGrid grid = sensitivity_grid_from_json(archive["sensitivity"], "sensitivity");
    std::unique_lock lock(mutex_);
    state_.sensitivity = std::move(grid);
    state_.stage = Stage::SensitivityDone;
  }
}

// ---- SessionManager -------------------------------------------------------

std::shared_ptr<Session> SessionManager::create() {
  static thread_local std::mt19937_64 gen(std::random_device{}());
  std::lock_guard lock(mutex_);
  std::string id;
  do {
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(gen()),
                  static_cast<unsigned long long>(gen()));
    id = buf;
  } while (sessions_.count(id) != 0);
  auto session = std::make_shared<Session>(id, workers_);
  sessions_.emplace(id, session);
  return session;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorKind::NotFound, "unknown session '" + id + "'");
  return it->second;
}

void SessionManager::remove(const std::string& id) {
  std::shared_ptr<Session> victim;
  {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorKind::NotFound, "unknown session '" + id + "'");
    victim = std::move(it->second);
    sessions_.erase(it);
  }
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

}  // namespace cw
