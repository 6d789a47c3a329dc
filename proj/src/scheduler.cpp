#include <oed/benchmarks.hpp>
#include <oed/pareto.hpp>
#include <oed/process.hpp>
#include <oed/scheduler.hpp>

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <limits>
#include <mutex>
#include <queue>
#include <thread>

namespace oed {

using nlohmann::json;

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::none: return "none";
    case StopReason::budget_exhausted: return "budget_exhausted";
    case StopReason::user_stop: return "user_stop";
    case StopReason::aborted: return "aborted";
  }
  return "?";
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::suggest: return "suggest";
    case EventKind::dispatch: return "dispatch";
    case EventKind::complete: return "complete";
  }
  return "?";
}

EvaluationOutcome parse_program_output(const Problem& problem, const std::string& output) {
  EvaluationOutcome out;
  json doc;
  try {
    doc = json::parse(output);
  } catch (const json::exception& e) {
    out.failure = std::string("malformed output: ") + e.what();
    return out;
  }
  if (!doc.is_object()) {
    out.failure = "malformed output: expected a JSON object";
    return out;
  }
  if (doc.contains("feasible") && doc["feasible"] == false) {
    out.failure = "infeasible";
    return out;
  }
  if (!doc.contains("objectives") || !doc["objectives"].is_array()) {
    out.failure = "malformed output: missing \"objectives\" array";
    return out;
  }
  const auto& arr = doc["objectives"];
  if (static_cast<int>(arr.size()) != problem.num_objectives()) {
    out.failure = "malformed output: expected " + std::to_string(problem.num_objectives()) + " objectives, got " +
                  std::to_string(arr.size());
    return out;
  }
  Vector y(problem.num_objectives());
  for (int j = 0; j < y.size(); ++j) {
    if (!arr[static_cast<std::size_t>(j)].is_number()) {
      out.failure = "malformed output: objective " + std::to_string(j) + " is not a number";
      return out;
    }
    y(j) = arr[static_cast<std::size_t>(j)].get<double>();
  }
  if (!y.allFinite()) {
    out.failure = "malformed output: non-finite objective";
    return out;
  }
  out.objectives = y;
  return out;
}

void check_program(const std::string& program) {
  if (!is_executable(program)) throw ConfigurationError("evaluation program '" + program + "' is not an executable file");
}

EvaluationOutcome run_evaluation_program(const std::string& program, const Problem& problem, const Design& design,
                                         std::int64_t record_id, double timeout_seconds, std::stop_token stop) {
  const json request{{"design", design_to_json(problem, design)}, {"record_id", record_id}};
  TempFile input(request.dump());
  const auto result = run_process(program, {input.path().string()},
                                  std::chrono::milliseconds(static_cast<std::int64_t>(timeout_seconds * 1000.0)), stop);
  EvaluationOutcome out;
  if (result.cancelled) out.failure = "aborted";
  else if (result.timed_out) out.failure = "timeout";
  else if (result.exit_code != 0) out.failure = "exit code " + std::to_string(result.exit_code);
  else out = parse_program_output(problem, result.out);
  out.note = result.err;
  return out;
}

Evaluator benchmark_evaluator(const std::string& name, int dim) {
  auto bench = std::make_shared<Benchmark>(make_benchmark(name, dim));
  return [bench](const Design& d, std::int64_t) { return EvaluationOutcome{bench->evaluate(d), {}, {}}; };
}

DurationModel constant_duration(double value) {
  return [value](Rng&) { return value; };
}

DurationModel two_point_duration(double a, double b, double p_a) {
  return [=](Rng& rng) { return std::bernoulli_distribution(p_a)(rng) ? a : b; };
}

namespace {

struct Completion {
  std::int64_t record_id = 0;
  EvaluationOutcome outcome;
  bool recorded = false;  // the store already holds the result
};

class Dispatcher {
 public:
  virtual ~Dispatcher() = default;
  virtual double now() const = 0;
  virtual void dispatch(const Record& record) = 0;
  // Next completion, or nothing when `until` passes first or a hard stop is
  // requested.
  virtual std::optional<Completion> wait(const std::set<std::int64_t>& in_flight, const StopSignal& stop,
                                         std::optional<double> until) = 0;
  virtual void cancel_all() {}
  virtual bool manual() const { return false; }
};

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

class InlineDispatcher : public Dispatcher {
 public:
  explicit InlineDispatcher(Evaluator f) : f_(std::move(f)) {}
  double now() const override { return clock_.seconds(); }
  void dispatch(const Record& r) override {
    Completion c{r.id, {}, false};
    try {
      c.outcome = f_(r.design, r.id);
    } catch (const std::exception& e) {
      c.outcome.failure = std::string("evaluator error: ") + e.what();
    }
    done_.push_back(std::move(c));
  }
  std::optional<Completion> wait(const std::set<std::int64_t>&, const StopSignal&, std::optional<double>) override {
    if (done_.empty()) return std::nullopt;
    auto c = std::move(done_.front());
    done_.pop_front();
    return c;
  }

 private:
  Evaluator f_;
  WallClock clock_;
  std::deque<Completion> done_;
};

class VirtualDispatcher : public Dispatcher {
 public:
  VirtualDispatcher(DurationModel durations, std::uint64_t seed, Evaluator f)
      : durations_(std::move(durations)), rng_(seed), f_(std::move(f)) {}
  double now() const override { return clock_; }
  void dispatch(const Record& r) override {
    const double finish = clock_ + durations_(rng_);
    queue_.push({finish, seq_++, Completion{r.id, f_(r.design, r.id), false}});
  }
  std::optional<Completion> wait(const std::set<std::int64_t>&, const StopSignal&,
                                 std::optional<double> until) override {
    if (queue_.empty()) return std::nullopt;
    if (until && queue_.top().finish > *until) {
      clock_ = std::max(clock_, *until);
      return std::nullopt;
    }
    auto item = queue_.top();
    queue_.pop();
    clock_ = item.finish;
    return item.completion;
  }

 private:
  struct Item {
    double finish;
    std::uint64_t seq;
    Completion completion;
    bool operator>(const Item& o) const { return finish != o.finish ? finish > o.finish : seq > o.seq; }
  };
  DurationModel durations_;
  Rng rng_;
  Evaluator f_;
  double clock_ = 0.0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue_;
};

class ThreadDispatcher : public Dispatcher {
 public:
  ThreadDispatcher(const Problem& problem, std::string program, double timeout)
      : problem_(problem), program_(std::move(program)), timeout_(timeout) {}
  ~ThreadDispatcher() override {
    for (auto& t : threads_) t.request_stop();
  }
  double now() const override { return clock_.seconds(); }
  void dispatch(const Record& r) override {
    threads_.emplace_back([this, id = r.id, design = r.design](std::stop_token st) {
      auto out = run_evaluation_program(program_, problem_, design, id, timeout_, st);
      std::lock_guard lock(mutex_);
      done_.push_back({id, std::move(out), false});
      cv_.notify_all();
    });
  }
  std::optional<Completion> wait(const std::set<std::int64_t>&, const StopSignal& stop,
                                 std::optional<double> until) override {
    std::unique_lock lock(mutex_);
    while (done_.empty()) {
      if (stop.hard()) return std::nullopt;
      if (until && now() >= *until) return std::nullopt;
      cv_.wait_for(lock, std::chrono::milliseconds(50));
    }
    auto c = std::move(done_.front());
    done_.pop_front();
    return c;
  }
  void cancel_all() override {
    for (auto& t : threads_) t.request_stop();
  }

 private:
  const Problem& problem_;
  std::string program_;
  double timeout_;
  WallClock clock_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Completion> done_;
  std::vector<std::jthread> threads_;
};

// Suggestions are left pending for workers to claim; completions are store
// transitions made by someone else.
class ManualDispatcher : public Dispatcher {
 public:
  ManualDispatcher(Experiment& e, double poll) : e_(e), poll_(poll) {}
  double now() const override { return clock_.seconds(); }
  void dispatch(const Record&) override {}
  std::optional<Completion> wait(const std::set<std::int64_t>& in_flight, const StopSignal& stop,
                                 std::optional<double> until) override {
    while (!stop.requested()) {
      for (auto id : in_flight) {
        const auto r = e_.get(id);
        if (r.status == RecordStatus::evaluated || r.status == RecordStatus::failed) return Completion{id, {}, true};
      }
      if (until && now() >= *until) return std::nullopt;
      std::this_thread::sleep_for(std::chrono::duration<double>(poll_));
    }
    return std::nullopt;
  }
  bool manual() const override { return true; }

 private:
  Experiment& e_;
  double poll_;
  WallClock clock_;
};

SuggestFunction default_suggest(const SuggestFunction& f) {
  if (f) return f;
  return [](const Problem& p, const OptimizerState& s, const RunConfig& c, int count, int iteration) {
    return suggest(p, s, c, count, iteration);
  };
}

int consumed_budget(const std::vector<Record>& records, bool failures_count) {
  int n = 0;
  for (const auto& r : records)
    if (r.status != RecordStatus::failed || failures_count) ++n;
  return n;
}

SchedulerResult run_engine(Experiment& e, const RunConfig& config, Dispatcher& d, StopSignal& stop,
                           const SchedulerOptions& options) {
  if (auto v = validate(config); !v.empty()) throw ValidationError(std::move(v));
  const Problem& problem = e.problem();
  const auto suggest_fn = default_suggest(options.suggest);
  const bool manual = d.manual();
  const bool async = config.eval_mode == EvalMode::async_batch;

  SchedulerResult res;
  SchedulerState& st = res.state;
  st.mode = config.eval_mode;
  st.running = true;
  st.iteration = e.max_iteration();

  auto event = [&](EventKind kind, int count, std::int64_t id) {
    res.trace.push_back({kind, d.now(), count, id});
  };
  auto changed = [&] {
    st.clock = d.now();
    if (options.on_change) options.on_change(st);
  };

  std::deque<std::int64_t> adopted;
  for (const auto& r : e.query()) {
    if (manual) {
      if (r.status == RecordStatus::pending || r.status == RecordStatus::in_evaluation) st.in_flight.insert(r.id);
    } else if (r.status == RecordStatus::in_evaluation) {
      e.transition(r.id, RecordStatus::failed, {std::nullopt, "", "interrupted", "scheduler"});
    } else if (r.status == RecordStatus::pending) {
      adopted.push_back(r.id);
    }
  }
  st.budget_remaining = std::max(0, config.budget - consumed_budget(e.query(), config.failures_consume_budget));

  auto dispatch = [&](std::int64_t id) {
    Record r = manual ? e.get(id)
                      : e.transition(id, RecordStatus::in_evaluation, {std::nullopt, "scheduler", "", "scheduler"});
    st.in_flight.insert(id);
    event(EventKind::dispatch, 0, id);
    d.dispatch(r);
  };

  auto complete = [&](const Completion& c) {
    if (!c.recorded) {
      const std::string note = c.outcome.note;
      try {
        if (c.outcome.objectives) {
          e.transition(c.record_id, RecordStatus::evaluated, {c.outcome.objectives, "", note, "scheduler"});
        } else {
          e.transition(c.record_id, RecordStatus::failed,
                       {std::nullopt, "", note.empty() ? c.outcome.failure : c.outcome.failure + "\n" + note,
                        "scheduler"});
        }
      } catch (const ValidationError& err) {
        e.transition(c.record_id, RecordStatus::failed, {std::nullopt, "", err.what(), "scheduler"});
      }
    }
    if (e.get(c.record_id).status == RecordStatus::failed && !config.failures_consume_budget) ++st.budget_remaining;
    st.in_flight.erase(c.record_id);
    event(EventKind::complete, 0, c.record_id);
  };

  int failures_in_row = 0;
  double last_suggest = -std::numeric_limits<double>::infinity();
  changed();
  while (true) {
    if (stop.requested() && st.stopping == StopReason::none) st.stopping = StopReason::user_stop;
    if (stop.hard() && !manual) {
      d.cancel_all();
      for (auto id : std::set<std::int64_t>(st.in_flight)) {
        e.transition(id, RecordStatus::failed, {std::nullopt, "", "aborted", "scheduler"});
        st.in_flight.erase(id);
        event(EventKind::complete, 0, id);
      }
      break;
    }
    if (manual && st.stopping == StopReason::user_stop) break;

    bool throttled = false;
    if (st.stopping == StopReason::none) {
      int slots = async ? config.batch_size - static_cast<int>(st.in_flight.size())
                        : (st.in_flight.empty() ? config.batch_size : 0);
      while (slots > 0 && !adopted.empty()) {
        dispatch(adopted.front());
        adopted.pop_front();
        --slots;
      }
      const int want = std::min(slots, st.budget_remaining);
      throttled = async && config.async_min_interval > 0 && !st.in_flight.empty() &&
                  d.now() - last_suggest < config.async_min_interval;
      if (want > 0 && !throttled) {
        std::optional<SuggestionBatch> batch;
        try {
          batch = suggest_fn(problem, optimizer_state(e.query()), config, want, st.iteration + 1);
          if (batch->designs.empty()) throw SolverError("no new design could be suggested");
        } catch (const Error& err) {
          batch.reset();
          st.diagnostics = std::string("suggest failed: ") + err.what();
          if (++failures_in_row >= 3) st.stopping = StopReason::aborted;
        }
        if (batch) {
          failures_in_row = 0;
          last_suggest = d.now();
          ++st.iteration;
          if (static_cast<int>(batch->designs.size()) > want) batch->designs.resize(static_cast<std::size_t>(want));
          event(EventKind::suggest, static_cast<int>(batch->designs.size()), 0);
          const auto source =
              batch->source == SuggestionSource::initial ? RecordSource::initial : RecordSource::suggested;
          const auto ids = e.insert_pending(batch->designs, source, st.iteration, "scheduler");
          st.budget_remaining -= static_cast<int>(ids.size());
          if (options.save_models && !batch->models.empty()) e.save_models(st.iteration, batch->models);
          for (auto id : ids) dispatch(id);
        }
        changed();
      }
    }

    if (st.in_flight.empty()) {
      if (st.stopping != StopReason::none) break;
      if (st.budget_remaining == 0 && adopted.empty()) {
        st.stopping = StopReason::budget_exhausted;
        break;
      }
      continue;  // a failed suggest is retried
    }
    const auto until = throttled ? std::optional<double>(last_suggest + config.async_min_interval) : std::nullopt;
    if (auto c = d.wait(st.in_flight, stop, until)) {
      complete(*c);
      changed();
    }
  }
  st.running = false;
  res.makespan = d.now();
  changed();
  return res;
}

}  // namespace

SchedulerResult run_scheduler(Experiment& experiment, const RunConfig& config, const EvaluatorBinding& binding,
                              StopSignal& stop, const SchedulerOptions& options) {
  switch (binding.kind) {
    case EvaluatorBinding::Kind::external_program: {
      check_program(binding.program);
      if (!(binding.timeout_seconds > 0)) throw ConfigurationError("evaluation timeout must be positive");
      ThreadDispatcher d(experiment.problem(), binding.program, binding.timeout_seconds);
      return run_engine(experiment, config, d, stop, options);
    }
    case EvaluatorBinding::Kind::function: {
      if (!binding.function) throw ConfigurationError("evaluator function is empty");
      InlineDispatcher d(binding.function);
      return run_engine(experiment, config, d, stop, options);
    }
    case EvaluatorBinding::Kind::manual: {
      ManualDispatcher d(experiment, options.poll_seconds);
      return run_engine(experiment, config, d, stop, options);
    }
  }
  throw ConfigurationError("unknown evaluator binding");
}

std::vector<Record> request_suggestions(Experiment& experiment, const RunConfig& config, int count,
                                        const SuggestFunction& suggest_fn) {
  if (count < 1) throw ValidationError("count: must be at least 1");
  const int iteration = experiment.max_iteration() + 1;
  auto batch = default_suggest(suggest_fn)(experiment.problem(), optimizer_state(experiment.query()), config, count,
                                           iteration);
  const auto source = batch.source == SuggestionSource::initial ? RecordSource::initial : RecordSource::suggested;
  const auto ids = experiment.insert_pending(batch.designs, source, iteration, "scheduler");
  if (!batch.models.empty()) experiment.save_models(iteration, batch.models);
  std::vector<Record> out;
  for (auto id : ids) out.push_back(experiment.get(id));
  return out;
}

SchedulerResult simulate(const Problem& problem, const RunConfig& config, const DurationModel& durations,
                         std::uint64_t seed, const Evaluator& evaluator, const SchedulerOptions& options) {
  auto e = Experiment::create(":memory:", "simulation", problem, config);
  VirtualDispatcher d(durations, seed, evaluator);
  StopSignal stop;
  return run_engine(*e, config, d, stop, options);
}

BenchmarkRun run_benchmark(const std::string& name, const RunConfig& config, int dim) {
  const Benchmark bench = make_benchmark(name, dim);
  auto e = Experiment::create(":memory:", name, bench.problem, config);
  StopSignal stop;
  run_scheduler(*e, config, EvaluatorBinding::inline_function(benchmark_evaluator(name, dim)), stop);
  BenchmarkRun out;
  out.records = e->query();
  const Vector ref = to_internal(bench.problem, bench.reference);
  const int m = bench.problem.num_objectives();
  Matrix pts(0, m);
  for (const auto& r : out.records) {
    if (r.status != RecordStatus::evaluated) continue;
    const Vector y = to_internal(bench.problem, *r.objectives);
    if ((y.array() <= ref.array()).all()) {
      pts.conservativeResize(pts.rows() + 1, m);
      pts.row(pts.rows() - 1) = y.transpose();
    }
    out.hypervolume.push_back(pts.rows() == 0 ? 0.0 : hypervolume(pts, ref));
  }
  return out;
}

TraceCheck check_trace(const std::vector<TraceEvent>& trace, EvalMode mode) {
  TraceCheck out;
  int in_flight = 0;
  int completions = 0;  // since the last dispatch
  int suggests = 0;     // since the last completion
  const TraceEvent* prev = nullptr;
  for (const auto& ev : trace) {
    switch (ev.kind) {
      case EventKind::suggest:
        if (mode == EvalMode::sync_batch && in_flight != 0) out.sync_no_overlap = false;
        if (completions > 0 && ev.count != 1) out.async_one_per_completion = false;
        ++suggests;
        break;
      case EventKind::dispatch:
        ++in_flight;
        out.max_in_flight = std::max(out.max_in_flight, in_flight);
        if (mode == EvalMode::sync_batch && (!prev || prev->kind == EventKind::complete)) out.sync_no_overlap = false;
        if (completions > 0 && (completions != 1 || suggests != 1)) out.async_one_per_completion = false;
        completions = 0;
        break;
      case EventKind::complete:
        --in_flight;
        ++completions;
        suggests = 0;
        break;
    }
    prev = &ev;
  }
  if (mode != EvalMode::async_batch) out.async_one_per_completion = true;
  return out;
}

}  // namespace oed
