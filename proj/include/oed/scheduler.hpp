#pragma once

#include <oed/optimizer.hpp>
#include <oed/problem.hpp>
#include <oed/store.hpp>

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <stop_token>
#include <string>
#include <vector>

namespace oed {

struct EvaluationOutcome {
  std::optional<Vector> objectives;  // user units; empty on failure
  std::string failure;               // reason when objectives is empty
  std::string note;                  // captured stderr and diagnostics
};

using Evaluator = std::function<EvaluationOutcome(const Design&, std::int64_t record_id)>;

/// Interprets an evaluation program's standard output.
EvaluationOutcome parse_program_output(const Problem& problem, const std::string& output);

/// Throws ConfigurationError unless `program` is an executable file.
void check_program(const std::string& program);

/// Writes {"design": {...}, "record_id": n} to a temporary file and runs
/// `program` on it.
EvaluationOutcome run_evaluation_program(const std::string& program, const Problem& problem, const Design& design,
                                         std::int64_t record_id, double timeout_seconds,
                                         std::stop_token stop = {});

struct EvaluatorBinding {
  enum class Kind { external_program, function, manual };
  Kind kind = Kind::manual;
  std::string program;
  double timeout_seconds = 24 * 3600.0;
  Evaluator function;  // evaluated inline, in dispatch order

  static EvaluatorBinding manual() { return {}; }
  static EvaluatorBinding external(std::string program, double timeout_seconds = 24 * 3600.0) {
    return {Kind::external_program, std::move(program), timeout_seconds, {}};
  }
  static EvaluatorBinding inline_function(Evaluator f) { return {Kind::function, {}, 0.0, std::move(f)}; }
};

/// A builtin benchmark as an inline evaluator.
Evaluator benchmark_evaluator(const std::string& name, int dim = 6);

enum class StopReason { none, budget_exhausted, user_stop, aborted };
std::string to_string(StopReason reason);

class StopSignal {
 public:
  /// Graceful stop drains in-flight work; a hard stop fails it as "aborted".
  void request(bool hard = false) {
    if (hard) hard_ = true;
    stop_ = true;
  }
  bool requested() const { return stop_; }
  bool hard() const { return hard_; }

 private:
  std::atomic<bool> stop_{false};
  std::atomic<bool> hard_{false};
};

struct SchedulerState {
  EvalMode mode = EvalMode::sequential;
  std::set<std::int64_t> in_flight;
  int budget_remaining = 0;
  StopReason stopping = StopReason::none;
  double clock = 0.0;  // seconds since start, virtual or wall
  int iteration = 0;   // last suggest call
  bool running = false;
  std::string diagnostics;
};

enum class EventKind { suggest, dispatch, complete };
std::string to_string(EventKind kind);

struct TraceEvent {
  EventKind kind = EventKind::suggest;
  double time = 0.0;
  int count = 0;                 // designs returned, for suggest events
  std::int64_t record_id = 0;    // dispatch and complete events
};

struct SchedulerResult {
  SchedulerState state;
  std::vector<TraceEvent> trace;
  double makespan = 0.0;
};

using SuggestFunction =
    std::function<SuggestionBatch(const Problem&, const OptimizerState&, const RunConfig&, int count, int iteration)>;

struct SchedulerOptions {
  SuggestFunction suggest;  // defaults to oed::suggest
  bool save_models = true;
  double poll_seconds = 0.05;  // manual binding
  std::function<void(const SchedulerState&)> on_change;
};

/// Drives the optimize/evaluate loop until the budget is spent, a stop is
/// requested, or suggest() fails three times in a row. The budget counts
/// every record of the experiment, so a resumed run continues where the last
/// one stopped; pending records left behind are dispatched first.
SchedulerResult run_scheduler(Experiment& experiment, const RunConfig& config, const EvaluatorBinding& binding,
                              StopSignal& stop, const SchedulerOptions& options = {});

/// One manual step: suggests `count` designs and stores them as pending.
std::vector<Record> request_suggestions(Experiment& experiment, const RunConfig& config, int count,
                                        const SuggestFunction& suggest_fn = {});

/// Seeded distribution of evaluation durations.
using DurationModel = std::function<double(Rng&)>;
DurationModel constant_duration(double value);
DurationModel two_point_duration(double a, double b, double p_a = 0.5);

/// Runs the production loop on a virtual clock against an in-memory store.
/// Durations are drawn in dispatch order from a generator seeded by `seed`.
SchedulerResult simulate(const Problem& problem, const RunConfig& config, const DurationModel& durations,
                         std::uint64_t seed, const Evaluator& evaluator, const SchedulerOptions& options = {});

struct TraceCheck {
  int max_in_flight = 0;
  bool async_one_per_completion = true;  // async only
  bool sync_no_overlap = true;           // sync only
};

struct BenchmarkRun {
  std::vector<Record> records;
  std::vector<double> hypervolume;  // after each evaluated record, against the benchmark reference
};

/// Runs `config` to completion on a builtin benchmark in an in-memory store.
BenchmarkRun run_benchmark(const std::string& name, const RunConfig& config, int dim = 6);

/// Replays a trace and measures its invariants.
TraceCheck check_trace(const std::vector<TraceEvent>& trace, EvalMode mode);

}  // namespace oed
