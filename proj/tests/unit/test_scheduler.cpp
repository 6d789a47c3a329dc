#include <doctest.h>
#include <generators.hpp>

#include <oed/benchmarks.hpp>
#include <oed/scheduler.hpp>

#include <atomic>
#include <fstream>
#include <thread>

#include <sys/stat.h>
#include <unistd.h>

using namespace oed;
namespace fs = std::filesystem;

namespace {

RunConfig config(EvalMode mode, int batch, int budget, Preset preset = Preset::random) {
  RunConfig c;
  c.preset = preset;
  c.eval_mode = mode;
  c.batch_size = batch;
  c.budget = budget;
  c.n_init = 4;
  c.seed = 3;
  c.solver.population_size = 20;
  c.solver.generations = 10;
  c.surrogate.restarts = 1;
  c.surrogate.max_iterations = 40;
  return c;
}

DurationModel cycle(std::vector<double> values) {
  auto i = std::make_shared<std::size_t>(0);
  return [i, values](Rng&) { return values[(*i)++ % values.size()]; };
}

std::vector<double> suggest_times(const SchedulerResult& r) {
  std::vector<double> t;
  for (const auto& ev : r.trace)
    if (ev.kind == EventKind::suggest) t.push_back(ev.time);
  return t;
}

const Benchmark& zdt1() {
  static const Benchmark b = make_benchmark("zdt1", 3);
  return b;
}

Evaluator instant() { return benchmark_evaluator("zdt1", 3); }

struct Script {
  fs::path path;
  explicit Script(const std::string& body, bool executable = true) {
    static std::atomic<int> n{0};
    path = fs::temp_directory_path() / ("oed-eval-" + std::to_string(::getpid()) + "-" + std::to_string(n++) + ".sh");
    std::ofstream(path) << "#!/bin/sh\n" << body << "\n";
    ::chmod(path.c_str(), executable ? 0755 : 0644);
  }
  ~Script() { fs::remove(path); }
};

std::shared_ptr<Experiment> fresh(const RunConfig& c) { return Experiment::create(":memory:", "s", zdt1().problem, c); }

}  // namespace

TEST_CASE("sequential run with an instant evaluator") {
  const auto c = config(EvalMode::sequential, 1, 5, Preset::parego);
  auto e = fresh(c);
  StopSignal stop;
  const auto res = run_scheduler(*e, c, EvaluatorBinding::inline_function(instant()), stop);
  CHECK(res.state.stopping == StopReason::budget_exhausted);
  const auto records = e->query();
  REQUIRE(records.size() == 5);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].status == RecordStatus::evaluated);
    CHECK(records[i].iteration == static_cast<int>(i) + 1);
  }
  CHECK(res.state.budget_remaining == 0);
}

TEST_CASE("sync batch re-optimizes when the slowest evaluation finishes") {
  const auto res = simulate(zdt1().problem, config(EvalMode::sync_batch, 3, 6), cycle({1, 5, 9}), 0, instant());
  const auto t = suggest_times(res);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == 0.0);
  CHECK(t[1] == 9.0);
  CHECK(res.makespan == 18.0);
  CHECK(check_trace(res.trace, EvalMode::sync_batch).sync_no_overlap);
}

TEST_CASE("async batch replaces each completion immediately") {
  const auto res = simulate(zdt1().problem, config(EvalMode::async_batch, 2, 6), cycle({1, 9}), 0, instant());
  const auto t = suggest_times(res);
  REQUIRE(t.size() >= 2);
  CHECK(t[1] == 1.0);
  // The evaluation dispatched at t=0 with duration 9 is still running then.
  bool long_running_at_one = false;
  for (const auto& ev : res.trace)
    if (ev.kind == EventKind::complete && ev.time == 9.0) long_running_at_one = true;
  CHECK(long_running_at_one);
  const auto check = check_trace(res.trace, EvalMode::async_batch);
  CHECK(check.max_in_flight == 2);
  CHECK(check.async_one_per_completion);
  for (const auto& ev : res.trace)
    if (ev.kind == EventKind::suggest && ev.time > 0) CHECK(ev.count == 1);
}

TEST_CASE("constant durations give equal makespans") {
  for (int batch : {1, 2, 4}) {
    const auto sync = simulate(zdt1().problem, config(EvalMode::sync_batch, batch, 12), constant_duration(2.0), 1,
                               instant());
    const auto async = simulate(zdt1().problem, config(EvalMode::async_batch, batch, 12), constant_duration(2.0), 1,
                                instant());
    CHECK(sync.makespan == async.makespan);
  }
}

TEST_CASE("budget 0 gives an empty trace") {
  for (auto mode : {EvalMode::sequential, EvalMode::sync_batch, EvalMode::async_batch}) {
    const auto res = simulate(zdt1().problem, config(mode, mode == EvalMode::sequential ? 1 : 3, 0),
                              constant_duration(1.0), 0, instant());
    CHECK(res.trace.empty());
    CHECK(res.makespan == 0.0);
  }
}

TEST_CASE("trace invariants hold under random duration models") {
  Rng rng(17);
  std::uniform_int_distribution<int> batch_d(1, 5), budget_d(0, 25);
  std::uniform_real_distribution<double> dur(0.1, 20.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int batch = batch_d(rng), budget = budget_d(rng);
    const double a = dur(rng), b = dur(rng);
    for (auto mode : {EvalMode::sync_batch, EvalMode::async_batch}) {
      auto c = config(mode, batch, budget);
      c.seed = static_cast<std::uint64_t>(trial);
      const auto res = simulate(zdt1().problem, c, two_point_duration(a, b, 0.3), static_cast<std::uint64_t>(trial),
                                instant());
      const auto check = check_trace(res.trace, mode);
      CHECK(check.max_in_flight <= batch);
      CHECK(check.async_one_per_completion);
      CHECK(check.sync_no_overlap);
      int completes = 0;
      for (const auto& ev : res.trace) completes += ev.kind == EventKind::complete;
      CHECK(completes == budget);
      CHECK(res.state.in_flight.empty());
    }
  }
}

TEST_CASE("async never idles longer than sync on two-point durations") {
  int strictly = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sync = simulate(zdt1().problem, config(EvalMode::sync_batch, 4, 20), two_point_duration(1, 10), seed,
                               instant());
    const auto async = simulate(zdt1().problem, config(EvalMode::async_batch, 4, 20), two_point_duration(1, 10), seed,
                                instant());
    CHECK(async.makespan <= sync.makespan);
    strictly += async.makespan < sync.makespan;
  }
  CHECK(strictly >= 8);
}

TEST_CASE("evaluation program contract") {
  const auto& p = zdt1().problem;
  const Design d = initial_designs(p, 2, 1)[0];

  Script ok(R"(cat "$1" > /dev/null; echo '{"objectives":[1.0,2.0]}')");
  auto out = run_evaluation_program(ok.path.string(), p, d, 7, 10.0);
  REQUIRE(out.objectives);
  CHECK((*out.objectives)(0) == 1.0);
  CHECK((*out.objectives)(1) == 2.0);

  Script echo_id(R"(grep -q '"record_id":7' "$1" && grep -q '"x1"' "$1" && echo '{"objectives":[0,0]}')");
  CHECK(run_evaluation_program(echo_id.path.string(), p, d, 7, 10.0).objectives);

  Script fail("echo 'bad things' >&2; exit 1");
  out = run_evaluation_program(fail.path.string(), p, d, 1, 10.0);
  CHECK_FALSE(out.objectives);
  CHECK(out.failure == "exit code 1");
  CHECK(out.note.find("bad things") != std::string::npos);

  Script slow("sleep 5; echo '{\"objectives\":[1,1]}'");
  out = run_evaluation_program(slow.path.string(), p, d, 1, 0.2);
  CHECK(out.failure == "timeout");

  Script garbage("echo 'not json'");
  out = run_evaluation_program(garbage.path.string(), p, d, 1, 10.0);
  CHECK(out.failure.rfind("malformed output", 0) == 0);

  Script infeasible(R"(echo '{"feasible": false}')");
  CHECK(run_evaluation_program(infeasible.path.string(), p, d, 1, 10.0).failure == "infeasible");

  CHECK(parse_program_output(p, R"({"objectives":[1]})").failure.find("expected 2") != std::string::npos);
  CHECK_FALSE(parse_program_output(p, R"({"objectives":[1, "x"]})").objectives);
}

TEST_CASE("external programs drive the scheduler") {
  const auto c = config(EvalMode::sync_batch, 2, 4);
  Script ok(R"(echo '{"objectives":[1.0,2.0]}')");
  auto e = fresh(c);
  StopSignal stop;
  const auto res = run_scheduler(*e, c, EvaluatorBinding::external(ok.path.string()), stop);
  CHECK(res.state.stopping == StopReason::budget_exhausted);
  CHECK(e->query({RecordStatus::evaluated, std::nullopt, std::nullopt}).size() == 4);

  Script fail("exit 3");
  auto e2 = fresh(c);
  run_scheduler(*e2, c, EvaluatorBinding::external(fail.path.string()), stop);
  const auto failed = e2->query({RecordStatus::failed, std::nullopt, std::nullopt});
  REQUIRE(failed.size() == 4);
  CHECK(failed[0].note == "exit code 3");

  Script not_exec(R"(echo '{"objectives":[1.0,2.0]}')", false);
  auto e3 = fresh(c);
  CHECK_THROWS_AS(run_scheduler(*e3, c, EvaluatorBinding::external(not_exec.path.string()), stop),
                  ConfigurationError);
  CHECK_THROWS_AS(run_scheduler(*e3, c, EvaluatorBinding::external("/no/such/program"), stop), ConfigurationError);
  CHECK(e3->record_count() == 0);
}

TEST_CASE("failed evaluations can be exempted from the budget") {
  auto c = config(EvalMode::sequential, 1, 4);
  c.failures_consume_budget = false;
  int calls = 0;
  Evaluator flaky = [&](const Design& d, std::int64_t) {
    if (++calls % 2 == 1) return EvaluationOutcome{std::nullopt, "flaky", ""};
    return EvaluationOutcome{zdt1().evaluate(d), {}, {}};
  };
  auto e = fresh(c);
  StopSignal stop;
  run_scheduler(*e, c, EvaluatorBinding::inline_function(flaky), stop);
  CHECK(e->query({RecordStatus::evaluated, std::nullopt, std::nullopt}).size() == 4);
  CHECK(e->query({RecordStatus::failed, std::nullopt, std::nullopt}).size() == 4);

  c.failures_consume_budget = true;
  calls = 0;
  auto e2 = fresh(c);
  run_scheduler(*e2, c, EvaluatorBinding::inline_function(flaky), stop);
  CHECK(e2->record_count() == 4);
}

TEST_CASE("three consecutive suggest failures abort the run") {
  const auto c = config(EvalMode::sequential, 1, 5);
  SchedulerOptions opts;
  int calls = 0;
  opts.suggest = [&](const Problem&, const OptimizerState&, const RunConfig&, int, int) -> SuggestionBatch {
    ++calls;
    throw SolverError("nothing feasible");
  };
  auto e = fresh(c);
  StopSignal stop;
  const auto res = run_scheduler(*e, c, EvaluatorBinding::inline_function(instant()), stop, opts);
  CHECK(calls == 3);
  CHECK(res.state.stopping == StopReason::aborted);
  CHECK(res.state.diagnostics.find("nothing feasible") != std::string::npos);
}

TEST_CASE("hard stop fails in-flight evaluations as aborted; graceful stop drains") {
  const auto c = config(EvalMode::sync_batch, 2, 10);
  Script slow("sleep 30; echo '{\"objectives\":[1,1]}'");
  auto e = fresh(c);
  StopSignal stop;
  std::thread killer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    stop.request(true);
  });
  const auto res = run_scheduler(*e, c, EvaluatorBinding::external(slow.path.string()), stop);
  killer.join();
  CHECK(res.state.stopping == StopReason::user_stop);
  const auto records = e->query();
  REQUIRE(records.size() == 2);
  for (const auto& r : records) {
    CHECK(r.status == RecordStatus::failed);
    CHECK(r.note == "aborted");
  }

  Script quick("sleep 0.3; echo '{\"objectives\":[1,1]}'");
  auto e2 = fresh(c);
  StopSignal gentle;
  std::thread stopper([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    gentle.request();
  });
  run_scheduler(*e2, c, EvaluatorBinding::external(quick.path.string()), gentle);
  stopper.join();
  const auto drained = e2->query();
  REQUIRE(drained.size() == 2);
  for (const auto& r : drained) CHECK(r.status == RecordStatus::evaluated);
}

TEST_CASE("manual binding waits for results entered elsewhere") {
  const auto c = config(EvalMode::async_batch, 2, 4);
  auto e = fresh(c);
  StopSignal stop;
  SchedulerOptions opts;
  opts.poll_seconds = 0.005;
  std::thread worker([&] {
    int done = 0;
    while (done < 4) {
      if (auto r = e->claim_next("tech-1")) {
        e->transition(r->id, RecordStatus::evaluated, {zdt1().evaluate(r->design), "", "", "tech"});
        ++done;
      } else {
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
    }
  });
  const auto res = run_scheduler(*e, c, EvaluatorBinding::manual(), stop, opts);
  worker.join();
  CHECK(res.state.stopping == StopReason::budget_exhausted);
  CHECK(e->query({RecordStatus::evaluated, std::nullopt, std::nullopt}).size() == 4);
  CHECK(check_trace(res.trace, EvalMode::async_batch).max_in_flight <= 2);
}

TEST_CASE("a resumed run adopts pending records and honours the total budget") {
  const auto c = config(EvalMode::sequential, 1, 5);
  auto e = fresh(c);
  const auto pending = request_suggestions(*e, c, 2);
  REQUIRE(pending.size() == 2);
  CHECK(pending[0].status == RecordStatus::pending);
  StopSignal stop;
  run_scheduler(*e, c, EvaluatorBinding::inline_function(instant()), stop);
  const auto records = e->query();
  CHECK(records.size() == 5);
  for (const auto& r : records) CHECK(r.status == RecordStatus::evaluated);
  CHECK(records[0].id == pending[0].id);
}
