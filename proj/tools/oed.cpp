#include <oed/benchmarks.hpp>
#include <oed/scheduler.hpp>
#include <oed/service.hpp>
#include <oed/store.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

using namespace oed;
using json = nlohmann::json;

namespace {

std::atomic<StopSignal*> active_stop{nullptr};

void on_interrupt(int) {
  if (auto* s = active_stop.load()) s->request();
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
  return out;
}

EvalMode parse_mode_flag(const std::string& text) {
  if (text == "seq") return EvalMode::sequential;
  if (text == "sync") return EvalMode::sync_batch;
  if (text == "async") return EvalMode::async_batch;
  return parse_eval_mode(text);
}

struct RunFlags {
  std::string db, evaluator;
  std::optional<int> budget, batch, n_init;
  std::optional<std::string> mode, preset;
  std::optional<std::uint64_t> seed;
  double timeout = 24 * 3600.0;
};

int cmd_init(const std::string& problem_file, const std::string& config_file, const std::string& db,
             std::string name) {
  const Problem problem = problem_from_json(read_json_file(problem_file));
  const RunConfig config = config_file.empty() ? RunConfig{} : run_config_from_json(read_json_file(config_file));
  if (std::filesystem::exists(db)) throw ConflictError("'" + db + "' already exists");
  if (name.empty()) name = std::filesystem::path(db).stem().string();
  auto e = Experiment::create(db, name, problem, config);
  std::cout << e->name() << "\n";
  return 0;
}

int cmd_run(const RunFlags& f) {
  auto e = Experiment::open(f.db);
  RunConfig config = e->run_config();
  if (f.budget) config.budget = *f.budget;
  if (f.batch) config.batch_size = *f.batch;
  if (f.n_init) config.n_init = *f.n_init;
  if (f.mode) config.eval_mode = parse_mode_flag(*f.mode);
  if (f.preset) config.preset = parse_preset(*f.preset);
  if (f.seed) config.seed = *f.seed;
  if (auto v = validate(config); !v.empty()) throw ValidationError(std::move(v));
  e->set_run_config(config);

  if (f.evaluator.empty()) {
    for (const auto& r : request_suggestions(*e, config, config.batch_size))
      std::cout << record_json(e->problem(), r).dump() << "\n";
    return 0;
  }

  EvaluatorBinding binding;
  if (is_benchmark(f.evaluator)) {
    const int dim = static_cast<int>(e->problem().variables.size());
    binding = EvaluatorBinding::inline_function(benchmark_evaluator(f.evaluator, dim));
  } else {
    binding = EvaluatorBinding::external(f.evaluator, f.timeout);
  }
  StopSignal stop;
  active_stop = &stop;
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  const auto result = run_scheduler(*e, config, binding, stop);
  active_stop = nullptr;
  const auto st = e->statistics();
  std::cerr << "stopped: " << to_string(result.state.stopping) << "; evaluated " << st.evaluated << ", failed "
            << st.failed << ", pending " << st.pending << "\n";
  if (!result.state.diagnostics.empty()) std::cerr << result.state.diagnostics << "\n";
  return result.state.stopping == StopReason::aborted ? 2 : 0;
}

int cmd_report(const std::string& db, const std::string& format) {
  auto e = Experiment::open(db);
  const auto records = e->query();
  const auto st = e->statistics();
  if (format == "json") {
    json out{{"name", e->name()}, {"statistics", statistics_json(st)}, {"records", json::array()}};
    for (const auto& r : records) out["records"].push_back(record_json(e->problem(), r));
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  if (format != "csv") throw ValidationError("unknown format '" + format + "'");
  std::cout << records_csv(e->problem(), records) << "\r\n";
  std::cout << "front\r\n";
  for (auto id : st.front) std::cout << id << "\r\n";
  std::cout << "\r\niteration,hypervolume\r\n";
  for (const auto& [it, hv] : st.hypervolume) std::cout << it << "," << format_double(hv) << "\r\n";
  return 0;
}

int cmd_enter(const std::string& db, std::int64_t record, const std::string& objectives, const std::string& failure,
              const std::string& worker) {
  auto e = Experiment::open(db);
  TransitionPayload payload;
  payload.worker = worker;
  payload.actor = "cli";
  Record r;
  if (!failure.empty()) {
    payload.note = failure;
    r = e->transition(record, RecordStatus::failed, payload);
  } else {
    const auto values = parse_values(objectives);
    payload.objectives = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    r = e->transition(record, RecordStatus::evaluated, payload);
  }
  std::cout << record_json(e->problem(), r).dump() << "\n";
  return 0;
}

int cmd_serve(const std::string& root, int port, const std::string& users, const std::string& host,
              const std::vector<std::string>& programs) {
  ServiceOptions options;
  options.db_root = root;
  options.users_file = users;
  for (const auto& p : programs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--program expects name=path, got '" + p + "'");
    check_program(p.substr(eq + 1));
    options.programs[p.substr(0, eq)] = p.substr(eq + 1);
  }
  Service service(options);
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread([&service, set] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  }).detach();
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!service.listen(host, port)) throw ConfigurationError("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

int cmd_benchmark(const std::string& problem, const std::string& preset, int budget, int seeds, int n_init, int dim,
                  std::uint64_t first_seed) {
  if (!is_benchmark(problem)) throw ValidationError("unknown benchmark '" + problem + "'");
  std::cout << "preset,seed,evaluations,hypervolume\r\n";
  for (int k = 0; k < seeds; ++k) {
    RunConfig config;
    config.preset = parse_preset(preset);
    config.budget = budget;
    config.n_init = n_init;
    config.seed = first_seed + static_cast<std::uint64_t>(k);
    const auto run = run_benchmark(problem, config, dim);
    for (std::size_t i = 0; i < run.hypervolume.size(); ++i)
      std::cout << preset << "," << config.seed << "," << i + 1 << "," << format_double(run.hypervolume[i]) << "\r\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-objective Bayesian optimization of experiments"};
  app.require_subcommand(1);

  std::string problem_file, config_file, db, name;
  auto* init = app.add_subcommand("init", "Create an experiment database");
  init->add_option("--problem", problem_file, "Problem definition (JSON)")->required();
  init->add_option("--config", config_file, "Run configuration (JSON)");
  init->add_option("--db", db, "Experiment database to create")->required();
  init->add_option("--name", name, "Experiment name (default: file stem)");

  RunFlags rf;
  auto* run = app.add_subcommand("run", "Run the optimization loop, or print one manual batch");
  run->add_option("--db", rf.db)->required();
  run->add_option("--evaluator", rf.evaluator, "Builtin benchmark name or evaluation program");
  run->add_option("--budget", rf.budget);
  run->add_option("--mode", rf.mode)->check(CLI::IsMember({"seq", "sync", "async"}));
  run->add_option("--batch", rf.batch);
  run->add_option("--n-init", rf.n_init);
  run->add_option("--preset", rf.preset);
  run->add_option("--seed", rf.seed);
  run->add_option("--timeout", rf.timeout, "Seconds per evaluation program call");

  std::string format = "csv";
  auto* report = app.add_subcommand("report", "Records, Pareto front and hypervolume");
  report->add_option("--db", db)->required();
  report->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

  std::int64_t record = 0;
  std::string objectives, failure, worker = "cli";
  auto* enter = app.add_subcommand("enter", "Enter a measured result");
  enter->add_option("--db", db)->required();
  enter->add_option("--record", record)->required();
  auto* obj_opt = enter->add_option("--objectives", objectives, "Comma-separated values");
  auto* fail_opt = enter->add_option("--failure", failure, "Mark the record failed with this reason");
  obj_opt->excludes(fail_opt);
  enter->add_option("--worker", worker);

  std::string out_dir, in_dir;
  auto* exp = app.add_subcommand("export", "Write an archive directory");
  exp->add_option("--db", db)->required();
  exp->add_option("--out", out_dir)->required();
  auto* imp = app.add_subcommand("import", "Rebuild an experiment from an archive");
  imp->add_option("--in", in_dir)->required();
  imp->add_option("--db", db)->required();

  std::string db_root, users, host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> programs;
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--db-root", db_root)->required();
  serve->add_option("--port", port);
  serve->add_option("--users", users)->required();
  serve->add_option("--host", host);
  serve->add_option("--program", programs, "Evaluation program clients may name, as name=path");

  std::string bench = "zdt1", preset = "parego";
  int budget = 40, seeds = 5, n_init = 10, dim = 6;
  std::uint64_t first_seed = 0;
  auto* benchmark = app.add_subcommand("benchmark", "Hypervolume against evaluations on a builtin problem");
  benchmark->add_option("--problem", bench)->check(CLI::IsMember(benchmark_names()));
  benchmark->add_option("--preset", preset);
  benchmark->add_option("--budget", budget);
  benchmark->add_option("--seeds", seeds);
  benchmark->add_option("--n-init", n_init);
  benchmark->add_option("--dim", dim);
  benchmark->add_option("--first-seed", first_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*init) return cmd_init(problem_file, config_file, db, name);
    if (*run) return cmd_run(rf);
    if (*report) return cmd_report(db, format);
    if (*enter) {
      if (objectives.empty() && failure.empty()) throw ValidationError("give --objectives or --failure");
      return cmd_enter(db, record, objectives, failure, worker);
    }
    if (*exp) {
      Experiment::open(db)->export_archive(out_dir);
      return 0;
    }
    if (*imp) {
      std::cout << Experiment::import_archive(in_dir, db)->name() << "\n";
      return 0;
    }
    if (*serve) return cmd_serve(db_root, port, users, host, programs);
    if (*benchmark) return cmd_benchmark(bench, preset, budget, seeds, n_init, dim, first_seed);
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) std::cerr << "error: " << v << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error (" << e.code() << "): " << e.what() << "\n";
    return status_for_code(e.code()) < 500 ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
