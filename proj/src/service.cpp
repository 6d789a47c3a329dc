#include <oed/benchmarks.hpp>
#include <oed/process.hpp>
#include <oed/service.hpp>

#include <httplib.h>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace oed {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Role role) {
  switch (role) {
    case Role::technician: return "technician";
    case Role::scientist: return "scientist";
    case Role::manager: return "manager";
  }
  return "?";
}

Role parse_role(const std::string& text) {
  for (auto r : {Role::technician, Role::scientist, Role::manager})
    if (to_string(r) == text) return r;
  throw ValidationError("role: unknown role '" + text + "'");
}

std::string to_string(Action action) {
  switch (action) {
    case Action::view: return "view";
    case Action::claim: return "claim";
    case Action::submit: return "submit";
    case Action::create_experiment: return "create_experiment";
    case Action::configure: return "configure";
    case Action::control_runs: return "control_runs";
    case Action::predict: return "predict";
    case Action::export_archive: return "export";
    case Action::manage_users: return "manage_users";
    case Action::delete_experiment: return "delete_experiment";
  }
  return "?";
}

namespace {

Role minimum_role(Action action) {
  switch (action) {
    case Action::view:
    case Action::claim:
    case Action::submit: return Role::technician;
    case Action::create_experiment:
    case Action::configure:
    case Action::control_runs:
    case Action::predict:
    case Action::export_archive: return Role::scientist;
    case Action::manage_users:
    case Action::delete_experiment: return Role::manager;
  }
  return Role::manager;
}

std::string random_token() {
  std::random_device rd;
  std::ostringstream ss;
  for (int i = 0; i < 4; ++i) ss << std::hex << std::setw(8) << std::setfill('0') << rd();
  return ss.str();
}

}  // namespace

bool allowed(Role role, Action action) { return static_cast<int>(role) >= static_cast<int>(minimum_role(action)); }

UserDirectory::UserDirectory(fs::path file) : file_(std::move(file)) {
  if (!fs::exists(file_)) {
    save();
    return;
  }
  std::ifstream in(file_);
  try {
    const json doc = json::parse(in);
    for (const auto& u : doc.at("users"))
      users_.push_back({u.at("username").get<std::string>(), parse_role(u.at("role").get<std::string>()),
                        u.at("token").get<std::string>()});
  } catch (const json::exception& e) {
    throw ConfigurationError("users file " + file_.string() + ": " + e.what());
  }
}

std::optional<UserAccount> UserDirectory::authenticate(const std::string& token) const {
  if (token.empty()) return std::nullopt;
  std::lock_guard lock(mutex_);
  for (const auto& u : users_)
    if (u.token == token) return u;
  return std::nullopt;
}

UserAccount UserDirectory::add(UserAccount account) {
  if (account.username.empty()) throw ValidationError("username: must not be empty");
  if (account.token.empty()) account.token = random_token();
  std::lock_guard lock(mutex_);
  for (const auto& u : users_) {
    if (u.username == account.username) throw ConflictError("user '" + account.username + "' exists");
    if (u.token == account.token) throw ConflictError("token already in use");
  }
  users_.push_back(account);
  save();
  return account;
}

std::vector<UserAccount> UserDirectory::list() const {
  std::lock_guard lock(mutex_);
  return users_;
}

void UserDirectory::save() const {
  json doc{{"users", json::array()}};
  for (const auto& u : users_)
    doc["users"].push_back({{"username", u.username}, {"role", to_string(u.role)}, {"token", u.token}});
  const auto tmp = file_.string() + ".tmp";
  std::ofstream(tmp) << doc.dump(2) << "\n";
  fs::rename(tmp, file_);
}

json record_json(const Problem& problem, const Record& r) {
  json j{{"id", r.id},
         {"status", to_string(r.status)},
         {"source", to_string(r.source)},
         {"iteration", r.iteration},
         {"design", design_to_json(problem, r.design)},
         {"objectives", nullptr},
         {"requested_at", r.requested_at},
         {"started_at", nullptr},
         {"finished_at", nullptr},
         {"worker", r.worker},
         {"note", r.note}};
  if (r.objectives) j["objectives"] = std::vector<double>(r.objectives->data(), r.objectives->data() + r.objectives->size());
  if (r.started_at) j["started_at"] = *r.started_at;
  if (r.finished_at) j["finished_at"] = *r.finished_at;
  return j;
}

json statistics_json(const Statistics& st) {
  json j{{"counts",
          {{"pending", st.pending}, {"in_evaluation", st.in_evaluation}, {"evaluated", st.evaluated}, {"failed", st.failed}}},
         {"front", st.front},
         {"reference", nullptr},
         {"hypervolume", json::array()}};
  if (st.reference.size() > 0)
    j["reference"] = std::vector<double>(st.reference.data(), st.reference.data() + st.reference.size());
  for (const auto& [it, hv] : st.hypervolume) j["hypervolume"].push_back({{"iteration", it}, {"value", hv}});
  return j;
}

// ---------------------------------------------------------------------------

struct Service::Run {
  StopSignal stop;
  std::mutex mutex;
  SchedulerState state;
  std::atomic<bool> done{false};
  std::thread thread;
};

struct Service::Http {
  httplib::Server server;
};

namespace {

HttpResponse error_response(int status, const std::string& code, const std::string& detail) {
  return {status, {{"error", code}, {"detail", detail}}};
}


std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::int64_t parse_id(const std::string& s) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v <= 0) throw NotFoundError("no resource '" + s + "'");
  return v;
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw ValidationError("body: expected a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("body: malformed JSON: ") + e.what());
  }
}

template <typename T>
T field(const json& body, const char* name, T fallback) {
  if (!body.contains(name) || body[name].is_null()) return fallback;
  try {
    return body[name].get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(name) + ": wrong type");
  }
}

json predictions_json(const Problem& problem, const std::vector<Posterior>& posts) {
  json out = json::array();
  for (std::size_t j = 0; j < posts.size(); ++j)
    out.push_back({{"objective", problem.objectives[j].name},
                   {"mean", posts[j].mean},
                   {"std", std::sqrt(std::max(posts[j].variance, 0.0))}});
  return out;
}

std::vector<GaussianProcess> usable_models(Experiment& e) {
  auto models = e.latest_models();
  if (static_cast<int>(models.size()) == e.problem().num_objectives()) return models;
  return {};
}

}  // namespace

int status_for_code(const std::string& code) {
  if (code == "validation" || code == "dimension" || code == "encoding" || code == "configuration" ||
      code == "integrity" || code == "schema_version")
    return 422;
  if (code == "not_found") return 404;
  if (code == "conflict" || code == "illegal_transition" || code == "no_model" || code == "precondition" ||
      code == "insufficient_data" || code == "infeasible_space")
    return 409;
  return 500;
}

Service::Service(ServiceOptions options)
    : options_(std::move(options)), catalog_(options_.db_root), users_(options_.users_file) {}

Service::~Service() {
  stop();
  std::map<std::int64_t, std::shared_ptr<Run>> runs;
  {
    std::lock_guard lock(runs_mutex_);
    runs.swap(runs_);
  }
  for (auto& [_, run] : runs) {
    run->stop.request(true);
    if (run->thread.joinable()) run->thread.join();
  }
}

HttpResponse Service::handle(const HttpRequest& request) {
  const std::string prefix = "Bearer ";
  const std::string token =
      request.authorization.rfind(prefix, 0) == 0 ? request.authorization.substr(prefix.size()) : std::string();
  const auto user = users_.authenticate(token);
  if (!user) return error_response(401, "unauthenticated", "missing or invalid bearer token");

  const bool mutating = request.method == "POST" || request.method == "PUT" || request.method == "DELETE";
  if (!mutating || request.idempotency_key.empty()) return route(request, *user);

  const std::string key = user->username + " " + request.method + " " + request.path + " " + request.idempotency_key;
  std::lock_guard lock(idempotency_mutex_);
  if (auto stored = catalog_.stored_response(key)) {
    const json j = json::parse(*stored);
    return {j.at("status").get<int>(), j.at("body")};
  }
  auto response = route(request, *user);
  if (response.status < 500) catalog_.store_response(key, json{{"status", response.status}, {"body", response.body}}.dump());
  return response;
}

HttpResponse Service::route(const HttpRequest& request, const UserAccount& user) {
  try {
    return dispatch(request, user);
  } catch (const ValidationError& e) {
    auto r = error_response(422, e.code(), e.what());
    r.body["violations"] = e.violations();
    return r;
  } catch (const Error& e) {
    return error_response(status_for_code(e.code()), e.code(), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

HttpResponse Service::dispatch(const HttpRequest& req, const UserAccount& user) {
  const auto seg = split_path(req.path);
  const std::string& m = req.method;
  auto require = [&](Action action) {
    if (!allowed(user.role, action))
      throw std::pair<int, std::string>(403, "role " + to_string(user.role) + " may not " + to_string(action));
  };
  auto method_not_allowed = [] { return error_response(405, "method_not_allowed", "method not allowed"); };

  try {
    if (seg.empty() || seg[0] != "v1") return error_response(404, "not_found", "unknown path");
    const std::size_t n = seg.size();

    if (n == 2 && seg[1] == "me") {
      if (m != "GET") return method_not_allowed();
      require(Action::view);
      json allowed_actions = json::array();
      for (auto a : {Action::view, Action::claim, Action::submit, Action::create_experiment, Action::configure,
                     Action::control_runs, Action::predict, Action::export_archive, Action::manage_users,
                     Action::delete_experiment})
        if (allowed(user.role, a)) allowed_actions.push_back(to_string(a));
      return {200, {{"username", user.username}, {"role", to_string(user.role)}, {"actions", allowed_actions}}};
    }

    if (n == 2 && seg[1] == "users") {
      require(Action::manage_users);
      if (m == "GET") {
        json list = json::array();
        for (const auto& u : users_.list()) list.push_back({{"username", u.username}, {"role", to_string(u.role)}});
        return {200, {{"users", list}}};
      }
      if (m != "POST") return method_not_allowed();
      const json body = parse_body(req.body);
      UserAccount account{field<std::string>(body, "username", ""),
                          parse_role(field<std::string>(body, "role", "technician")),
                          field<std::string>(body, "token", "")};
      account = users_.add(account);
      return {201, {{"username", account.username}, {"role", to_string(account.role)}, {"token", account.token}}};
    }

    if (n == 2 && seg[1] == "experiments") {
      if (m == "GET") {
        require(Action::view);
        json list = json::array();
        for (const auto& e : catalog_.list()) list.push_back({{"id", e.id}, {"name", e.name}});
        return {200, {{"experiments", list}}};
      }
      if (m != "POST") return method_not_allowed();
      require(Action::create_experiment);
      const json body = parse_body(req.body);
      if (!body.contains("problem")) throw ValidationError("problem: required");
      Problem problem = problem_from_json(body["problem"]);
      std::vector<std::string> violations;
      for (auto& c : problem.constraints) {
        if (c.is_linear()) continue;
        auto& bb = std::get<BlackboxConstraint>(c.form);
        if (auto it = options_.programs.find(bb.program); it != options_.programs.end()) {
          bb.program = it->second;
          continue;
        }
        bool registered = false;
        for (const auto& [_, path] : options_.programs) registered = registered || path == bb.program;
        if (!registered) violations.push_back("constraints." + c.name + ": program is not registered with the server");
      }
      if (!violations.empty()) throw ValidationError(violations);
      const RunConfig config = body.contains("config") ? run_config_from_json(body["config"]) : RunConfig{};
      const auto entry = catalog_.create(field<std::string>(body, "name", ""), problem, config);
      return {201, {{"id", entry.id}, {"name", entry.name}}};
    }

    if (n == 4 && seg[1] == "records" && seg[3] == "result") {
      if (m != "POST") return method_not_allowed();
      require(Action::submit);
      const std::int64_t rid = parse_id(seg[2]);
      const json body = parse_body(req.body);
      if (!body.contains("experiment")) throw ValidationError("experiment: required");
      auto e = catalog_.open(field<std::int64_t>(body, "experiment", 0));
      const Record current = e->get(rid);
      const std::string worker = field<std::string>(body, "worker", user.username);
      if (current.status == RecordStatus::in_evaluation && current.worker != worker)
        throw StateError("record " + std::to_string(rid) + " is claimed by '" + current.worker + "'");
      TransitionPayload payload;
      payload.actor = user.username;
      payload.note = field<std::string>(body, "note", "");
      Record updated;
      if (body.contains("objectives")) {
        const auto& arr = body["objectives"];
        if (!arr.is_array()) throw ValidationError("objectives: expected an array");
        Vector y(static_cast<Eigen::Index>(arr.size()));
        for (std::size_t j = 0; j < arr.size(); ++j) {
          if (!arr[j].is_number()) throw ValidationError("objectives: values must be finite numbers");
          y(static_cast<Eigen::Index>(j)) = arr[j].get<double>();
        }
        payload.objectives = y;
        updated = e->transition(rid, RecordStatus::evaluated, payload);
      } else if (body.contains("failure")) {
        const auto reason = field<std::string>(body, "failure", "");
        payload.note = payload.note.empty() ? reason : reason + "\n" + payload.note;
        updated = e->transition(rid, RecordStatus::failed, payload);
      } else {
        throw ValidationError("body: expected \"objectives\" or \"failure\"");
      }
      return {200, {{"record", record_json(e->problem(), updated)}}};
    }

    if (n >= 3 && seg[1] == "experiments") {
      const std::int64_t id = parse_id(seg[2]);
      const std::string tail = n == 3 ? "" : seg[3];
      if (n > 4) return error_response(404, "not_found", "unknown path");

      if (tail.empty()) {
        if (m == "GET") {
          require(Action::view);
          auto e = catalog_.open(id);
          return {200,
                  {{"id", id},
                   {"name", e->name()},
                   {"problem", problem_to_json(e->problem())},
                   {"config", run_config_to_json(e->run_config())}}};
        }
        if (m != "DELETE") return method_not_allowed();
        require(Action::delete_experiment);
        catalog_.entry(id);
        std::shared_ptr<Run> run;
        {
          std::lock_guard lock(runs_mutex_);
          if (auto it = runs_.find(id); it != runs_.end()) {
            run = it->second;
            runs_.erase(it);
          }
        }
        if (run) {
          run->stop.request(true);
          if (run->thread.joinable()) run->thread.join();
        }
        catalog_.remove(id);
        return {204, nullptr};
      }
      if (tail == "status") {
        if (m != "GET") return method_not_allowed();
        require(Action::view);
        auto e = catalog_.open(id);
        json records = json::array();
        for (const auto& r : e->query()) records.push_back(record_json(e->problem(), r));
        return {200,
                {{"id", id},
                 {"name", e->name()},
                 {"records", records},
                 {"statistics", statistics_json(e->statistics())},
                 {"scheduler", scheduler_json(id, *e)}}};
      }
      if (tail == "suggestions") {
        if (m != "GET") return method_not_allowed();
        require(Action::view);
        auto e = catalog_.open(id);
        const auto models = usable_models(*e);
        json out = json::array();
        for (const auto& r : e->query({RecordStatus::pending, std::nullopt, std::nullopt})) {
          if (r.source == RecordSource::manual) continue;
          json item{{"record", record_json(e->problem(), r)}, {"predicted", nullptr}};
          if (!models.empty())
            item["predicted"] = predictions_json(e->problem(), predict_design(models, e->problem(), r.design));
          out.push_back(item);
        }
        return {200, {{"suggestions", out}}};
      }
      if (tail == "config") {
        if (m == "GET") {
          require(Action::view);
          return {200, {{"config", run_config_to_json(catalog_.open(id)->run_config())}}};
        }
        if (m != "PUT") return method_not_allowed();
        require(Action::configure);
        auto e = catalog_.open(id);
        e->set_run_config(run_config_from_json(parse_body(req.body)));
        return {200, {{"config", run_config_to_json(e->run_config())}}};
      }
      if (tail == "runs") {
        require(Action::control_runs);
        catalog_.entry(id);
        if (m == "POST") return start_run(id, parse_body(req.body));
        if (m == "DELETE") {
          const auto it = req.query.find("hard");
          return stop_run(id, it != req.query.end() && (it->second == "true" || it->second == "1"));
        }
        return method_not_allowed();
      }
      if (tail == "claim") {
        if (m != "POST") return method_not_allowed();
        require(Action::claim);
        auto e = catalog_.open(id);
        const std::string worker = field<std::string>(parse_body(req.body), "worker", user.username);
        if (auto r = e->claim_next(worker, user.username))
          return {200, {{"status", "claimed"}, {"record", record_json(e->problem(), *r)}}};
        auto resp = error_response(409, "none_pending", "no pending records");
        resp.body["status"] = "none_pending";
        return resp;
      }
      if (tail == "predict") {
        if (m != "POST") return method_not_allowed();
        require(Action::predict);
        auto e = catalog_.open(id);
        const json body = parse_body(req.body);
        if (!body.contains("design")) throw ValidationError("design: required");
        const Design design = design_from_json(e->problem(), body["design"]);
        if (auto v = validate_design(e->problem(), design); !v.empty()) throw ValidationError(v);
        auto models = usable_models(*e);
        if (models.empty()) {
          const auto state = optimizer_state(e->query());
          if (state.evaluated.size() < 2) throw NoModelError("predictions need at least two evaluated records");
          const auto config = e->run_config();
          models = fit_models(e->problem(), state.evaluated, config.surrogate, config.seed);
        }
        return {200, {{"predictions", predictions_json(e->problem(), predict_design(models, e->problem(), design))}}};
      }
      if (tail == "export") {
        if (m != "GET") return method_not_allowed();
        require(Action::export_archive);
        auto e = catalog_.open(id);
        const fs::path dir = fs::temp_directory_path() / ("oed-export-" + random_token());
        json files = json::object();
        try {
          e->export_archive(dir);
          for (const char* f : {"problem.conf", "config.conf", "records.csv", "log.csv"}) {
            std::ifstream in(dir / f, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            files[f] = ss.str();
          }
        } catch (...) {
          fs::remove_all(dir);
          throw;
        }
        fs::remove_all(dir);
        return {200, {{"name", e->name()}, {"files", files}}};
      }
    }
    return error_response(404, "not_found", "unknown path");
  } catch (const std::pair<int, std::string>& denied) {
    return error_response(denied.first, "forbidden", denied.second);
  }
}

json Service::scheduler_json(std::int64_t id, Experiment& e) {
  std::shared_ptr<Run> run;
  {
    std::lock_guard lock(runs_mutex_);
    if (auto it = runs_.find(id); it != runs_.end()) run = it->second;
  }
  if (run && !run->done) {
    std::lock_guard lock(run->mutex);
    const auto& st = run->state;
    return {{"state", st.stopping == StopReason::none ? "running" : "stopping"},
            {"mode", to_string(st.mode)},
            {"in_flight", st.in_flight},
            {"budget_remaining", st.budget_remaining},
            {"iteration", st.iteration},
            {"stopping", to_string(st.stopping)},
            {"diagnostics", st.diagnostics}};
  }
  json out{{"state", "idle"}};
  if (auto last = e.attribute("last_run")) out["last_run"] = json::parse(*last);
  return out;
}

HttpResponse Service::start_run(std::int64_t id, const json& body) {
  auto e = catalog_.open(id);
  std::lock_guard lock(runs_mutex_);
  if (auto it = runs_.find(id); it != runs_.end()) {
    if (!it->second->done) throw ConflictError("a run is already active for experiment " + std::to_string(id));
    if (it->second->thread.joinable()) it->second->thread.join();
    runs_.erase(it);
  }

  if (body.contains("config")) {
    json merged = run_config_to_json(e->run_config());
    if (!body["config"].is_object()) throw ValidationError("config: expected an object");
    merged.update(body["config"]);
    e->set_run_config(run_config_from_json(merged));
  }
  const RunConfig config = e->run_config();

  const std::string evaluator = field<std::string>(body, "evaluator", "manual");
  EvaluatorBinding binding;
  if (evaluator == "manual") {
    binding = EvaluatorBinding::manual();
  } else if (is_benchmark(evaluator)) {
    const int dim = static_cast<int>(e->problem().variables.size());
    const auto bench = make_benchmark(evaluator, dim);
    if (problem_to_json(bench.problem)["variables"] != problem_to_json(e->problem())["variables"] ||
        bench.problem.num_objectives() != e->problem().num_objectives())
      throw ValidationError("evaluator: builtin '" + evaluator + "' does not match the experiment's problem");
    binding = EvaluatorBinding::inline_function(benchmark_evaluator(evaluator, dim));
  } else if (auto it = options_.programs.find(evaluator); it != options_.programs.end()) {
    binding = EvaluatorBinding::external(it->second, field<double>(body, "timeout", 24 * 3600.0));
    check_program(binding.program);
  } else {
    throw ValidationError("evaluator: '" + evaluator + "' is neither manual, a builtin, nor a registered program");
  }

  auto run = std::make_shared<Run>();
  run->state.mode = config.eval_mode;
  run->state.running = true;
  SchedulerOptions opts;
  opts.poll_seconds = options_.manual_poll_seconds;
  opts.on_change = [run](const SchedulerState& st) {
    std::lock_guard l(run->mutex);
    run->state = st;
  };
  run->thread = std::thread([run, e, config, binding, opts] {
    json summary;
    try {
      const auto res = run_scheduler(*e, config, binding, run->stop, opts);
      summary = {{"stopping", to_string(res.state.stopping)},
                 {"iteration", res.state.iteration},
                 {"budget_remaining", res.state.budget_remaining},
                 {"diagnostics", res.state.diagnostics}};
    } catch (const std::exception& ex) {
      summary = {{"stopping", to_string(StopReason::aborted)}, {"diagnostics", ex.what()}};
    }
    try {
      e->set_attribute("last_run", summary.dump());
    } catch (const std::exception&) {
    }
    run->done = true;
  });
  runs_[id] = run;
  return {202, {{"scheduler", {{"state", "running"}, {"mode", to_string(config.eval_mode)}}}}};
}

HttpResponse Service::stop_run(std::int64_t id, bool hard) {
  std::shared_ptr<Run> run;
  {
    std::lock_guard lock(runs_mutex_);
    if (auto it = runs_.find(id); it != runs_.end() && !it->second->done) run = it->second;
  }
  if (!run) throw ConflictError("no active run for experiment " + std::to_string(id));
  run->stop.request(hard);
  std::lock_guard lock(run->mutex);
  return {202,
          {{"scheduler",
            {{"state", "stopping"}, {"in_flight", run->state.in_flight}, {"hard", hard}}}}};
}

void Service::join_run(std::int64_t id) {
  std::shared_ptr<Run> run;
  {
    std::lock_guard lock(runs_mutex_);
    if (auto it = runs_.find(id); it != runs_.end()) run = it->second;
  }
  if (run && run->thread.joinable()) run->thread.join();
}

namespace {

void serve(httplib::Server& server, Service& service) {
  auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query[k] = v;
    r.authorization = req.get_header_value("Authorization");
    r.idempotency_key = req.get_header_value("Idempotency-Key");
    r.body = req.body;
    const auto out = service.handle(r);
    res.status = out.status;
    if (out.status != 204) res.set_content(out.body.dump(), "application/json");
  };
  server.Get(".*", handler);
  server.Post(".*", handler);
  server.Put(".*", handler);
  server.Delete(".*", handler);
}

}  // namespace

bool Service::listen(const std::string& host, int port) {
  http_ = std::make_unique<Http>();
  serve(http_->server, *this);
  return http_->server.listen(host, port);
}

int Service::listen_in_background(const std::string& host) {
  http_ = std::make_unique<Http>();
  serve(http_->server, *this);
  const int port = http_->server.bind_to_any_port(host);
  if (port < 0) throw ConfigurationError("cannot bind " + host);
  server_thread_ = std::thread([this] { http_->server.listen_after_bind(); });
  http_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  if (http_) http_->server.stop();
  if (server_thread_.joinable()) server_thread_.join();
}

}  // namespace oed
