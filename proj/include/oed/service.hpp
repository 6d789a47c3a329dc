#pragma once

#include <oed/scheduler.hpp>
#include <oed/store.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace oed {

enum class Role { technician, scientist, manager };
std::string to_string(Role role);
Role parse_role(const std::string& text);

enum class Action {
  view,
  claim,
  submit,
  create_experiment,
  configure,
  control_runs,
  predict,
  export_archive,
  manage_users,
  delete_experiment,
};
std::string to_string(Action action);

/// Nested capabilities: manager covers scientist covers technician.
bool allowed(Role role, Action action);

struct UserAccount {
  std::string username;
  Role role = Role::technician;
  std::string token;
};

/// Accounts backed by a JSON file {"users": [{"username", "role", "token"}]}.
class UserDirectory {
 public:
  explicit UserDirectory(std::filesystem::path file);
  std::optional<UserAccount> authenticate(const std::string& token) const;
  /// Adds an account, generating a token when none is given. ConflictError on
  /// a duplicate username or token.
  UserAccount add(UserAccount account);
  std::vector<UserAccount> list() const;

 private:
  void save() const;
  std::filesystem::path file_;
  mutable std::mutex mutex_;
  std::vector<UserAccount> users_;
};

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string authorization;    // raw Authorization header
  std::string idempotency_key;  // raw Idempotency-Key header
  std::string body;
};

struct HttpResponse {
  int status = 200;
  nlohmann::json body = nlohmann::json::object();
};

struct ServiceOptions {
  std::filesystem::path db_root;
  std::filesystem::path users_file;
  // Evaluation programs runs may name, keyed by the name clients use.
  std::map<std::string, std::string> programs;
  double manual_poll_seconds = 0.05;
};

/// The /v1 API. `handle` is transport-free; `listen` serves it over HTTP.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  HttpResponse handle(const HttpRequest& request);

  /// Binds and serves until `stop()`; returns false if the port is unavailable.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and serves on a background thread.
  int listen_in_background(const std::string& host = "127.0.0.1");
  void stop();

  /// Waits for a running scheduler of `experiment` to finish.
  void join_run(std::int64_t experiment);

 private:
  struct Run;
  HttpResponse route(const HttpRequest& request, const UserAccount& user);
  HttpResponse dispatch(const HttpRequest& request, const UserAccount& user);
  nlohmann::json scheduler_json(std::int64_t id, Experiment& e);
  HttpResponse start_run(std::int64_t id, const nlohmann::json& body);
  HttpResponse stop_run(std::int64_t id, bool hard);

  ServiceOptions options_;
  Catalog catalog_;
  UserDirectory users_;
  std::mutex runs_mutex_;
  std::map<std::int64_t, std::shared_ptr<Run>> runs_;
  std::mutex idempotency_mutex_;
  struct Http;
  std::unique_ptr<Http> http_;
  std::thread server_thread_;
};

/// HTTP status for an oed::Error code; 500 for anything not caused by the caller.
int status_for_code(const std::string& code);

/// JSON views shared by the API and the command line.
nlohmann::json record_json(const Problem& problem, const Record& record);
nlohmann::json statistics_json(const Statistics& statistics);

}  // namespace oed
