#pragma once

#include <oed/optimizer.hpp>
#include <oed/problem.hpp>
#include <oed/surrogate.hpp>

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

struct sqlite3;

namespace oed {

constexpr int kSchemaVersion = 1;

enum class RecordStatus { pending, in_evaluation, evaluated, failed };
enum class RecordSource { initial, suggested, manual };

std::string to_string(RecordStatus status);
std::string to_string(RecordSource source);
RecordStatus parse_status(const std::string& text);
RecordSource parse_source(const std::string& text);

/// pending -> in_evaluation -> {evaluated, failed}, and pending -> evaluated.
bool is_legal_transition(RecordStatus from, RecordStatus to);

using Timestamp = std::int64_t;  // UTC milliseconds since the epoch

Timestamp now_ms();

struct Record {
  std::int64_t id = 0;
  RecordStatus status = RecordStatus::pending;
  RecordSource source = RecordSource::suggested;
  int iteration = 0;
  Design design;
  std::optional<Vector> objectives;  // user senses and units
  Timestamp requested_at = 0;
  std::optional<Timestamp> started_at;
  std::optional<Timestamp> finished_at;
  std::string worker;
  std::string note;

  bool operator==(const Record& other) const;
};

/// What a transition carries besides the target status.
struct TransitionPayload {
  std::optional<Vector> objectives;
  std::string worker;
  std::string note;
  std::string actor;
};

struct LogEntry {
  std::int64_t seq = 0;
  Timestamp timestamp = 0;
  std::int64_t record_id = 0;
  std::string transition;  // "insert" or the target status
  std::string actor;
  std::string payload;  // JSON document

  bool operator==(const LogEntry&) const = default;
};

/// Folds a log into the record states it describes. Throws IntegrityError if
/// the log contains an illegal or malformed step.
std::vector<Record> replay_log(const Problem& problem, const std::vector<LogEntry>& log);

struct RecordFilter {
  std::optional<RecordStatus> status;
  std::optional<RecordSource> source;
  std::optional<int> iteration;
};

struct Statistics {
  int pending = 0, in_evaluation = 0, evaluated = 0, failed = 0;
  std::vector<std::int64_t> front;  // ids of non-dominated evaluated records
  Vector reference;                 // user units; empty without evaluated records
  std::vector<std::pair<int, double>> hypervolume;  // (iteration, hypervolume so far)
};

/// One experiment: a single SQLite file (or ":memory:") holding the problem,
/// run configuration, records, the append-only log, and fitted models.
/// Every method is serialized on an internal mutex.
class Experiment {
 public:
  static std::shared_ptr<Experiment> create(const std::string& path, const std::string& name, const Problem& problem,
                                            const RunConfig& config);
  static std::shared_ptr<Experiment> open(const std::string& path);
  ~Experiment();
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  const std::string& name() const { return name_; }
  const std::string& path() const { return path_; }
  const Problem& problem() const { return problem_; }
  RunConfig run_config() const;
  void set_run_config(const RunConfig& config);

  /// Free-form persisted settings, such as the outcome of the last run.
  void set_attribute(const std::string& key, const std::string& value);
  std::optional<std::string> attribute(const std::string& key) const;

  /// All-or-nothing: every design is validated before any row is written.
  std::vector<std::int64_t> insert_pending(const std::vector<Design>& designs, RecordSource source, int iteration,
                                           const std::string& actor = "system");

  /// Applies one status change. StateError when illegal, ValidationError on
  /// bad objectives, NotFoundError for an unknown id.
  Record transition(std::int64_t id, RecordStatus to, const TransitionPayload& payload = {});

  /// Atomically moves the oldest pending record to in_evaluation.
  std::optional<Record> claim_next(const std::string& worker, const std::string& actor = "worker");

  Record get(std::int64_t id) const;
  std::vector<Record> query(const RecordFilter& filter = {}) const;
  std::vector<LogEntry> log() const;
  std::int64_t record_count() const;
  int max_iteration() const;

  /// Statistics over evaluated records. The hypervolume reference defaults to
  /// the reference point of all evaluated results.
  Statistics statistics(const std::optional<Vector>& reference = std::nullopt) const;

  void save_models(int iteration, const std::vector<GaussianProcess>& models);
  /// Models from the most recent iteration that saved any.
  std::vector<GaussianProcess> latest_models() const;

  /// Writes problem.conf, config.conf, records.csv and log.csv into `dir`.
  void export_archive(const std::filesystem::path& dir) const;
  /// Rebuilds an experiment at `path` from an archive. Nothing is created
  /// unless the archive is complete and self-consistent.
  static std::shared_ptr<Experiment> import_archive(const std::filesystem::path& dir, const std::string& path);

 private:
  Experiment() = default;
  void exec(const std::string& sql) const;
  void load_meta();
  Timestamp next_timestamp();
  Record read_record(std::int64_t id) const;
  void append_log(Timestamp ts, std::int64_t record_id, const std::string& transition, const std::string& actor,
                  const nlohmann::json& payload);
  Record apply_transition(std::int64_t id, RecordStatus to, const TransitionPayload& payload);

  sqlite3* db_ = nullptr;
  std::string path_;
  std::string name_;
  Problem problem_;
  Timestamp last_timestamp_ = 0;
  mutable std::recursive_mutex mutex_;
};

struct CatalogEntry {
  std::int64_t id = 0;
  std::string name;
  std::string path;
};

/// A directory of experiments indexed by a small catalog database that also
/// keeps replayable request responses. Experiment names are unique.
class Catalog {
 public:
  explicit Catalog(const std::filesystem::path& root);
  ~Catalog();
  Catalog(const Catalog&) = delete;
  Catalog& operator=(const Catalog&) = delete;

  /// ConflictError on a duplicate name; nothing is persisted if the problem
  /// or configuration is invalid.
  CatalogEntry create(const std::string& name, const Problem& problem, const RunConfig& config);
  std::shared_ptr<Experiment> open(std::int64_t id);
  CatalogEntry entry(std::int64_t id) const;
  std::vector<CatalogEntry> list() const;
  void remove(std::int64_t id);

  std::optional<std::string> stored_response(const std::string& key) const;
  void store_response(const std::string& key, const std::string& response);

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  sqlite3* db_ = nullptr;
  mutable std::recursive_mutex mutex_;
  std::map<std::int64_t, std::shared_ptr<Experiment>> open_;
};

/// Observations and known designs the optimizer needs, from evaluated and
/// non-evaluated records respectively.
OptimizerState optimizer_state(const std::vector<Record>& records);

std::string records_csv(const Problem& problem, const std::vector<Record>& records);

}  // namespace oed
