#include <oed/csv.hpp>
#include <oed/pareto.hpp>
#include <oed/store.hpp>

#include <nlohmann/json.hpp>
#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace oed {

using nlohmann::json;

namespace {

class Statement {
 public:
  Statement(sqlite3* db, const std::string& sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt_, nullptr) != SQLITE_OK)
      throw IntegrityError(std::string("sqlite prepare: ") + sqlite3_errmsg(db));
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int i, std::int64_t v) {
    sqlite3_bind_int64(stmt_, i, v);
    return *this;
  }
  Statement& bind(int i, const std::string& v) {
    sqlite3_bind_text(stmt_, i, v.c_str(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Statement& bind_null(int i) {
    sqlite3_bind_null(stmt_, i);
    return *this;
  }
  template <typename T>
  Statement& bind(int i, const std::optional<T>& v) {
    return v ? bind(i, *v) : bind_null(i);
  }

  // True while rows remain.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw IntegrityError(std::string("sqlite step: ") + sqlite3_errmsg(db_));
  }
  void run() {
    while (step()) {
    }
  }

  bool is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }
  std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }
  std::optional<std::int64_t> optional_integer(int col) const {
    return is_null(col) ? std::nullopt : std::optional<std::int64_t>(integer(col));
  }
  std::string text(int col) const {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
    return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col))) : std::string();
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

class Transaction {
 public:
  explicit Transaction(sqlite3* db) : db_(db) { exec("BEGIN IMMEDIATE"); }
  ~Transaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    exec("COMMIT");
    done_ = true;
  }

 private:
  void exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown";
      sqlite3_free(err);
      throw IntegrityError("sqlite: " + msg);
    }
  }
  sqlite3* db_;
  bool done_ = false;
};

const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS records (
  id INTEGER PRIMARY KEY AUTOINCREMENT,
  status TEXT NOT NULL,
  source TEXT NOT NULL,
  iteration INTEGER NOT NULL,
  design TEXT NOT NULL,
  objectives TEXT,
  requested_at INTEGER NOT NULL,
  started_at INTEGER,
  finished_at INTEGER,
  worker TEXT NOT NULL DEFAULT '',
  note TEXT NOT NULL DEFAULT ''
);
CREATE TABLE IF NOT EXISTS log (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  timestamp INTEGER NOT NULL,
  record_id INTEGER NOT NULL,
  transition TEXT NOT NULL,
  actor TEXT NOT NULL,
  payload TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS models (
  iteration INTEGER NOT NULL,
  objective INTEGER NOT NULL,
  model TEXT NOT NULL,
  PRIMARY KEY (iteration, objective)
);
)sql";

const char* kRecordColumns =
    "id, status, source, iteration, design, objectives, requested_at, started_at, finished_at, worker, note";

json objectives_json(const Vector& y) { return std::vector<double>(y.data(), y.data() + y.size()); }

Vector objectives_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_objectives(const Problem& problem, const Vector& y) {
  if (y.size() != problem.num_objectives())
    throw ValidationError("objectives: expected " + std::to_string(problem.num_objectives()) + " values, got " +
                          std::to_string(y.size()));
  if (!y.allFinite()) throw ValidationError("objectives: values must be finite");
}

// The one place that says how a transition changes a record; used both live
// and during replay.
void apply(Record& r, RecordStatus to, Timestamp ts, const json& payload) {
  r.status = to;
  if (to == RecordStatus::in_evaluation) r.started_at = ts;
  else r.finished_at = ts;
  if (payload.contains("objectives")) r.objectives = objectives_from_json(payload.at("objectives"));
  if (payload.contains("worker")) r.worker = payload.at("worker").get<std::string>();
  if (payload.contains("note")) r.note = payload.at("note").get<std::string>();
}

json transition_payload(const TransitionPayload& p) {
  json j = json::object();
  if (p.objectives) j["objectives"] = objectives_json(*p.objectives);
  if (!p.worker.empty()) j["worker"] = p.worker;
  if (!p.note.empty()) j["note"] = p.note;
  return j;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("archive: missing " + path.filename().string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IntegrityError("cannot write " + path.string());
  out << content;
}

std::string optional_text(const std::optional<Timestamp>& t) { return t ? std::to_string(*t) : std::string(); }

std::int64_t parse_int(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IntegrityError(std::string("archive: bad ") + what + " '" + s + "'");
  }
}

std::optional<Timestamp> parse_optional_int(const std::string& s, const char* what) {
  if (s.empty()) return std::nullopt;
  return parse_int(s, what);
}

std::vector<std::string> record_header(const Problem& problem) {
  std::vector<std::string> h{"id", "status", "source", "iteration"};
  for (const auto& v : problem.variables) h.push_back(v.name);
  for (const auto& o : problem.objectives) h.push_back(o.name);
  for (const char* c : {"requested_at", "started_at", "finished_at", "worker", "note"}) h.push_back(c);
  return h;
}

const std::vector<std::string> kLogHeader{"seq", "timestamp", "record_id", "transition", "actor", "payload"};

}  // namespace

std::string to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::pending: return "pending";
    case RecordStatus::in_evaluation: return "in_evaluation";
    case RecordStatus::evaluated: return "evaluated";
    case RecordStatus::failed: return "failed";
  }
  return "?";
}

std::string to_string(RecordSource s) {
  switch (s) {
    case RecordSource::initial: return "initial";
    case RecordSource::suggested: return "suggested";
    case RecordSource::manual: return "manual";
  }
  return "?";
}

RecordStatus parse_status(const std::string& text) {
  for (auto s : {RecordStatus::pending, RecordStatus::in_evaluation, RecordStatus::evaluated, RecordStatus::failed})
    if (to_string(s) == text) return s;
  throw ValidationError("unknown record status '" + text + "'");
}

RecordSource parse_source(const std::string& text) {
  for (auto s : {RecordSource::initial, RecordSource::suggested, RecordSource::manual})
    if (to_string(s) == text) return s;
  throw ValidationError("unknown record source '" + text + "'");
}

bool is_legal_transition(RecordStatus from, RecordStatus to) {
  switch (from) {
    case RecordStatus::pending: return to == RecordStatus::in_evaluation || to == RecordStatus::evaluated;
    case RecordStatus::in_evaluation: return to == RecordStatus::evaluated || to == RecordStatus::failed;
    default: return false;
  }
}

Timestamp now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool Record::operator==(const Record& o) const {
  return id == o.id && status == o.status && source == o.source && iteration == o.iteration && design == o.design &&
         objectives.has_value() == o.objectives.has_value() && (!objectives || *objectives == *o.objectives) &&
         requested_at == o.requested_at && started_at == o.started_at && finished_at == o.finished_at &&
         worker == o.worker && note == o.note;
}

std::vector<Record> replay_log(const Problem& problem, const std::vector<LogEntry>& log) {
  std::map<std::int64_t, Record> records;
  std::int64_t last_seq = 0;
  for (const auto& e : log) {
    if (e.seq <= last_seq) throw IntegrityError("log: sequence numbers must increase");
    last_seq = e.seq;
    json payload;
    try {
      payload = json::parse(e.payload);
    } catch (const json::exception&) {
      throw IntegrityError("log " + std::to_string(e.seq) + ": malformed payload");
    }
    try {
      if (e.transition == "insert") {
        if (records.count(e.record_id) || (!records.empty() && e.record_id <= records.rbegin()->first))
          throw IntegrityError("log " + std::to_string(e.seq) + ": record id not increasing");
        Record r;
        r.id = e.record_id;
        r.source = parse_source(payload.at("source").get<std::string>());
        r.iteration = payload.at("iteration").get<int>();
        r.design = design_from_json(problem, payload.at("design"));
        if (!validate_design(problem, r.design).empty())
          throw IntegrityError("log " + std::to_string(e.seq) + ": invalid design");
        r.requested_at = e.timestamp;
        records.emplace(r.id, std::move(r));
        continue;
      }
      auto it = records.find(e.record_id);
      if (it == records.end()) throw IntegrityError("log " + std::to_string(e.seq) + ": unknown record");
      const RecordStatus to = parse_status(e.transition);
      if (!is_legal_transition(it->second.status, to))
        throw IntegrityError("log " + std::to_string(e.seq) + ": illegal transition");
      apply(it->second, to, e.timestamp, payload);
      if (to == RecordStatus::evaluated) {
        if (!it->second.objectives) throw IntegrityError("log " + std::to_string(e.seq) + ": missing objectives");
        check_objectives(problem, *it->second.objectives);
      }
    } catch (const json::exception& ex) {
      throw IntegrityError("log " + std::to_string(e.seq) + ": " + ex.what());
    } catch (const ValidationError& ex) {
      throw IntegrityError("log " + std::to_string(e.seq) + ": " + ex.what());
    }
  }
  std::vector<Record> out;
  for (auto& [_, r] : records) out.push_back(std::move(r));
  return out;
}

OptimizerState optimizer_state(const std::vector<Record>& records) {
  OptimizerState s;
  for (const auto& r : records) {
    if (r.status == RecordStatus::evaluated) s.evaluated.push_back({r.design, *r.objectives});
    else s.known.push_back(r.design);
  }
  return s;
}

std::string records_csv(const Problem& problem, const std::vector<Record>& records) {
  std::string out = csv::format_row(record_header(problem));
  for (const auto& r : records) {
    std::vector<std::string> row{std::to_string(r.id), to_string(r.status), to_string(r.source),
                                 std::to_string(r.iteration)};
    for (const auto& v : problem.variables) row.push_back(format_value(r.design.values.at(v.name)));
    for (int j = 0; j < problem.num_objectives(); ++j)
      row.push_back(r.objectives ? format_double((*r.objectives)(j)) : std::string());
    row.push_back(std::to_string(r.requested_at));
    row.push_back(optional_text(r.started_at));
    row.push_back(optional_text(r.finished_at));
    row.push_back(r.worker);
    row.push_back(r.note);
    out += csv::format_row(row);
  }
  return out;
}

// ---------------------------------------------------------------------------

Experiment::~Experiment() {
  if (db_) sqlite3_close(db_);
}

void Experiment::exec(const std::string& sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    throw IntegrityError("sqlite: " + msg);
  }
}

namespace {

sqlite3* open_db(const std::string& path, bool create) {
  sqlite3* db = nullptr;
  const int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_FULLMUTEX | (create ? SQLITE_OPEN_CREATE : 0);
  if (sqlite3_open_v2(path.c_str(), &db, flags, nullptr) != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close(db);
    throw NotFoundError("cannot open experiment database '" + path + "': " + msg);
  }
  sqlite3_busy_timeout(db, 5000);
  return db;
}

bool is_memory(const std::string& path) { return path == ":memory:" || path.empty(); }

}  // namespace

std::shared_ptr<Experiment> Experiment::create(const std::string& path, const std::string& name,
                                               const Problem& problem, const RunConfig& config) {
  require_valid(problem);
  if (auto v = validate(config); !v.empty()) throw ValidationError(std::move(v));
  if (name.empty()) throw ValidationError("experiment name must not be empty");
  if (!is_memory(path) && std::filesystem::exists(path))
    throw ConflictError("experiment database already exists: " + path);

  std::shared_ptr<Experiment> e(new Experiment());
  e->path_ = is_memory(path) ? ":memory:" : path;
  e->db_ = open_db(e->path_, true);
  try {
    e->exec(kSchema);
    e->exec("PRAGMA journal_mode=WAL");
    Transaction tx(e->db_);
    const std::pair<std::string, std::string> rows[] = {
        {"schema_version", std::to_string(kSchemaVersion)},
        {"name", name},
        {"problem", problem_to_json(problem).dump()},
        {"run_config", run_config_to_json(config).dump()},
    };
    for (const auto& [k, v] : rows) {
      Statement s(e->db_, "INSERT INTO meta(key, value) VALUES (?, ?)");
      s.bind(1, k).bind(2, v).run();
    }
    tx.commit();
    e->load_meta();
  } catch (...) {
    sqlite3_close(e->db_);
    e->db_ = nullptr;
    if (!is_memory(path)) std::filesystem::remove(path);
    throw;
  }
  return e;
}

std::shared_ptr<Experiment> Experiment::open(const std::string& path) {
  if (is_memory(path) || !std::filesystem::exists(path)) throw NotFoundError("no experiment database at '" + path + "'");
  std::shared_ptr<Experiment> e(new Experiment());
  e->path_ = path;
  e->db_ = open_db(path, false);
  e->load_meta();
  return e;
}

void Experiment::load_meta() {
  std::map<std::string, std::string> meta;
  Statement s(db_, "SELECT key, value FROM meta");
  while (s.step()) meta[s.text(0)] = s.text(1);
  if (!meta.count("schema_version")) throw IntegrityError("not an experiment database: " + path_);
  if (meta["schema_version"] != std::to_string(kSchemaVersion))
    throw SchemaVersionError("experiment schema version " + meta["schema_version"] + ", expected " +
                             std::to_string(kSchemaVersion));
  name_ = meta["name"];
  problem_ = problem_from_json(json::parse(meta["problem"]));
  Statement t(db_, "SELECT COALESCE(MAX(timestamp), 0) FROM log");
  t.step();
  last_timestamp_ = t.integer(0);
}

RunConfig Experiment::run_config() const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT value FROM meta WHERE key = 'run_config'");
  if (!s.step()) throw IntegrityError("missing run configuration");
  return run_config_from_json(json::parse(s.text(0)));
}

void Experiment::set_run_config(const RunConfig& config) {
  if (auto v = validate(config); !v.empty()) throw ValidationError(std::move(v));
  std::lock_guard lock(mutex_);
  Statement s(db_, "UPDATE meta SET value = ? WHERE key = 'run_config'");
  s.bind(1, run_config_to_json(config).dump()).run();
}

void Experiment::set_attribute(const std::string& key, const std::string& value) {
  std::lock_guard lock(mutex_);
  Statement s(db_, "INSERT OR REPLACE INTO meta(key, value) VALUES (?, ?)");
  s.bind(1, "attr:" + key).bind(2, value).run();
}

std::optional<std::string> Experiment::attribute(const std::string& key) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT value FROM meta WHERE key = ?");
  s.bind(1, "attr:" + key);
  if (!s.step()) return std::nullopt;
  return s.text(0);
}

Timestamp Experiment::next_timestamp() {
  last_timestamp_ = std::max(last_timestamp_, now_ms());
  return last_timestamp_;
}

void Experiment::append_log(Timestamp ts, std::int64_t record_id, const std::string& transition,
                            const std::string& actor, const json& payload) {
  Statement s(db_, "INSERT INTO log(timestamp, record_id, transition, actor, payload) VALUES (?, ?, ?, ?, ?)");
  s.bind(1, ts).bind(2, record_id).bind(3, transition).bind(4, actor).bind(5, payload.dump()).run();
}

std::vector<std::int64_t> Experiment::insert_pending(const std::vector<Design>& designs, RecordSource source,
                                                     int iteration, const std::string& actor) {
  std::vector<std::string> violations;
  for (std::size_t i = 0; i < designs.size(); ++i)
    for (const auto& v : validate_design(problem_, designs[i]))
      violations.push_back("designs[" + std::to_string(i) + "]." + v);
  if (!violations.empty()) throw ValidationError(std::move(violations));

  std::lock_guard lock(mutex_);
  std::vector<std::int64_t> ids;
  if (designs.empty()) return ids;
  Transaction tx(db_);
  const Timestamp ts = next_timestamp();
  for (const auto& d : designs) {
    const json dj = design_to_json(problem_, d);
    Statement s(db_, "INSERT INTO records(status, source, iteration, design, requested_at) VALUES (?, ?, ?, ?, ?)");
    s.bind(1, to_string(RecordStatus::pending)).bind(2, to_string(source)).bind(3, iteration).bind(4, dj.dump());
    s.bind(5, ts).run();
    const std::int64_t id = sqlite3_last_insert_rowid(db_);
    append_log(ts, id, "insert", actor, {{"design", dj}, {"source", to_string(source)}, {"iteration", iteration}});
    ids.push_back(id);
  }
  tx.commit();
  return ids;
}

Record Experiment::read_record(std::int64_t id) const {
  Statement s(db_, std::string("SELECT ") + kRecordColumns + " FROM records WHERE id = ?");
  s.bind(1, id);
  if (!s.step()) throw NotFoundError("no record " + std::to_string(id));
  Record r;
  r.id = s.integer(0);
  r.status = parse_status(s.text(1));
  r.source = parse_source(s.text(2));
  r.iteration = static_cast<int>(s.integer(3));
  r.design = design_from_json(problem_, json::parse(s.text(4)));
  if (!s.is_null(5)) r.objectives = objectives_from_json(json::parse(s.text(5)));
  r.requested_at = s.integer(6);
  r.started_at = s.optional_integer(7);
  r.finished_at = s.optional_integer(8);
  r.worker = s.text(9);
  r.note = s.text(10);
  return r;
}

Record Experiment::apply_transition(std::int64_t id, RecordStatus to, const TransitionPayload& payload) {
  Record r = read_record(id);
  if (!is_legal_transition(r.status, to))
    throw StateError("record " + std::to_string(id) + ": illegal transition " + to_string(r.status) + " -> " +
                     to_string(to));
  if (to == RecordStatus::evaluated) {
    if (!payload.objectives) throw ValidationError("objectives: required for an evaluated record");
    check_objectives(problem_, *payload.objectives);
  } else if (payload.objectives) {
    throw ValidationError("objectives: only evaluated records carry objectives");
  }
  const Timestamp ts = next_timestamp();
  const json pj = transition_payload(payload);
  apply(r, to, ts, pj);
  Statement s(db_,
              "UPDATE records SET status = ?, objectives = ?, started_at = ?, finished_at = ?, worker = ?, note = ? "
              "WHERE id = ?");
  s.bind(1, to_string(r.status));
  if (r.objectives) s.bind(2, objectives_json(*r.objectives).dump());
  else s.bind_null(2);
  s.bind(3, r.started_at).bind(4, r.finished_at).bind(5, r.worker).bind(6, r.note).bind(7, id).run();
  append_log(ts, id, to_string(to), payload.actor.empty() ? "system" : payload.actor, pj);
  return r;
}

Record Experiment::transition(std::int64_t id, RecordStatus to, const TransitionPayload& payload) {
  std::lock_guard lock(mutex_);
  Transaction tx(db_);
  Record r = apply_transition(id, to, payload);
  tx.commit();
  return r;
}

std::optional<Record> Experiment::claim_next(const std::string& worker, const std::string& actor) {
  std::lock_guard lock(mutex_);
  Transaction tx(db_);
  Statement s(db_, "SELECT id FROM records WHERE status = 'pending' ORDER BY id LIMIT 1");
  if (!s.step()) return std::nullopt;
  const std::int64_t id = s.integer(0);
  Record r = apply_transition(id, RecordStatus::in_evaluation, {std::nullopt, worker, "", actor});
  tx.commit();
  return r;
}

Record Experiment::get(std::int64_t id) const {
  std::lock_guard lock(mutex_);
  return read_record(id);
}

std::vector<Record> Experiment::query(const RecordFilter& filter) const {
  std::lock_guard lock(mutex_);
  std::string sql = "SELECT id FROM records WHERE 1 = 1";
  if (filter.status) sql += " AND status = ?1";
  if (filter.source) sql += " AND source = ?2";
  if (filter.iteration) sql += " AND iteration = ?3";
  sql += " ORDER BY id";
  Statement s(db_, sql);
  if (filter.status) s.bind(1, to_string(*filter.status));
  if (filter.source) s.bind(2, to_string(*filter.source));
  if (filter.iteration) s.bind(3, static_cast<std::int64_t>(*filter.iteration));
  std::vector<std::int64_t> ids;
  while (s.step()) ids.push_back(s.integer(0));
  std::vector<Record> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(read_record(id));
  return out;
}

std::vector<LogEntry> Experiment::log() const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT seq, timestamp, record_id, transition, actor, payload FROM log ORDER BY seq");
  std::vector<LogEntry> out;
  while (s.step()) out.push_back({s.integer(0), s.integer(1), s.integer(2), s.text(3), s.text(4), s.text(5)});
  return out;
}

std::int64_t Experiment::record_count() const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT COUNT(*) FROM records");
  s.step();
  return s.integer(0);
}

int Experiment::max_iteration() const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT COALESCE(MAX(iteration), 0) FROM records");
  s.step();
  return static_cast<int>(s.integer(0));
}

Statistics Experiment::statistics(const std::optional<Vector>& reference) const {
  const auto records = query();
  Statistics st;
  std::vector<const Record*> evaluated;
  for (const auto& r : records) {
    switch (r.status) {
      case RecordStatus::pending: ++st.pending; break;
      case RecordStatus::in_evaluation: ++st.in_evaluation; break;
      case RecordStatus::evaluated: ++st.evaluated; evaluated.push_back(&r); break;
      case RecordStatus::failed: ++st.failed; break;
    }
  }
  if (evaluated.empty()) return st;
  const int m = problem_.num_objectives();
  Matrix y(static_cast<Eigen::Index>(evaluated.size()), m);
  for (std::size_t i = 0; i < evaluated.size(); ++i)
    y.row(static_cast<Eigen::Index>(i)) = to_internal(problem_, *evaluated[i]->objectives).transpose();
  for (int i : non_dominated_indices(y)) st.front.push_back(evaluated[static_cast<std::size_t>(i)]->id);

  Vector ref;
  if (reference) {
    if (reference->size() != m) throw DimensionError("statistics: reference point has the wrong length");
    ref = to_internal(problem_, *reference);
  } else {
    ref = reference_point(y);
  }
  st.reference = to_user(problem_, ref);

  std::set<int> iterations;
  for (const auto* r : evaluated) iterations.insert(r->iteration);
  for (int it : iterations) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < evaluated.size(); ++i)
      if (evaluated[i]->iteration <= it && (y.row(static_cast<Eigen::Index>(i)).transpose().array() <= ref.array()).all())
        rows.push_back(static_cast<Eigen::Index>(i));
    Matrix pts(static_cast<Eigen::Index>(rows.size()), m);
    for (std::size_t k = 0; k < rows.size(); ++k) pts.row(static_cast<Eigen::Index>(k)) = y.row(rows[k]);
    st.hypervolume.emplace_back(it, hypervolume(pts, ref));
  }
  return st;
}

void Experiment::save_models(int iteration, const std::vector<GaussianProcess>& models) {
  std::lock_guard lock(mutex_);
  Transaction tx(db_);
  for (std::size_t j = 0; j < models.size(); ++j) {
    Statement s(db_, "INSERT OR REPLACE INTO models(iteration, objective, model) VALUES (?, ?, ?)");
    s.bind(1, iteration).bind(2, static_cast<std::int64_t>(j)).bind(3, models[j].to_json().dump()).run();
  }
  tx.commit();
}

std::vector<GaussianProcess> Experiment::latest_models() const {
  std::lock_guard lock(mutex_);
  Statement s(db_,
              "SELECT model FROM models WHERE iteration = (SELECT MAX(iteration) FROM models) ORDER BY objective");
  std::vector<GaussianProcess> out;
  while (s.step()) out.push_back(GaussianProcess::from_json(json::parse(s.text(0))));
  return out;
}

void Experiment::export_archive(const std::filesystem::path& dir) const {
  std::lock_guard lock(mutex_);
  const auto records = query();
  const auto entries = log();
  std::filesystem::create_directories(dir);
  write_file(dir / "problem.conf", problem_to_json(problem_).dump(2) + "\n");
  const json config{{"schema_version", kSchemaVersion},
                    {"name", name_},
                    {"run_config", run_config_to_json(run_config())},
                    {"records", records.size()},
                    {"log_entries", entries.size()}};
  write_file(dir / "config.conf", config.dump(2) + "\n");
  write_file(dir / "records.csv", records_csv(problem_, records));
  std::string log_text = csv::format_row(kLogHeader);
  for (const auto& e : entries)
    log_text += csv::format_row({std::to_string(e.seq), std::to_string(e.timestamp), std::to_string(e.record_id),
                                 e.transition, e.actor, e.payload});
  write_file(dir / "log.csv", log_text);
}

std::shared_ptr<Experiment> Experiment::import_archive(const std::filesystem::path& dir, const std::string& path) {
  json config;
  Problem problem;
  RunConfig run;
  try {
    config = json::parse(read_file(dir / "config.conf"));
    if (!config.contains("schema_version")) throw IntegrityError("archive: config.conf lacks schema_version");
    if (config.at("schema_version").get<int>() != kSchemaVersion)
      throw SchemaVersionError("archive schema version " + config.at("schema_version").dump() + ", expected " +
                               std::to_string(kSchemaVersion));
    problem = problem_from_json(json::parse(read_file(dir / "problem.conf")));
    run = run_config_from_json(config.at("run_config"));
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("archive: ") + e.what());
  } catch (const ValidationError& e) {
    throw IntegrityError(std::string("archive: ") + e.what());
  }
  require_valid(problem);

  // Records table.
  const auto rows = csv::parse(read_file(dir / "records.csv"));
  const auto header = record_header(problem);
  if (rows.empty() || rows.front() != header) throw IntegrityError("archive: records.csv header mismatch");
  std::vector<Record> records;
  try {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (row.size() != header.size()) throw IntegrityError("archive: records.csv row " + std::to_string(i) + " is truncated");
      Record r;
      std::size_t c = 0;
      r.id = parse_int(row[c++], "id");
      r.status = parse_status(row[c++]);
      r.source = parse_source(row[c++]);
      r.iteration = static_cast<int>(parse_int(row[c++], "iteration"));
      for (const auto& v : problem.variables) r.design.values[v.name] = parse_value(v, row[c++]);
      Vector y(problem.num_objectives());
      int present = 0;
      for (int j = 0; j < problem.num_objectives(); ++j, ++c)
        if (!row[c].empty()) {
          y(j) = parse_double(row[c]);
          ++present;
        }
      if (present == problem.num_objectives()) r.objectives = y;
      else if (present != 0) throw IntegrityError("archive: record " + std::to_string(r.id) + " has partial objectives");
      r.requested_at = parse_int(row[c++], "requested_at");
      r.started_at = parse_optional_int(row[c++], "started_at");
      r.finished_at = parse_optional_int(row[c++], "finished_at");
      r.worker = row[c++];
      r.note = row[c++];
      records.push_back(std::move(r));
    }
  } catch (const ValidationError& e) {
    throw IntegrityError(std::string("archive: ") + e.what());
  }

  // Log table.
  const auto log_rows = csv::parse(read_file(dir / "log.csv"));
  if (log_rows.empty() || log_rows.front() != kLogHeader) throw IntegrityError("archive: log.csv header mismatch");
  std::vector<LogEntry> entries;
  for (std::size_t i = 1; i < log_rows.size(); ++i) {
    const auto& row = log_rows[i];
    if (row.size() != kLogHeader.size()) throw IntegrityError("archive: log.csv row " + std::to_string(i) + " is truncated");
    entries.push_back({parse_int(row[0], "seq"), parse_int(row[1], "timestamp"), parse_int(row[2], "record_id"), row[3],
                       row[4], row[5]});
  }

  if (records.size() != config.value("records", std::size_t{0}) ||
      entries.size() != config.value("log_entries", std::size_t{0}))
    throw IntegrityError("archive: row counts disagree with config.conf");
  if (replay_log(problem, entries) != records) throw IntegrityError("archive: log replay disagrees with records.csv");

  auto e = create(path, config.value("name", std::string("imported")), problem, run);
  try {
    std::lock_guard lock(e->mutex_);
    Transaction tx(e->db_);
    for (const auto& r : records) {
      Statement s(e->db_, std::string("INSERT INTO records(") + kRecordColumns +
                              ") VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)");
      s.bind(1, r.id).bind(2, to_string(r.status)).bind(3, to_string(r.source)).bind(4, r.iteration);
      s.bind(5, design_to_json(problem, r.design).dump());
      if (r.objectives) s.bind(6, objectives_json(*r.objectives).dump());
      else s.bind_null(6);
      s.bind(7, r.requested_at).bind(8, r.started_at).bind(9, r.finished_at).bind(10, r.worker).bind(11, r.note);
      s.run();
    }
    for (const auto& l : entries) {
      Statement s(e->db_, "INSERT INTO log(seq, timestamp, record_id, transition, actor, payload) VALUES (?, ?, ?, ?, ?, ?)");
      s.bind(1, l.seq).bind(2, l.timestamp).bind(3, l.record_id).bind(4, l.transition).bind(5, l.actor);
      s.bind(6, l.payload).run();
      e->last_timestamp_ = std::max(e->last_timestamp_, l.timestamp);
    }
    tx.commit();
  } catch (...) {
    const std::string p = e->path_;
    e.reset();
    if (!is_memory(p)) {
      std::filesystem::remove(p);
      std::filesystem::remove(p + "-wal");
      std::filesystem::remove(p + "-shm");
    }
    throw;
  }
  return e;
}

// ---------------------------------------------------------------------------

Catalog::Catalog(const std::filesystem::path& root) : root_(root) {
  std::filesystem::create_directories(root_);
  db_ = open_db((root_ / "catalog.db").string(), true);
  char* err = nullptr;
  const char* schema = R"sql(
CREATE TABLE IF NOT EXISTS experiments (
  id INTEGER PRIMARY KEY AUTOINCREMENT, name TEXT NOT NULL UNIQUE, path TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS responses (key TEXT PRIMARY KEY, response TEXT NOT NULL);
PRAGMA journal_mode=WAL;
)sql";
  if (sqlite3_exec(db_, schema, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    sqlite3_close(db_);
    throw IntegrityError("catalog: " + msg);
  }
}

Catalog::~Catalog() {
  open_.clear();
  if (db_) sqlite3_close(db_);
}

CatalogEntry Catalog::create(const std::string& name, const Problem& problem, const RunConfig& config) {
  std::lock_guard lock(mutex_);
  {
    Statement s(db_, "SELECT COUNT(*) FROM experiments WHERE name = ?");
    s.bind(1, name).step();
    if (s.integer(0) > 0) throw ConflictError("experiment name '" + name + "' is taken");
  }
  Statement next(db_, "SELECT COALESCE(MAX(id), 0) + 1 FROM experiments");
  next.step();
  const std::int64_t id = next.integer(0);
  const std::string path = (root_ / ("experiment-" + std::to_string(id) + ".db")).string();
  std::filesystem::remove(path);
  auto e = Experiment::create(path, name, problem, config);
  Statement ins(db_, "INSERT INTO experiments(id, name, path) VALUES (?, ?, ?)");
  ins.bind(1, id).bind(2, name).bind(3, path).run();
  open_[id] = e;
  return {id, name, path};
}

CatalogEntry Catalog::entry(std::int64_t id) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT id, name, path FROM experiments WHERE id = ?");
  s.bind(1, id);
  if (!s.step()) throw NotFoundError("no experiment " + std::to_string(id));
  return {s.integer(0), s.text(1), s.text(2)};
}

std::shared_ptr<Experiment> Catalog::open(std::int64_t id) {
  std::lock_guard lock(mutex_);
  if (auto it = open_.find(id); it != open_.end()) return it->second;
  auto e = Experiment::open(entry(id).path);
  open_[id] = e;
  return e;
}

std::vector<CatalogEntry> Catalog::list() const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT id, name, path FROM experiments ORDER BY id");
  std::vector<CatalogEntry> out;
  while (s.step()) out.push_back({s.integer(0), s.text(1), s.text(2)});
  return out;
}

void Catalog::remove(std::int64_t id) {
  std::lock_guard lock(mutex_);
  const auto e = entry(id);
  open_.erase(id);
  Statement s(db_, "DELETE FROM experiments WHERE id = ?");
  s.bind(1, id).run();
  for (const char* suffix : {"", "-wal", "-shm"}) std::filesystem::remove(e.path + suffix);
}

std::optional<std::string> Catalog::stored_response(const std::string& key) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT response FROM responses WHERE key = ?");
  s.bind(1, key);
  if (!s.step()) return std::nullopt;
  return s.text(0);
}

void Catalog::store_response(const std::string& key, const std::string& response) {
  std::lock_guard lock(mutex_);
  Statement s(db_, "INSERT OR REPLACE INTO responses(key, response) VALUES (?, ?)");
  s.bind(1, key).bind(2, response).run();
}

}  // namespace oed
