#include "sheetkit/jobs/store.hpp"

#include <sqlite3.h>

#include <mutex>

#include "sheetkit/error.hpp"
#include "sheetkit/util.hpp"

namespace sheetkit::jobs {

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS jobs (
  seq           INTEGER PRIMARY KEY AUTOINCREMENT,
  id            TEXT NOT NULL UNIQUE,
  kind          TEXT NOT NULL,
  sample_id     TEXT NOT NULL DEFAULT '',
  input         BLOB,
  state         TEXT NOT NULL DEFAULT 'queued',
  reward        REAL NOT NULL DEFAULT 0,
  diagnostics   TEXT NOT NULL DEFAULT '',
  result        BLOB,
  error_message TEXT NOT NULL DEFAULT '',
  submitted_ms  INTEGER NOT NULL,
  started_ms    INTEGER NOT NULL DEFAULT 0,
  finished_ms   INTEGER NOT NULL DEFAULT 0,
  attempt       INTEGER NOT NULL DEFAULT 0,
  worker        TEXT NOT NULL DEFAULT '',
  purged        INTEGER NOT NULL DEFAULT 0
);
CREATE INDEX IF NOT EXISTS jobs_state ON jobs(state);
)sql";

/// Prepared statement with RAII finalization and 1-based binding helpers.
class Stmt {
public:
    Stmt(sqlite3* db, const char* sql) {
        if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK)
            throw Error(std::string("job store: ") + sqlite3_errmsg(db));
    }
    ~Stmt() { sqlite3_finalize(stmt_); }
    Stmt(const Stmt&) = delete;
    Stmt& operator=(const Stmt&) = delete;

    Stmt& text(int i, const std::string& s) {
        sqlite3_bind_text(stmt_, i, s.data(), static_cast<int>(s.size()), SQLITE_TRANSIENT);
        return *this;
    }
    Stmt& blob(int i, const std::string& s) {
        sqlite3_bind_blob(stmt_, i, s.data(), static_cast<int>(s.size()), SQLITE_TRANSIENT);
        return *this;
    }
    Stmt& integer(int i, std::int64_t v) {
        sqlite3_bind_int64(stmt_, i, v);
        return *this;
    }
    Stmt& real(int i, double v) {
        sqlite3_bind_double(stmt_, i, v);
        return *this;
    }

    bool row() { return sqlite3_step(stmt_) == SQLITE_ROW; }
    void run() {
        if (sqlite3_step(stmt_) != SQLITE_DONE)
            throw Error(std::string("job store: ") + sqlite3_errmsg(sqlite3_db_handle(stmt_)));
    }

    std::string col_text(int i) {
        const char* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, i));
        return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, i)))
                 : std::string();
    }
    std::string col_blob(int i) {
        const void* p = sqlite3_column_blob(stmt_, i);
        return p ? std::string(static_cast<const char*>(p),
                               static_cast<std::size_t>(sqlite3_column_bytes(stmt_, i)))
                 : std::string();
    }
    std::int64_t col_int(int i) { return sqlite3_column_int64(stmt_, i); }
    double col_real(int i) { return sqlite3_column_double(stmt_, i); }

private:
    sqlite3_stmt* stmt_ = nullptr;
};

JobState state_from(const std::string& s) {
    if (s == "queued") return JobState::queued;
    if (s == "running") return JobState::running;
    if (s == "done") return JobState::done;
    return JobState::error;
}

constexpr const char* kJobColumns =
    "id, kind, sample_id, input, state, reward, diagnostics, result, error_message, "
    "submitted_ms, started_ms, finished_ms, attempt, worker, purged";

Job job_from_row(Stmt& q) {
    Job job;
    job.id = q.col_text(0);
    job.kind = q.col_text(1);
    job.sample_id = q.col_text(2);
    job.input = q.col_blob(3);
    job.state = state_from(q.col_text(4));
    job.reward = q.col_real(5);
    job.diagnostics = q.col_text(6);
    job.result = q.col_blob(7);
    job.error_message = q.col_text(8);
    job.submitted_ms = q.col_int(9);
    job.started_ms = q.col_int(10);
    job.finished_ms = q.col_int(11);
    job.attempt = static_cast<int>(q.col_int(12));
    job.worker = q.col_text(13);
    job.purged = q.col_int(14) != 0;
    return job;
}

} // namespace

std::string_view to_string(JobState s) {
    switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::error: return "error";
    }
    return "?";
}

struct JobStore::Impl {
    sqlite3* db = nullptr;
    std::mutex mutex; // one connection, serialized in-process

    void exec(const char* sql) {
        char* err = nullptr;
        if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
            std::string message = err ? err : "unknown sqlite error";
            sqlite3_free(err);
            throw Error("job store: " + message);
        }
    }

    /// Runs `body` inside an immediate transaction (write lock up front, so
    /// claim/check-then-act sequences are atomic across processes too).
    template <typename F> auto transact(F&& body) {
        exec("BEGIN IMMEDIATE");
        try {
            auto out = body();
            exec("COMMIT");
            return out;
        } catch (...) {
            exec("ROLLBACK");
            throw;
        }
    }

    int count_where(const char* predicate) {
        std::string sql = std::string("SELECT COUNT(*) FROM jobs WHERE ") + predicate;
        Stmt q(db, sql.c_str());
        q.row();
        return static_cast<int>(q.col_int(0));
    }
};

JobStore::JobStore(const std::string& db_path) : impl_(new Impl) {
    if (sqlite3_open(db_path.c_str(), &impl_->db) != SQLITE_OK) {
        std::string message = sqlite3_errmsg(impl_->db);
        sqlite3_close(impl_->db);
        impl_->db = nullptr;
        throw Error("job store: cannot open " + db_path + ": " + message);
    }
    sqlite3_busy_timeout(impl_->db, 10'000);
    impl_->exec("PRAGMA journal_mode=WAL");
    impl_->exec("PRAGMA synchronous=NORMAL");
    impl_->exec(kSchema);
}

JobStore::~JobStore() {
    if (impl_ && impl_->db) sqlite3_close(impl_->db);
}

std::optional<std::string> JobStore::submit(const std::string& kind, const std::string& sample_id,
                                            const std::string& input, int max_pending) {
    std::lock_guard lock(impl_->mutex);
    return impl_->transact([&]() -> std::optional<std::string> {
        if (max_pending > 0 &&
            impl_->count_where("state IN ('queued','running')") >= max_pending)
            return std::nullopt; // backpressure: reject without side effects
        std::string id = token_hex(16);
        Stmt ins(impl_->db, "INSERT INTO jobs (id, kind, sample_id, input, submitted_ms) "
                            "VALUES (?1, ?2, ?3, ?4, ?5)");
        ins.text(1, id).text(2, kind).text(3, sample_id).blob(4, input).integer(5, now_millis());
        ins.run();
        return id;
    });
}

std::optional<Job> JobStore::claim_next(const std::string& worker) {
    std::lock_guard lock(impl_->mutex);
    return impl_->transact([&]() -> std::optional<Job> {
        std::string sql = std::string("SELECT ") + kJobColumns +
                          " FROM jobs WHERE state='queued' ORDER BY seq LIMIT 1";
        Stmt q(impl_->db, sql.c_str());
        if (!q.row()) return std::nullopt;
        Job job = job_from_row(q);
        job.state = JobState::running;
        job.started_ms = now_millis();
        job.attempt += 1;
        job.worker = worker;
        Stmt update(impl_->db,
                    "UPDATE jobs SET state='running', started_ms=?1, attempt=?2, worker=?3 "
                    "WHERE id=?4 AND state='queued'");
        update.integer(1, job.started_ms).integer(2, job.attempt).text(3, worker).text(4, job.id);
        update.run();
        return job;
    });
}

bool JobStore::complete_reward(const std::string& id, double reward,
                               const std::string& diagnostics) {
    std::lock_guard lock(impl_->mutex);
    Stmt update(impl_->db, "UPDATE jobs SET state='done', reward=?1, diagnostics=?2, "
                           "finished_ms=?3 WHERE id=?4 AND state='running'");
    update.real(1, reward).text(2, diagnostics).integer(3, now_millis()).text(4, id);
    update.run();
    return sqlite3_changes(impl_->db) == 1;
}

bool JobStore::complete_recalculate(const std::string& id, const std::string& result_bytes) {
    std::lock_guard lock(impl_->mutex);
    Stmt update(impl_->db, "UPDATE jobs SET state='done', result=?1, finished_ms=?2 "
                           "WHERE id=?3 AND state='running'");
    update.blob(1, result_bytes).integer(2, now_millis()).text(3, id);
    update.run();
    return sqlite3_changes(impl_->db) == 1;
}

bool JobStore::fail(const std::string& id, const std::string& message) {
    std::lock_guard lock(impl_->mutex);
    Stmt update(impl_->db, "UPDATE jobs SET state='error', error_message=?1, finished_ms=?2 "
                           "WHERE id=?3 AND state='running'");
    update.text(1, message).integer(2, now_millis()).text(3, id);
    update.run();
    return sqlite3_changes(impl_->db) == 1;
}

std::optional<Job> JobStore::get(const std::string& id) {
    std::lock_guard lock(impl_->mutex);
    std::string sql = std::string("SELECT ") + kJobColumns + " FROM jobs WHERE id=?1";
    Stmt q(impl_->db, sql.c_str());
    q.text(1, id);
    if (!q.row()) return std::nullopt;
    return job_from_row(q);
}

int JobStore::queued_count() {
    std::lock_guard lock(impl_->mutex);
    return impl_->count_where("state='queued'");
}

int JobStore::running_count() {
    std::lock_guard lock(impl_->mutex);
    return impl_->count_where("state='running'");
}

int JobStore::pending_count() {
    std::lock_guard lock(impl_->mutex);
    return impl_->count_where("state IN ('queued','running')");
}

int JobStore::sweep_stuck(std::chrono::milliseconds job_timeout) {
    std::lock_guard lock(impl_->mutex);
    Stmt update(impl_->db, "UPDATE jobs SET state='error', error_message='timeout', "
                           "finished_ms=?1 WHERE state='running' AND started_ms <= ?2");
    const std::int64_t now = now_millis();
    update.integer(1, now).integer(2, now - job_timeout.count());
    update.run();
    return sqlite3_changes(impl_->db);
}

int JobStore::purge_bytes(std::chrono::milliseconds retention) {
    std::lock_guard lock(impl_->mutex);
    Stmt update(impl_->db, "UPDATE jobs SET input=NULL, result=NULL, purged=1 "
                           "WHERE state IN ('done','error') AND purged=0 AND finished_ms <= ?1");
    update.integer(1, now_millis() - retention.count());
    update.run();
    return sqlite3_changes(impl_->db);
}

} // namespace sheetkit::jobs
