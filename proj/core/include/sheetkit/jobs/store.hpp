#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace sheetkit::jobs {

enum class JobState { queued, running, done, error };

std::string_view to_string(JobState s);

struct Job {
    std::string id;
    std::string kind;      ///< "reward" | "recalculate"
    std::string sample_id; ///< task id, reward jobs only
    std::string input;     ///< workbook bytes; purged after retention
    JobState state = JobState::queued;
    double reward = 0.0;
    std::string diagnostics;   ///< JSON, reward jobs
    std::string result;        ///< workbook bytes, recalculate jobs; purged after retention
    std::string error_message; ///< error jobs
    std::int64_t submitted_ms = 0;
    std::int64_t started_ms = 0;
    std::int64_t finished_ms = 0;
    int attempt = 0;
    std::string worker;
    bool purged = false; ///< input/result bytes dropped by retention

    bool terminal() const { return state == JobState::done || state == JobState::error; }
};

/// SQLite-backed job queue shared by API handlers and pool workers, possibly
/// across processes. WAL journal, immediate-transaction claims: a job is
/// never running in two workers, and queued/terminal states survive restart.
/// State only ever moves queued -> running -> done|error; terminal rows are
/// immutable (late complete/fail calls return false).
class JobStore {
public:
    explicit JobStore(const std::string& db_path);
    ~JobStore();
    JobStore(const JobStore&) = delete;
    JobStore& operator=(const JobStore&) = delete;

    /// Persists a new queued job and returns its id. When max_pending > 0 and
    /// the store already holds max_pending not-yet-terminal jobs, returns
    /// nullopt and leaves the store untouched (backpressure; caller retries
    /// with backoff). max_pending <= 0 disables the check.
    std::optional<std::string> submit(const std::string& kind, const std::string& sample_id,
                                      const std::string& input, int max_pending = 0);

    /// Atomically claims the oldest queued job for `worker`, transitioning it
    /// to running with a start timestamp and attempt count. nullopt when the
    /// queue is empty.
    std::optional<Job> claim_next(const std::string& worker);

    bool complete_reward(const std::string& id, double reward, const std::string& diagnostics);
    bool complete_recalculate(const std::string& id, const std::string& result_bytes);
    bool fail(const std::string& id, const std::string& message);

    std::optional<Job> get(const std::string& id);

    int queued_count();
    int running_count();
    /// queued + running (the backpressure measure).
    int pending_count();

    /// Marks running jobs started more than job_timeout ago as error
    /// ("timeout"); covers workers that died mid-job. Returns how many.
    int sweep_stuck(std::chrono::milliseconds job_timeout);

    /// Drops input/result bytes of terminal jobs finished more than
    /// `retention` ago; metadata stays. Returns how many rows were purged.
    int purge_bytes(std::chrono::milliseconds retention);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace sheetkit::jobs
