#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include "sheetkit/jobs/pool.hpp"
#include "sheetkit/jobs/store.hpp"

namespace sheetkit::jobs {

struct ServiceOptions {
    std::string store_path;          ///< SQLite file backing the job queue
    std::filesystem::path task_root; ///< <task_root>/<sample_id>/ task directories
    std::string host = "127.0.0.1";
    int port = 8080; ///< 0 picks a free port (see JobService::port)
    int pool_size = 4;
    /// Submissions are rejected while pending jobs exceed
    /// overload_factor * pool_size.
    int overload_factor = 4;
    int recycle_after = 500;
    std::chrono::milliseconds job_timeout{120'000};
    std::chrono::milliseconds sweep_period{30'000};
    /// Workbook bytes of terminal jobs are dropped after this grace period.
    std::chrono::milliseconds retention{600'000};
    /// Upper bound on the ?wait= long-poll parameter.
    std::chrono::seconds max_poll_wait{10};
};

/// Executor for the two real job kinds: reward jobs load the prediction,
/// recalculate it, and score it against <task_root>/<sample_id>; recalculate
/// jobs return the recalculated workbook bytes. Tasks are cached per
/// executor instance, so pool recycling also refreshes them.
std::unique_ptr<JobExecutor> make_workbook_executor(std::filesystem::path task_root);

/// Submit-and-poll HTTP front end over the shared store and worker pool.
///
///   POST /reward/submit        multipart: sample_id field + workbook file
///   GET  /reward/result/{id}   ?wait=seconds long-poll; JSON state/reward
///   POST /recalculate/submit   multipart workbook file, or raw body
///   GET  /recalculate/result/{id}  binary xlsx once done
///   GET  /healthz
///
/// Submissions validate fast and enqueue only; 429 with retry advice under
/// overload, 404 for unknown ids, 410 for results past retention.
class JobService {
public:
    explicit JobService(ServiceOptions options);
    ~JobService();
    JobService(const JobService&) = delete;
    JobService& operator=(const JobService&) = delete;

    /// Binds, starts pool + HTTP threads, returns once the port is live.
    void start();
    void stop();

    /// Actual bound port (differs from options when options.port == 0).
    int port() const;
    JobStore& store();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace sheetkit::jobs
