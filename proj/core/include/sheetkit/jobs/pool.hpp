#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <thread>
#include <vector>

#include "sheetkit/jobs/store.hpp"

namespace sheetkit::jobs {

struct PoolOptions {
    int workers = 4;
    /// A worker that has executed this many jobs rebuilds its executor
    /// (fresh engine state) before claiming again.
    int recycle_after = 500;
    std::chrono::milliseconds job_timeout{120'000};
    std::chrono::milliseconds sweep_period{30'000};
    /// Poll interval while the queue is empty.
    std::chrono::milliseconds idle_poll{20};
};

/// Runs one claimed job to a terminal state, writing complete_*/fail on the
/// store itself. Must not throw — failures become the error state — and
/// should honor `deadline` for long recalculations.
class JobExecutor {
public:
    virtual ~JobExecutor() = default;
    virtual void execute(JobStore& store, const Job& job,
                         std::chrono::steady_clock::time_point deadline) = 0;
};

using ExecutorFactory = std::function<std::unique_ptr<JobExecutor>()>;

/// Fixed-size worker pool over a shared store, plus a sweeper thread that
/// fails overdue running jobs (crashed or hung workers). Running jobs never
/// exceed the worker count.
class WorkerPool {
public:
    WorkerPool(JobStore& store, PoolOptions options, ExecutorFactory factory);
    ~WorkerPool();
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    void start();
    void stop();

    std::int64_t total_executed() const { return executed_.load(); }
    std::int64_t recycles() const { return recycles_.load(); }

private:
    void worker_loop(int index);
    void sweeper_loop();

    JobStore& store_;
    PoolOptions options_;
    ExecutorFactory factory_;
    std::vector<std::thread> threads_;
    std::thread sweeper_;
    std::atomic<bool> stop_{false};
    std::atomic<std::int64_t> executed_{0};
    std::atomic<std::int64_t> recycles_{0};
};

} // namespace sheetkit::jobs
