#include "sheetkit/jobs/pool.hpp"

#include <string>

namespace sheetkit::jobs {

WorkerPool::WorkerPool(JobStore& store, PoolOptions options, ExecutorFactory factory)
    : store_(store), options_(options), factory_(std::move(factory)) {}

WorkerPool::~WorkerPool() { stop(); }

void WorkerPool::start() {
    if (!threads_.empty()) return;
    stop_.store(false);
    threads_.reserve(static_cast<std::size_t>(options_.workers));
    for (int i = 0; i < options_.workers; ++i)
        threads_.emplace_back([this, i] { worker_loop(i); });
    sweeper_ = std::thread([this] { sweeper_loop(); });
}

void WorkerPool::stop() {
    stop_.store(true);
    for (std::thread& t : threads_)
        if (t.joinable()) t.join();
    threads_.clear();
    if (sweeper_.joinable()) sweeper_.join();
}

void WorkerPool::worker_loop(int index) {
    const std::string worker_name = "worker-" + std::to_string(index);
    std::unique_ptr<JobExecutor> executor = factory_();
    int since_recycle = 0;
    while (!stop_.load()) {
        std::optional<Job> job;
        try {
            job = store_.claim_next(worker_name);
        } catch (...) {
            // Store contention or transient I/O: back off and retry.
            std::this_thread::sleep_for(options_.idle_poll);
            continue;
        }
        if (!job) {
            std::this_thread::sleep_for(options_.idle_poll);
            continue;
        }
        const auto deadline = std::chrono::steady_clock::now() + options_.job_timeout;
        try {
            executor->execute(store_, *job, deadline);
        } catch (...) {
            // Executors are supposed to catch; this is the last line of defense.
            try {
                store_.fail(job->id, "executor crashed");
            } catch (...) {
            }
        }
        executed_.fetch_add(1);
        if (++since_recycle >= options_.recycle_after) {
            // Fresh engine state after a fixed number of jobs.
            executor = factory_();
            since_recycle = 0;
            recycles_.fetch_add(1);
        }
    }
}

void WorkerPool::sweeper_loop() {
    auto next_sweep = std::chrono::steady_clock::now() + options_.sweep_period;
    while (!stop_.load()) {
        if (std::chrono::steady_clock::now() >= next_sweep) {
            try {
                store_.sweep_stuck(options_.job_timeout);
            } catch (...) {
            }
            next_sweep = std::chrono::steady_clock::now() + options_.sweep_period;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
}

} // namespace sheetkit::jobs
