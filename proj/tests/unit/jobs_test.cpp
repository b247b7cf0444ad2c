#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <sheetkit/error.hpp>
#include <sheetkit/io.hpp>
#include <sheetkit/jobs/pool.hpp>
#include <sheetkit/jobs/service.hpp>
#include <sheetkit/jobs/store.hpp>
#include <sheetkit/util.hpp>
#include <sheetkit/workbook.hpp>

#include "tmpdir.hpp"

using namespace sheetkit;
using namespace sheetkit::jobs;
using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

/// Spin until `pred` holds or `timeout` passes; true when it held.
template <typename Pred>
bool wait_until(Pred pred, std::chrono::milliseconds timeout = 15'000ms) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(5ms);
    }
    return pred();
}

Workbook sales_book(double d1) {
    Workbook wb;
    auto& s1 = wb.add_sheet("Sheet1");
    s1.set_value({1, 1}, CellValue::text("invoice"));
    s1.set_value({1, 2}, CellValue::text("124 bent street"));
    s1.set_value({1, 4}, CellValue::number(d1));
    auto& s2 = wb.add_sheet("Sheet2");
    s2.set_value({1, 2}, CellValue::text("124 bent street"));
    s2.set_value({1, 4}, CellValue::number(15100.0));
    return wb;
}

void write_task_dir(const fs::path& dir) {
    fs::create_directories(dir / "initial");
    { std::ofstream(dir / "instruction.md") << "Copy the matching total into Sheet1!D1.\n"; }
    write_file(dir / "initial" / "data.xlsx", save_workbook(sales_book(0.0), FileFormat::ooxml));
    write_file(dir / "oracle.xlsx", save_workbook(sales_book(15100.0), FileFormat::ooxml));
    { std::ofstream(dir / "spec.json") << R"({"task_id":"sales-copy","regions":["Sheet1!D1"]})"; }
}

/// n formulas each summing an n-cell column: one recalculation pass touching
/// ~n^2 cells, slow enough to hold the pool busy for a deterministic window.
std::string heavy_workbook_bytes(int n) {
    Workbook wb;
    auto& ws = wb.add_sheet("Load");
    const std::string body = "SUM(B$1:B$" + std::to_string(n) + ")";
    for (int r = 1; r <= n; ++r) {
        ws.set_value({r, 2}, CellValue::number(r));
        ws.set_formula({r, 1}, body);
    }
    return save_workbook(wb, FileFormat::json);
}

std::string tiny_workbook_bytes() {
    Workbook wb;
    auto& ws = wb.add_sheet("S");
    ws.set_value({1, 1}, CellValue::number(2.0));
    ws.set_value({2, 1}, CellValue::number(3.0));
    ws.set_formula({3, 1}, "A1*A2");
    return save_workbook(wb, FileFormat::json);
}

struct ServiceFixture {
    testutil::TempDir tmp;
    ServiceOptions options;
    std::unique_ptr<JobService> service;

    explicit ServiceFixture(int pool_size, int overload_factor = 4, int max_poll_wait_s = 5) {
        write_task_dir(tmp.path / "tasks" / "sales-copy");
        options.store_path = (tmp.path / "svc.db").string();
        options.task_root = tmp.path / "tasks";
        options.port = 0;
        options.pool_size = pool_size;
        options.overload_factor = overload_factor;
        options.max_poll_wait = std::chrono::seconds(max_poll_wait_s);
        service = std::make_unique<JobService>(options);
        service->start();
    }

    std::unique_ptr<httplib::Client> client() const {
        auto cli = std::make_unique<httplib::Client>("127.0.0.1", service->port());
        cli->set_read_timeout(std::chrono::seconds(30));
        return cli;
    }
};

std::string submit_reward(httplib::Client& cli, const std::string& sample_id,
                          const std::string& bytes) {
    auto res = cli.Post("/reward/submit",
                        httplib::MultipartFormDataItems{
                            {"sample_id", sample_id, "", ""},
                            {"file", bytes, "pred.xlsx", "application/octet-stream"}});
    REQUIRE(res);
    REQUIRE(res->status == 200);
    json body = json::parse(res->body);
    CHECK(body.at("state") == "queued");
    return body.at("job_id").get<std::string>();
}

json poll_reward(httplib::Client& cli, const std::string& id) {
    const auto deadline = std::chrono::steady_clock::now() + 20s;
    while (std::chrono::steady_clock::now() < deadline) {
        auto res = cli.Get("/reward/result/" + id + "?wait=2");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        json body = json::parse(res->body);
        const std::string state = body.at("state");
        if (state == "done" || state == "error") return body;
    }
    FAIL("reward job never reached a terminal state");
    return {};
}

/// Polls until the recalculate result turns binary (done), errors, or the
/// status leaves 200 (404/410); returns the final response.
httplib::Result poll_recalculate(httplib::Client& cli, const std::string& id) {
    const auto deadline = std::chrono::steady_clock::now() + 60s;
    for (;;) {
        auto res = cli.Get("/recalculate/result/" + id + "?wait=2");
        REQUIRE(res);
        if (res->status != 200) return res;
        if (res->get_header_value("Content-Type") != "application/json") return res;
        json body = json::parse(res->body);
        if (body.at("state") == "error") return res;
        if (std::chrono::steady_clock::now() > deadline) {
            FAIL("recalculate job never finished");
            return res;
        }
    }
}

} // namespace

TEST_CASE("jobs move through the queued/running/done lifecycle") {
    testutil::TempDir tmp;
    JobStore store((tmp / "jobs.db").string());

    CHECK(!store.claim_next("w0")); // empty queue
    CHECK(!store.get("feedfeedfeedfeedfeedfeedfeedfeed"));

    const std::string input("pk\0\x01raw bytes\xff", 14);
    auto id = store.submit("reward", "sample-7", input);
    REQUIRE(id);
    CHECK(id->size() == 32); // 16 random bytes, hex

    auto queued = store.get(*id);
    REQUIRE(queued);
    CHECK(queued->state == JobState::queued);
    CHECK(queued->kind == "reward");
    CHECK(queued->sample_id == "sample-7");
    CHECK(queued->input == input); // blob round-trip, embedded NUL intact
    CHECK(queued->submitted_ms > 0);
    CHECK(queued->attempt == 0);
    CHECK(queued->worker.empty());
    CHECK(!queued->terminal());
    CHECK(!queued->purged);
    CHECK(store.queued_count() == 1);
    CHECK(store.running_count() == 0);
    CHECK(store.pending_count() == 1);

    auto claimed = store.claim_next("w0");
    REQUIRE(claimed);
    CHECK(claimed->id == *id);
    CHECK(claimed->state == JobState::running);
    CHECK(claimed->attempt == 1);
    CHECK(claimed->worker == "w0");
    CHECK(claimed->started_ms >= claimed->submitted_ms);
    CHECK(!store.claim_next("w1")); // nothing else queued
    CHECK(store.running_count() == 1);
    CHECK(store.pending_count() == 1);

    CHECK(store.complete_reward(*id, 1.0, R"({"reward":1})"));
    auto done = store.get(*id);
    REQUIRE(done);
    CHECK(done->state == JobState::done);
    CHECK(done->reward == 1.0);
    CHECK(done->diagnostics == R"({"reward":1})");
    CHECK(done->finished_ms >= done->started_ms);
    CHECK(done->terminal());
    CHECK(store.pending_count() == 0);

    CHECK(to_string(JobState::queued) == "queued");
    CHECK(to_string(JobState::running) == "running");
    CHECK(to_string(JobState::done) == "done");
    CHECK(to_string(JobState::error) == "error");
}

TEST_CASE("terminal rows are immutable and completion requires a claim") {
    testutil::TempDir tmp;
    JobStore store((tmp / "jobs.db").string());

    auto id = store.submit("reward", "s", "bytes");
    REQUIRE(id);
    // Still queued: no terminal transition without a claim.
    CHECK(!store.complete_reward(*id, 1.0, "{}"));
    CHECK(!store.fail(*id, "nope"));
    CHECK(store.get(*id)->state == JobState::queued);

    REQUIRE(store.claim_next("w0"));
    CHECK(store.fail(*id, "it broke"));
    auto failed = store.get(*id);
    CHECK(failed->state == JobState::error);
    CHECK(failed->error_message == "it broke");

    // Late writes bounce off the terminal row.
    CHECK(!store.complete_reward(*id, 1.0, "{}"));
    CHECK(!store.complete_recalculate(*id, "zzz"));
    CHECK(!store.fail(*id, "again"));
    auto after = store.get(*id);
    CHECK(after->state == JobState::error);
    CHECK(after->error_message == "it broke");
    CHECK(after->reward == 0.0);
}

TEST_CASE("recalculate jobs carry binary results") {
    testutil::TempDir tmp;
    JobStore store((tmp / "jobs.db").string());

    auto id = store.submit("recalculate", "", "in");
    REQUIRE(id);
    REQUIRE(store.claim_next("w0"));
    const std::string bytes("PK\x03\x04\0\xff\x7f result", 14);
    CHECK(store.complete_recalculate(*id, bytes));

    auto done = store.get(*id);
    REQUIRE(done);
    CHECK(done->state == JobState::done);
    CHECK(done->result == bytes);
    CHECK(done->diagnostics.empty());
    CHECK(done->reward == 0.0);
}

TEST_CASE("claims drain in submission order") {
    testutil::TempDir tmp;
    JobStore store((tmp / "jobs.db").string());

    std::vector<std::string> ids;
    for (int i = 0; i < 5; ++i)
        ids.push_back(*store.submit("reward", "s", "job-" + std::to_string(i)));

    for (int i = 0; i < 5; ++i) {
        auto job = store.claim_next("w");
        REQUIRE(job);
        CHECK(job->id == ids[static_cast<std::size_t>(i)]);
        CHECK(job->input == "job-" + std::to_string(i));
    }
    CHECK(!store.claim_next("w"));
}

TEST_CASE("backpressure rejects exactly at the pending threshold") {
    testutil::TempDir tmp;
    JobStore store((tmp / "jobs.db").string());

    std::vector<std::string> ids;
    for (int i = 0; i < 3; ++i) {
        auto id = store.submit("reward", "s", "x", 3);
        REQUIRE(id);
        ids.push_back(*id);
    }
    // Fourth submission sees pending == max_pending and bounces with no row.
    CHECK(!store.submit("reward", "s", "x", 3));
    CHECK(store.pending_count() == 3);
    CHECK(store.queued_count() == 3);

    // Claiming does not shed load: running jobs still count as pending.
    REQUIRE(store.claim_next("w0"));
    CHECK(store.pending_count() == 3);
    CHECK(!store.submit("reward", "s", "x", 3));

    // Only a terminal transition frees a slot.
    CHECK(store.complete_reward(ids[0], 0.0, "{}"));
    CHECK(store.pending_count() == 2);
    CHECK(store.submit("reward", "s", "x", 3));
    CHECK(!store.submit("reward", "s", "x", 3));

    // max_pending <= 0 disables the check entirely.
    for (int i = 0; i < 10; ++i) CHECK(store.submit("reward", "s", "x", 0));
    CHECK(store.submit("reward", "s", "x", -1));
}

TEST_CASE("the store survives a close and reopen") {
    testutil::TempDir tmp;
    const std::string path = (tmp / "jobs.db").string();
    std::string running_id, done_id, queued_id;
    {
        JobStore store(path);
        running_id = *store.submit("reward", "s", "a");
        done_id = *store.submit("reward", "s", "b");
        queued_id = *store.submit("recalculate", "", "c");
        REQUIRE(store.claim_next("w0")); // running_id (FIFO)
        REQUIRE(store.claim_next("w0")); // done_id
        CHECK(store.complete_reward(done_id, 1.0, R"({"reward":1})"));
    } // close

    JobStore reopened(path);
    CHECK(reopened.get(running_id)->state == JobState::running);
    CHECK(reopened.get(done_id)->state == JobState::done);
    CHECK(reopened.get(done_id)->reward == 1.0);
    CHECK(reopened.get(queued_id)->state == JobState::queued);
    CHECK(reopened.pending_count() == 2);

    // The queued job is still claimable, the orphaned running job sweepable.
    auto job = reopened.claim_next("w1");
    REQUIRE(job);
    CHECK(job->id == queued_id);
    CHECK(reopened.complete_recalculate(queued_id, "bytes"));
    CHECK(reopened.sweep_stuck(0ms) == 1);
    CHECK(reopened.get(running_id)->state == JobState::error);
    CHECK(reopened.get(running_id)->error_message == "timeout");
}

TEST_CASE("sweeping times out only overdue running jobs") {
    testutil::TempDir tmp;
    JobStore store((tmp / "jobs.db").string());

    auto queued = store.submit("reward", "s", "x");
    REQUIRE(queued);
    CHECK(store.sweep_stuck(0ms) == 0); // queued jobs are never swept

    REQUIRE(store.claim_next("w0"));
    CHECK(store.sweep_stuck(10min) == 0); // fresh running job survives
    CHECK(store.get(*queued)->state == JobState::running);

    CHECK(store.sweep_stuck(0ms) == 1);
    auto swept = store.get(*queued);
    CHECK(swept->state == JobState::error);
    CHECK(swept->error_message == "timeout");
    CHECK(swept->finished_ms >= swept->started_ms);
    CHECK(store.sweep_stuck(0ms) == 0); // idempotent

    // The worker that went dark cannot resurrect the row.
    CHECK(!store.complete_reward(*queued, 1.0, "{}"));
}

TEST_CASE("purging drops workbook bytes but keeps outcomes") {
    testutil::TempDir tmp;
    JobStore store((tmp / "jobs.db").string());

    auto done_id = *store.submit("recalculate", "", "input-a");
    auto error_id = *store.submit("reward", "s", "input-b");
    auto running_id = *store.submit("reward", "s", "input-c");
    auto queued_id = *store.submit("reward", "s", "input-d");
    REQUIRE(store.claim_next("w")); // done_id
    REQUIRE(store.claim_next("w")); // error_id
    REQUIRE(store.claim_next("w")); // running_id
    CHECK(store.complete_recalculate(done_id, "result-bytes"));
    CHECK(store.fail(error_id, "boom"));

    CHECK(store.purge_bytes(10min) == 0); // inside the retention window
    CHECK(!store.get(done_id)->purged);

    CHECK(store.purge_bytes(0ms) == 2); // both terminal rows, nothing else
    auto done = store.get(done_id);
    CHECK(done->purged);
    CHECK(done->input.empty());
    CHECK(done->result.empty());
    CHECK(done->state == JobState::done);
    auto failed = store.get(error_id);
    CHECK(failed->purged);
    CHECK(failed->input.empty());
    CHECK(failed->error_message == "boom"); // outcome metadata survives
    CHECK(!store.get(running_id)->purged);
    CHECK(store.get(running_id)->input == "input-c");
    CHECK(!store.get(queued_id)->purged);

    CHECK(store.purge_bytes(0ms) == 0); // already purged rows are skipped

    // Reward metadata also outlives the purge.
    auto reward_id = *store.submit("reward", "s", "input-e");
    REQUIRE(store.claim_next("w"));
    CHECK(store.complete_reward(reward_id, 1.0, R"({"reward":1,"diagnostics":[]})"));
    CHECK(store.purge_bytes(0ms) == 1);
    auto reward = store.get(reward_id);
    CHECK(reward->purged);
    CHECK(reward->reward == 1.0);
    CHECK(reward->diagnostics == R"({"reward":1,"diagnostics":[]})");
}

TEST_CASE("concurrent claims over separate connections never collide") {
    testutil::TempDir tmp;
    const std::string path = (tmp / "jobs.db").string();
    constexpr int kJobs = 200;

    std::unordered_set<std::string> submitted;
    {
        JobStore seed(path);
        for (int i = 0; i < kJobs; ++i) submitted.insert(*seed.submit("reward", "s", "x"));
    }

    // Two connections (as two processes would hold), four claiming threads.
    JobStore a(path), b(path);
    std::vector<std::vector<std::string>> claimed(4);
    std::atomic<int> complete_failures{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            JobStore& store = (t % 2 == 0) ? a : b;
            const std::string name = "w" + std::to_string(t);
            while (auto job = store.claim_next(name)) {
                claimed[static_cast<std::size_t>(t)].push_back(job->id);
                if (!store.complete_reward(job->id, 0.0, "{}")) ++complete_failures;
            }
        });
    }
    for (auto& t : threads) t.join();

    std::unordered_set<std::string> all;
    std::size_t total = 0;
    for (const auto& ids : claimed) {
        total += ids.size();
        all.insert(ids.begin(), ids.end());
    }
    CHECK(total == kJobs);          // every job claimed...
    CHECK(all.size() == kJobs);     // ...exactly once
    CHECK(all == submitted);
    CHECK(complete_failures == 0);
    CHECK(a.pending_count() == 0);
}

namespace {

/// Shared scoreboard for pool tests; asserts happen on the main thread.
struct ExecLog {
    std::mutex mutex;
    std::unordered_set<std::string> executed;
    int duplicate_executions = 0;
    std::atomic<int> in_flight{0};
    std::atomic<int> high_water{0};
    std::atomic<int> instances{0};

    void enter(const std::string& id) {
        const int now = in_flight.fetch_add(1) + 1;
        int seen = high_water.load();
        while (now > seen && !high_water.compare_exchange_weak(seen, now)) {
        }
        std::lock_guard lock(mutex);
        if (!executed.insert(id).second) ++duplicate_executions;
    }
    void leave() { in_flight.fetch_sub(1); }
};

/// Test executor: completes jobs, or throws / abandons on request via the
/// job's sample_id. An abandoned job simulates a worker dying mid-execution.
class ScriptedExecutor : public JobExecutor {
public:
    explicit ScriptedExecutor(ExecLog& log) : log_(log) { log_.instances.fetch_add(1); }

    void execute(JobStore& store, const Job& job,
                 std::chrono::steady_clock::time_point) override {
        log_.enter(job.id);
        struct Guard {
            ExecLog& log;
            ~Guard() { log.leave(); }
        } guard{log_};
        std::this_thread::sleep_for(2ms);
        if (job.sample_id == "throw") throw std::runtime_error("synthetic executor bug");
        if (job.sample_id == "abandon") return; // no terminal write
        store.complete_reward(job.id, 1.0, "{}");
    }

private:
    ExecLog& log_;
};

} // namespace

TEST_CASE("the pool drains the queue with bounded concurrency") {
    testutil::TempDir tmp;
    JobStore store((tmp / "jobs.db").string());
    constexpr int kJobs = 60;
    for (int i = 0; i < kJobs; ++i) REQUIRE(store.submit("reward", "ok", "x"));

    ExecLog log;
    PoolOptions options;
    options.workers = 4;
    options.recycle_after = 7;
    options.idle_poll = 2ms;
    WorkerPool pool(store, options, [&log] { return std::make_unique<ScriptedExecutor>(log); });
    pool.start();
    CHECK(wait_until([&] { return store.pending_count() == 0; }));
    pool.stop();

    CHECK(pool.total_executed() == kJobs);
    CHECK(log.executed.size() == kJobs);
    CHECK(log.duplicate_executions == 0);
    CHECK(log.high_water.load() <= 4);
    CHECK(log.high_water.load() >= 2); // the workers actually overlapped
    // ceil(60/4) = 15 jobs on the busiest worker forces at least one recycle.
    CHECK(pool.recycles() >= 1);
    CHECK(pool.recycles() <= kJobs / options.recycle_after);
    CHECK(log.instances.load() == 4 + static_cast<int>(pool.recycles()));

    int done = 0;
    for (const std::string& id : log.executed)
        if (store.get(id)->state == JobState::done) ++done;
    CHECK(done == kJobs);
}

TEST_CASE("a single worker recycles its executor deterministically") {
    testutil::TempDir tmp;
    JobStore store((tmp / "jobs.db").string());
    for (int i = 0; i < 12; ++i) REQUIRE(store.submit("reward", "ok", "x"));

    ExecLog log;
    PoolOptions options;
    options.workers = 1;
    options.recycle_after = 5;
    options.idle_poll = 2ms;
    WorkerPool pool(store, options, [&log] { return std::make_unique<ScriptedExecutor>(log); });
    pool.start();
    CHECK(wait_until([&] { return store.pending_count() == 0; }));
    pool.stop();

    CHECK(pool.total_executed() == 12);
    CHECK(pool.recycles() == 2); // after jobs 5 and 10
    CHECK(log.instances.load() == 3);
}

TEST_CASE("executor exceptions become error jobs, not dead workers") {
    testutil::TempDir tmp;
    JobStore store((tmp / "jobs.db").string());
    auto ok1 = *store.submit("reward", "ok", "x");
    auto boom = *store.submit("reward", "throw", "x");
    auto ok2 = *store.submit("reward", "ok", "x");

    ExecLog log;
    PoolOptions options;
    options.workers = 1;
    options.idle_poll = 2ms;
    WorkerPool pool(store, options, [&log] { return std::make_unique<ScriptedExecutor>(log); });
    pool.start();
    CHECK(wait_until([&] { return store.pending_count() == 0; }));
    pool.stop();

    CHECK(store.get(ok1)->state == JobState::done);
    CHECK(store.get(boom)->state == JobState::error);
    CHECK(store.get(boom)->error_message == "executor crashed");
    CHECK(store.get(ok2)->state == JobState::done); // the worker survived
    CHECK(pool.total_executed() == 3);
}

TEST_CASE("the pool sweeper rescues jobs abandoned mid-execution") {
    testutil::TempDir tmp;
    JobStore store((tmp / "jobs.db").string());
    auto abandoned = *store.submit("reward", "abandon", "x");
    auto normal = *store.submit("reward", "ok", "x");

    ExecLog log;
    PoolOptions options;
    options.workers = 1;
    options.job_timeout = 80ms;
    options.sweep_period = 30ms;
    options.idle_poll = 2ms;
    WorkerPool pool(store, options, [&log] { return std::make_unique<ScriptedExecutor>(log); });
    pool.start();
    CHECK(wait_until([&] {
        return store.get(abandoned)->terminal() && store.get(normal)->terminal();
    }));
    pool.stop();

    CHECK(store.get(abandoned)->state == JobState::error);
    CHECK(store.get(abandoned)->error_message == "timeout");
    CHECK(store.get(normal)->state == JobState::done);
}

TEST_CASE("job churn with worker kills and pool restarts loses nothing") {
    testutil::TempDir tmp;
    const std::string path = (tmp / "jobs.db").string();
    constexpr int kJobs = 1200;
    constexpr int kMaxPending = 64;

    JobStore pool_store(path);   // shared by the worker pools
    JobStore client_store(path); // second connection: submitter + checks

    ExecLog log;
    auto factory = [&log] { return std::make_unique<ScriptedExecutor>(log); };
    PoolOptions options;
    options.workers = 2;
    options.recycle_after = 40;
    options.job_timeout = 30'000ms; // sweeping is driven manually below
    options.sweep_period = 50ms;
    options.idle_poll = 1ms;

    // Two pools over one store model two worker processes (4 workers total).
    auto pool_a = std::make_unique<WorkerPool>(pool_store, options, factory);
    auto pool_b = std::make_unique<WorkerPool>(pool_store, options, factory);
    pool_a->start();
    pool_b->start();

    std::vector<std::string> ids;
    ids.reserve(kJobs);
    std::atomic<int> overfills{0};  // accepted submits that left pending > cap
    std::atomic<int> rejections{0};
    std::atomic<bool> submitting{true};
    std::mt19937 rng(20'260'817);
    std::thread submitter([&] {
        std::mt19937 trng(99);
        std::uniform_int_distribution<int> kind(0, 99);
        while (ids.size() < kJobs) {
            const int roll = kind(trng);
            const std::string sample = roll < 4 ? "abandon" : roll < 12 ? "throw" : "ok";
            auto id = client_store.submit("reward", sample, "payload", kMaxPending);
            if (!id) {
                ++rejections;
                std::this_thread::sleep_for(1ms);
                continue;
            }
            ids.push_back(*id);
            if (client_store.pending_count() > kMaxPending) ++overfills;
        }
        submitting.store(false);
    });

    // Kill/restart churn: bounce one pool at a time while jobs flow. The
    // short manual sweep stands in for each pool's own long-period sweeper.
    std::uniform_int_distribution<int> which(0, 1);
    const auto churn_deadline = std::chrono::steady_clock::now() + 90s;
    int restarts = 0;
    while ((submitting.load() || client_store.pending_count() > 0) &&
           std::chrono::steady_clock::now() < churn_deadline) {
        std::this_thread::sleep_for(120ms);
        client_store.sweep_stuck(500ms); // reap abandoned corpses promptly
        auto& victim = which(rng) == 0 ? pool_a : pool_b;
        victim->stop();
        victim = std::make_unique<WorkerPool>(pool_store, options, factory);
        victim->start();
        ++restarts;
    }
    submitter.join();
    const bool drained = wait_until([&] { return client_store.pending_count() == 0; }, 30s);
    pool_a->stop();
    pool_b->stop();
    client_store.sweep_stuck(0ms); // anything still running is an orphan now

    CHECK(drained);
    REQUIRE(ids.size() == kJobs);
    CHECK(restarts >= 2);

    std::unordered_set<std::string> unique_ids(ids.begin(), ids.end());
    CHECK(unique_ids.size() == kJobs);
    int terminal = 0, done = 0, error = 0;
    for (const std::string& id : ids) {
        auto job = client_store.get(id);
        REQUIRE(job);
        if (job->terminal()) ++terminal;
        if (job->state == JobState::done) ++done;
        if (job->state == JobState::error) ++error;
    }
    CHECK(terminal == kJobs);              // no lost jobs, no stuck states
    CHECK(done + error == kJobs);
    CHECK(done > 0);
    CHECK(error > 0);                      // throws and abandons both occurred
    CHECK(log.duplicate_executions == 0);  // a job never ran twice
    CHECK(log.executed.size() == kJobs);   // every job ran exactly once
    CHECK(log.high_water.load() <= 4);     // 2 pools x 2 workers
    CHECK(overfills.load() == 0);          // backpressure cap never overshot
    CHECK(client_store.pending_count() == 0);
}

TEST_CASE("the service scores reward submissions over http") {
    ServiceFixture fx(2);
    auto cli = fx.client();

    auto health = cli->Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    json status = json::parse(health->body);
    CHECK(status.at("status") == "ok");
    CHECK(status.contains("queued"));
    CHECK(status.contains("running"));

    // Correct prediction: reward 1, clean diagnostics.
    const auto t0 = std::chrono::steady_clock::now();
    auto good = submit_reward(*cli, "sales-copy",
                              save_workbook(sales_book(15100.0), FileFormat::ooxml));
    json good_body = poll_reward(*cli, good);
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    CHECK(good_body.at("state") == "done");
    CHECK(good_body.at("reward").get<double>() == 1.0);
    REQUIRE(good_body.at("diagnostics").is_array());
    CHECK(good_body.at("diagnostics").empty());
    CHECK(!good_body.contains("reason"));
    // The long poll returned as soon as the job finished, not after the cap.
    CHECK(elapsed < 15s);

    // Perturbed prediction: reward 0 with a cell-level diagnostic.
    auto bad = submit_reward(*cli, "sales-copy",
                             save_workbook(sales_book(15000.0), FileFormat::ooxml));
    json bad_body = poll_reward(*cli, bad);
    CHECK(bad_body.at("state") == "done");
    CHECK(bad_body.at("reward").get<double>() == 0.0);
    REQUIRE(bad_body.at("diagnostics").is_array());
    CHECK(!bad_body.at("diagnostics").empty());
    CHECK(bad_body.at("diagnostics").dump().find("Sheet1!D1") != std::string::npos);

    // Undecodable bytes score 0 with an explicit reason instead of crashing.
    auto corrupt = submit_reward(*cli, "sales-copy", "PK\x03\x04 this is not a workbook");
    json corrupt_body = poll_reward(*cli, corrupt);
    CHECK(corrupt_body.at("state") == "done");
    CHECK(corrupt_body.at("reward").get<double>() == 0.0);
    CHECK(corrupt_body.at("reason") == "no_valid_output");

    // JSON-format predictions are accepted too.
    auto as_json = submit_reward(*cli, "sales-copy",
                                 save_workbook(sales_book(15100.0), FileFormat::json));
    CHECK(poll_reward(*cli, as_json).at("reward").get<double>() == 1.0);

    auto health_after = cli->Get("/healthz");
    REQUIRE(health_after);
    CHECK(health_after->status == 200);
}

TEST_CASE("submissions are validated before anything is enqueued") {
    ServiceFixture fx(2);
    auto cli = fx.client();
    const std::string bytes = save_workbook(sales_book(15100.0), FileFormat::ooxml);

    // Missing file part.
    auto no_file = cli->Post("/reward/submit", httplib::MultipartFormDataItems{
                                                   {"sample_id", "sales-copy", "", ""}});
    REQUIRE(no_file);
    CHECK(no_file->status == 400);
    CHECK(json::parse(no_file->body).at("error") == "missing workbook file");

    // Missing sample_id part.
    auto no_sample = cli->Post(
        "/reward/submit",
        httplib::MultipartFormDataItems{{"file", bytes, "pred.xlsx", "application/octet-stream"}});
    REQUIRE(no_sample);
    CHECK(no_sample->status == 400);
    CHECK(json::parse(no_sample->body).at("error") == "missing sample_id");

    // Unknown task id is rejected up front, not at execution time.
    auto unknown = cli->Post("/reward/submit",
                             httplib::MultipartFormDataItems{
                                 {"sample_id", "no-such-task", "", ""},
                                 {"file", bytes, "pred.xlsx", "application/octet-stream"}});
    REQUIRE(unknown);
    CHECK(unknown->status == 422);
    CHECK(json::parse(unknown->body).at("error").get<std::string>().find("no-such-task") !=
          std::string::npos);
    CHECK(fx.service->store().pending_count() == 0); // nothing was enqueued

    // Unknown ids and cross-kind lookups are 404s.
    auto missing = cli->Get("/reward/result/feedfeedfeedfeedfeedfeedfeedfeed");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    auto reward_id = submit_reward(*cli, "sales-copy", bytes);
    auto cross = cli->Get("/recalculate/result/" + reward_id);
    REQUIRE(cross);
    CHECK(cross->status == 404);
    poll_reward(*cli, reward_id); // drain before teardown
}

TEST_CASE("recalculation round-trips a workbook and expires its bytes") {
    ServiceFixture fx(2);
    auto cli = fx.client();

    // Raw-body submission, no multipart envelope.
    auto submit = cli->Post("/recalculate/submit", tiny_workbook_bytes(),
                            "application/octet-stream");
    REQUIRE(submit);
    REQUIRE(submit->status == 200);
    const std::string id = json::parse(submit->body).at("job_id");

    auto result = poll_recalculate(*cli, id);
    REQUIRE(result->status == 200);
    CHECK(result->get_header_value("Content-Type") ==
          "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet");
    Workbook out = load_workbook(result->body, detect_format(result->body)).workbook;
    CHECK(out.sheet("S")->value_at({3, 1}) == CellValue::number(6.0)); // A1*A2 evaluated

    // A reward job's id stays invisible to this endpoint.
    auto wrong_kind = cli->Get("/reward/result/" + id);
    REQUIRE(wrong_kind);
    CHECK(wrong_kind->status == 404);

    // Once retention drops the bytes the result is gone for good...
    REQUIRE(fx.service->store().purge_bytes(0ms) >= 1);
    auto expired = cli->Get("/recalculate/result/" + id);
    REQUIRE(expired);
    CHECK(expired->status == 410);
    CHECK(json::parse(expired->body).at("error") == "result expired");

    // ...while reward outcomes, being metadata, survive the same purge.
    auto reward_id = submit_reward(*cli, "sales-copy",
                                   save_workbook(sales_book(15100.0), FileFormat::ooxml));
    json reward_body = poll_reward(*cli, reward_id);
    CHECK(reward_body.at("reward").get<double>() == 1.0);
    REQUIRE(fx.service->store().purge_bytes(0ms) >= 1);
    json after_purge = poll_reward(*cli, reward_id);
    CHECK(after_purge.at("state") == "done");
    CHECK(after_purge.at("reward").get<double>() == 1.0);
}

TEST_CASE("malformed recalculation input fails the job, not the service") {
    ServiceFixture fx(1);
    auto cli = fx.client();

    auto submit = cli->Post("/recalculate/submit", "PK\x03\x04 this is not a zip",
                            "application/octet-stream");
    REQUIRE(submit);
    REQUIRE(submit->status == 200);
    const std::string id = json::parse(submit->body).at("job_id");

    auto result = poll_recalculate(*cli, id);
    REQUIRE(result->status == 200);
    json body = json::parse(result->body);
    CHECK(body.at("state") == "error");
    CHECK(!body.at("error").get<std::string>().empty());

    auto health = cli->Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200); // the service shrugged it off
}

TEST_CASE("overload answers 429 with retry advice until the queue drains") {
    // One worker, overload factor 1: a single pending job saturates intake.
    ServiceFixture fx(1, /*overload_factor=*/1, /*max_poll_wait_s=*/5);
    auto cli = fx.client();

    // ~9M cell reads keep the worker busy far longer than the probes below.
    auto slow = cli->Post("/recalculate/submit", heavy_workbook_bytes(3000),
                          "application/octet-stream");
    REQUIRE(slow);
    REQUIRE(slow->status == 200);
    const std::string slow_id = json::parse(slow->body).at("job_id");

    const std::string tiny = tiny_workbook_bytes();
    for (int i = 0; i < 4; ++i) {
        auto probe = cli->Post("/recalculate/submit", tiny, "application/octet-stream");
        REQUIRE(probe);
        CHECK(probe->status == 429);
        CHECK(probe->get_header_value("Retry-After") == "1");
        CHECK(json::parse(probe->body).at("error").get<std::string>().find("overload") !=
              std::string::npos);
    }
    auto reward_probe =
        cli->Post("/reward/submit",
                  httplib::MultipartFormDataItems{
                      {"sample_id", "sales-copy", "", ""},
                      {"file", tiny, "pred.xlsx", "application/octet-stream"}});
    REQUIRE(reward_probe);
    CHECK(reward_probe->status == 429); // both submit endpoints share the gate

    // The slow job still completes correctly under the rejected burst.
    auto result = poll_recalculate(*cli, slow_id);
    REQUIRE(result->status == 200);
    Workbook out = load_workbook(result->body, detect_format(result->body)).workbook;
    CHECK(out.sheet("Load")->value_at({1, 1}) ==
          CellValue::number(3000.0 * 3001.0 / 2.0)); // SUM(B1:B3000)

    // Capacity is back: the same submission now lands.
    auto after = cli->Post("/recalculate/submit", tiny, "application/octet-stream");
    REQUIRE(after);
    CHECK(after->status == 200);
}

TEST_CASE("long polls are clamped to the configured ceiling") {
    // No workers at all: the job can never finish, so the poll must time out.
    ServiceFixture fx(/*pool_size=*/0, /*overload_factor=*/4, /*max_poll_wait_s=*/1);
    auto cli = fx.client();

    auto submit = cli->Post("/recalculate/submit", tiny_workbook_bytes(),
                            "application/octet-stream");
    REQUIRE(submit);
    REQUIRE(submit->status == 200);
    const std::string id = json::parse(submit->body).at("job_id");

    // wait=0 returns immediately with the non-terminal state.
    auto quick_t0 = std::chrono::steady_clock::now();
    auto quick = cli->Get("/recalculate/result/" + id + "?wait=0");
    REQUIRE(quick);
    CHECK(json::parse(quick->body).at("state") == "queued");
    CHECK(std::chrono::steady_clock::now() - quick_t0 < 900ms);

    // An absurd wait is held to max_poll_wait (1s here), then answered.
    auto t0 = std::chrono::steady_clock::now();
    auto res = cli->Get("/recalculate/result/" + id + "?wait=9999");
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    REQUIRE(res);
    REQUIRE(res->status == 200);
    CHECK(json::parse(res->body).at("state") == "queued");
    CHECK(elapsed >= 950ms);
    CHECK(elapsed < 8s);
}
