#include "sheetkit/jobs/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <thread>

#include "httplib.h"
#include <json.hpp>
#include "sheetkit/error.hpp"
#include "sheetkit/formula/engine.hpp"
#include "sheetkit/io.hpp"
#include "sheetkit/verify/verifier.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace sheetkit::jobs {

namespace {

constexpr const char* kXlsxContentType =
    "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet";

/// Reward + recalculate execution over task directories. One instance per
/// pool worker; the task cache dies with the instance on recycle.
class WorkbookExecutor : public JobExecutor {
public:
    explicit WorkbookExecutor(fs::path task_root) : task_root_(std::move(task_root)) {}

    void execute(JobStore& store, const Job& job,
                 std::chrono::steady_clock::time_point deadline) override {
        try {
            if (std::chrono::steady_clock::now() >= deadline) throw Error("timeout");
            if (job.kind == "reward") {
                const verify::TaskSpec& task = task_for(job.sample_id);
                verify::RewardResult result = score(job.input, task, deadline);
                store.complete_reward(job.id, result.reward, verify::reward_json(result));
            } else if (job.kind == "recalculate") {
                Workbook wb = load_workbook(job.input, detect_format(job.input)).workbook;
                formula::RecalcOptions opts;
                opts.deadline = deadline;
                formula::recalculate(wb, opts);
                store.complete_recalculate(job.id, save_workbook(wb, FileFormat::ooxml));
            } else {
                store.fail(job.id, "unknown job kind: " + job.kind);
            }
        } catch (const std::exception& e) {
            store.fail(job.id, e.what());
        } catch (...) {
            store.fail(job.id, "unknown failure");
        }
    }

private:
    const verify::TaskSpec& task_for(const std::string& sample_id) {
        auto it = tasks_.find(sample_id);
        if (it == tasks_.end())
            it = tasks_.emplace(sample_id, verify::load_task(task_root_ / sample_id)).first;
        return it->second;
    }

    /// compute_reward with the deadline threaded into the recalculation.
    static verify::RewardResult score(const std::string& bytes, const verify::TaskSpec& task,
                                      std::chrono::steady_clock::time_point deadline) {
        verify::RewardResult result;
        Workbook pred;
        try {
            pred = load_workbook(bytes, detect_format(bytes)).workbook;
            formula::RecalcOptions opts;
            opts.deadline = deadline;
            formula::recalculate(pred, opts);
        } catch (const Error&) {
            result.reason = "no_valid_output";
            return result;
        }
        result.report = verify::allcellsmatch(pred, task.oracle, task.regions, task.options);
        result.reward = result.report.match ? 1 : 0;
        return result;
    }

    fs::path task_root_;
    std::map<std::string, verify::TaskSpec> tasks_;
};

void reply_json(httplib::Response& res, int status, json body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

} // namespace

std::unique_ptr<JobExecutor> make_workbook_executor(fs::path task_root) {
    return std::make_unique<WorkbookExecutor>(std::move(task_root));
}

struct JobService::Impl {
    ServiceOptions options;
    JobStore store;
    WorkerPool pool;
    httplib::Server server;
    std::thread server_thread;
    std::thread purge_thread;
    std::atomic<bool> stopping{false};
    int bound_port = 0;

    explicit Impl(ServiceOptions opts)
        : options(std::move(opts)),
          store(options.store_path),
          pool(
              store,
              PoolOptions{options.pool_size, options.recycle_after, options.job_timeout,
                          options.sweep_period, std::chrono::milliseconds(5)},
              [root = options.task_root] { return make_workbook_executor(root); }) {}

    int max_pending() const { return options.overload_factor * options.pool_size; }

    /// Blocks up to the wait parameter (capped) while the job is non-terminal.
    Job wait_for(Job job, double wait_seconds) {
        const double capped =
            std::clamp(wait_seconds, 0.0, static_cast<double>(options.max_poll_wait.count()));
        const auto deadline = std::chrono::steady_clock::now() +
                              std::chrono::milliseconds(static_cast<int>(capped * 1000));
        while (!job.terminal() && std::chrono::steady_clock::now() < deadline &&
               !stopping.load()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(25));
            if (auto fresh = store.get(job.id)) job = std::move(*fresh);
        }
        return job;
    }

    void submit_common(const httplib::Request& req, httplib::Response& res,
                       const std::string& kind) {
        std::string sample_id;
        std::string bytes;
        if (req.is_multipart_form_data()) {
            if (req.has_file("sample_id")) sample_id = req.get_file_value("sample_id").content;
            if (req.has_file("file")) bytes = req.get_file_value("file").content;
            else if (req.has_file("workbook")) bytes = req.get_file_value("workbook").content;
        } else {
            bytes = req.body; // raw-body submission (recalculate)
        }
        if (bytes.empty()) {
            reply_json(res, 400, {{"error", "missing workbook file"}});
            return;
        }
        if (kind == "reward") {
            if (sample_id.empty()) {
                reply_json(res, 400, {{"error", "missing sample_id"}});
                return;
            }
            // Validate before enqueueing anything.
            std::error_code ec;
            if (!fs::is_directory(options.task_root / sample_id, ec)) {
                reply_json(res, 422, {{"error", "unknown sample_id: " + sample_id}});
                return;
            }
        }
        auto id = store.submit(kind, sample_id, bytes, max_pending());
        if (!id) {
            res.set_header("Retry-After", "1");
            reply_json(res, 429, {{"error", "overloaded; retry with backoff"}});
            return;
        }
        reply_json(res, 200, {{"job_id", *id}, {"state", "queued"}});
    }

    void routes() {
        server.Post("/reward/submit", [this](const httplib::Request& req,
                                             httplib::Response& res) {
            submit_common(req, res, "reward");
        });
        server.Post("/recalculate/submit", [this](const httplib::Request& req,
                                                  httplib::Response& res) {
            submit_common(req, res, "recalculate");
        });

        server.Get("/reward/result/:id", [this](const httplib::Request& req,
                                                httplib::Response& res) {
            auto job = store.get(req.path_params.at("id"));
            if (!job || job->kind != "reward") {
                reply_json(res, 404, {{"error", "unknown job_id"}});
                return;
            }
            double wait = 0.0;
            if (req.has_param("wait")) wait = std::atof(req.get_param_value("wait").c_str());
            *job = wait_for(std::move(*job), wait);
            json body{{"job_id", job->id}, {"state", std::string(to_string(job->state))}};
            if (job->state == JobState::done) {
                body["reward"] = job->reward;
                json detail = json::parse(job->diagnostics, nullptr, false);
                body["diagnostics"] =
                    detail.is_discarded() ? json(job->diagnostics) : detail["diagnostics"];
                if (detail.is_object() && detail.contains("reason"))
                    body["reason"] = detail["reason"];
            } else if (job->state == JobState::error) {
                body["error"] = job->error_message;
            }
            reply_json(res, 200, std::move(body));
        });

        server.Get("/recalculate/result/:id", [this](const httplib::Request& req,
                                                     httplib::Response& res) {
            auto job = store.get(req.path_params.at("id"));
            if (!job || job->kind != "recalculate") {
                reply_json(res, 404, {{"error", "unknown job_id"}});
                return;
            }
            double wait = 0.0;
            if (req.has_param("wait")) wait = std::atof(req.get_param_value("wait").c_str());
            *job = wait_for(std::move(*job), wait);
            if (job->state == JobState::error) {
                reply_json(res, 200, {{"job_id", job->id},
                                      {"state", "error"},
                                      {"error", job->error_message}});
                return;
            }
            if (job->state != JobState::done) {
                reply_json(res, 200, {{"job_id", job->id},
                                      {"state", std::string(to_string(job->state))}});
                return;
            }
            if (job->purged) {
                reply_json(res, 410, {{"error", "result expired"}});
                return;
            }
            res.status = 200;
            res.set_content(job->result, kXlsxContentType);
        });

        server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            reply_json(res, 200, {{"status", "ok"},
                                  {"queued", store.queued_count()},
                                  {"running", store.running_count()}});
        });
    }
};

JobService::JobService(ServiceOptions options) : impl_(new Impl(std::move(options))) {
    impl_->routes();
}

JobService::~JobService() { stop(); }

void JobService::start() {
    Impl& im = *impl_;
    if (im.server_thread.joinable()) return;
    if (im.options.port == 0) {
        im.bound_port = im.server.bind_to_any_port(im.options.host);
        if (im.bound_port <= 0) throw Error("cannot bind service port");
    } else {
        if (!im.server.bind_to_port(im.options.host, im.options.port))
            throw Error("cannot bind service port " + std::to_string(im.options.port));
        im.bound_port = im.options.port;
    }
    im.pool.start();
    im.server_thread = std::thread([&im] { im.server.listen_after_bind(); });
    im.purge_thread = std::thread([&im] {
        while (!im.stopping.load()) {
            try {
                im.store.purge_bytes(im.options.retention);
            } catch (...) {
            }
            for (int i = 0; i < 50 && !im.stopping.load(); ++i)
                std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
    });
    im.server.wait_until_ready();
}

void JobService::stop() {
    if (!impl_) return;
    Impl& im = *impl_;
    im.stopping.store(true);
    im.server.stop();
    if (im.server_thread.joinable()) im.server_thread.join();
    if (im.purge_thread.joinable()) im.purge_thread.join();
    im.pool.stop();
}

int JobService::port() const { return impl_->bound_port; }

JobStore& JobService::store() { return impl_->store; }

} // namespace sheetkit::jobs
