#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <string>

namespace sheetkit::harness {

struct SandboxResult {
    bool ok = false;
    std::string stdout_text;
    std::string stderr_text;
    int exit_code = -1;
    /// Transport-level failure ("sandbox unavailable", "sandbox timeout", ...);
    /// empty when the code actually ran.
    std::string error;
};

/// Client interface for the external code-execution sandbox. Implementations
/// receive the agent's code plus the workspace directory whose files the code
/// may read and mutate (data.xlsx in particular).
class SandboxClient {
public:
    virtual ~SandboxClient() = default;
    virtual SandboxResult execute(const std::string& code,
                                  const std::filesystem::path& workspace_dir) = 0;
};

/// Executes nothing; every call reports "sandbox unavailable".
class StubSandbox : public SandboxClient {
public:
    SandboxResult execute(const std::string& code, const std::filesystem::path& dir) override;
};

/// Test double: succeeds and echoes the code back as stdout.
class EchoSandbox : public SandboxClient {
public:
    SandboxResult execute(const std::string& code, const std::filesystem::path& dir) override;
};

/// Test/replay hook: delegates to a callable that may mutate workspace files
/// the way the real sandbox would.
class CallbackSandbox : public SandboxClient {
public:
    using Fn = std::function<SandboxResult(const std::string&, const std::filesystem::path&)>;
    explicit CallbackSandbox(Fn fn) : fn_(std::move(fn)) {}
    SandboxResult execute(const std::string& code, const std::filesystem::path& dir) override {
        return fn_(code, dir);
    }

private:
    Fn fn_;
};

/// Remote HTTP backend. Submits code plus the workspace files, polls for the
/// result, and writes any returned files back into the workspace:
///   POST /execute  {"code", "files": {name: base64}} -> {"job_id"}
///   GET  /result/{job_id} -> {"state": "running"} |
///        {"state": "done", "stdout", "stderr", "exit_code", "files"?} |
///        {"state": "error", "error"}
class HttpSandbox : public SandboxClient {
public:
    HttpSandbox(std::string host, int port,
                std::chrono::seconds timeout = std::chrono::seconds(30));
    SandboxResult execute(const std::string& code, const std::filesystem::path& dir) override;

private:
    std::string host_;
    int port_;
    std::chrono::seconds timeout_;
};

} // namespace sheetkit::harness
