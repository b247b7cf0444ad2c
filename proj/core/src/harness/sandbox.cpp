#include "sheetkit/harness/sandbox.hpp"

#include <thread>

#include "httplib.h"
#include <json.hpp>
#include "sheetkit/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace sheetkit::harness {

namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(std::string_view data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= data.size(); i += 3) {
        unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                     (static_cast<unsigned char>(data[i + 1]) << 8) |
                     static_cast<unsigned char>(data[i + 2]);
        out += kB64[v >> 18];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += kB64[v & 63];
    }
    const std::size_t rest = data.size() - i;
    if (rest == 1) {
        unsigned v = static_cast<unsigned char>(data[i]) << 16;
        out += kB64[v >> 18];
        out += kB64[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                     (static_cast<unsigned char>(data[i + 1]) << 8);
        out += kB64[v >> 18];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

std::string b64_decode(std::string_view data) {
    std::string out;
    out.reserve(data.size() / 4 * 3);
    int acc = 0, bits = 0;
    for (char c : data) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = b64_value(c);
        if (v < 0) continue;
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out += static_cast<char>((acc >> bits) & 0xFF);
        }
    }
    return out;
}

/// Workspace files the sandbox may see: regular, non-hidden files directly
/// under the workspace directory.
json collect_files(const fs::path& dir) {
    json files = json::object();
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.empty() || name[0] == '.') continue;
        files[name] = b64_encode(read_file(entry.path()));
    }
    return files;
}

SandboxResult transport_error(std::string message) {
    SandboxResult r;
    r.error = std::move(message);
    return r;
}

} // namespace

SandboxResult StubSandbox::execute(const std::string&, const fs::path&) {
    return transport_error("sandbox unavailable");
}

SandboxResult EchoSandbox::execute(const std::string& code, const fs::path&) {
    SandboxResult r;
    r.ok = true;
    r.exit_code = 0;
    r.stdout_text = code;
    return r;
}

HttpSandbox::HttpSandbox(std::string host, int port, std::chrono::seconds timeout)
    : host_(std::move(host)), port_(port), timeout_(timeout) {}

SandboxResult HttpSandbox::execute(const std::string& code, const fs::path& dir) {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(static_cast<time_t>(timeout_.count()), 0);

    json submit{{"code", code}, {"files", collect_files(dir)}};
    auto res = client.Post("/execute", submit.dump(), "application/json");
    if (!res) return transport_error("sandbox unreachable");
    if (res->status != 200)
        return transport_error("sandbox rejected submission (" + std::to_string(res->status) + ")");

    std::string job_id;
    try {
        job_id = json::parse(res->body).at("job_id").get<std::string>();
    } catch (const json::exception&) {
        return transport_error("sandbox returned malformed submission response");
    }

    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (std::chrono::steady_clock::now() < deadline) {
        auto poll = client.Get(("/result/" + job_id).c_str());
        if (!poll) return transport_error("sandbox unreachable");
        if (poll->status != 200)
            return transport_error("sandbox poll failed (" + std::to_string(poll->status) + ")");
        json doc;
        try {
            doc = json::parse(poll->body);
        } catch (const json::exception&) {
            return transport_error("sandbox returned malformed result");
        }
        const std::string state = doc.value("state", "");
        if (state == "running" || state == "queued") {
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
            continue;
        }
        if (state == "error") return transport_error(doc.value("error", "sandbox error"));
        if (state != "done") return transport_error("sandbox returned unknown state: " + state);

        SandboxResult r;
        r.ok = true;
        r.stdout_text = doc.value("stdout", "");
        r.stderr_text = doc.value("stderr", "");
        r.exit_code = doc.value("exit_code", 0);
        if (doc.contains("files") && doc["files"].is_object()) {
            for (const auto& [name, content] : doc["files"].items()) {
                // Only plain names inside the workspace are written back.
                fs::path p(name);
                if (p.is_absolute() || p.filename().string() != name || name.empty() ||
                    name[0] == '.')
                    continue;
                write_file_atomic(dir / p, b64_decode(content.get<std::string>()));
            }
        }
        return r;
    }
    return transport_error("sandbox timeout");
}

} // namespace sheetkit::harness
