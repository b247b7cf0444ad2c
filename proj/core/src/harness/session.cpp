#include "sheetkit/harness/session.hpp"

#include <fstream>

#include <json.hpp>

using json = nlohmann::json;

namespace sheetkit::harness {

namespace {

json parsed_or_raw(const std::string& text) {
    json out = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (out.is_discarded()) return json(text);
    return out;
}

} // namespace

Session::Session(WorkspaceManager& manager, std::string workspace_id, SessionLimits limits,
                 SandboxClient* sandbox, std::filesystem::path transcript_path)
    : manager_(manager),
      workspace_id_(std::move(workspace_id)),
      limits_(limits),
      sandbox_(sandbox),
      transcript_path_(std::move(transcript_path)) {}

std::optional<std::string> Session::check_turn(const std::vector<ToolCall>& calls,
                                               const SessionLimits& limits) {
    if (calls.empty()) return "empty turn";
    if (static_cast<int>(calls.size()) > limits.max_calls_per_turn)
        return "call budget exceeded";
    std::size_t writes = 0;
    for (const ToolCall& call : calls)
        if (is_write_call(call)) ++writes;
    if (writes == 0) return std::nullopt;       // all read-only
    if (calls.size() == 1) return std::nullopt; // exactly one write, alone
    if (writes > 1) return "serialized writes required";
    return "mixed turn";
}

std::vector<ToolResult> Session::run_turn(const std::vector<ToolCall>& calls) {
    if (state_ == SessionState::completed) throw ProtocolError("session already completed");
    if (state_ == SessionState::exhausted) throw ProtocolError("session exhausted");
    if (assistant_turns_ >= limits_.max_assistant_turns) {
        state_ = SessionState::exhausted;
        record_turn(calls, {}, "assistant turn limit exceeded");
        throw ProtocolError("assistant turn limit exceeded");
    }
    if (user_turns_ >= limits_.max_user_turns) {
        state_ = SessionState::exhausted;
        record_turn(calls, {}, "user turn limit exceeded");
        throw ProtocolError("user turn limit exceeded");
    }
    ++assistant_turns_;

    if (auto error = check_turn(calls, limits_)) {
        ++user_turns_; // the rejection message goes back as the user turn
        record_turn(calls, {}, *error);
        throw ProtocolError(*error);
    }

    std::vector<ToolResult> results;
    results.reserve(calls.size());
    for (const ToolCall& call : calls)
        results.push_back(execute_tool(manager_, workspace_id_, call, sandbox_,
                                       limits_.max_tool_response_chars));
    ++user_turns_; // results delivered as the responding user turn
    record_turn(calls, results, "");
    return results;
}

void Session::note_user_turn() {
    if (state_ != SessionState::active) return;
    ++user_turns_;
    if (user_turns_ > limits_.max_user_turns) state_ = SessionState::exhausted;
}

void Session::finish() {
    if (state_ == SessionState::active) state_ = SessionState::completed;
}

void Session::record_turn(const std::vector<ToolCall>& calls,
                          const std::vector<ToolResult>& results,
                          const std::string& protocol_error) {
    if (transcript_path_.empty()) return;
    json call_list = json::array();
    for (const ToolCall& call : calls)
        call_list.push_back({{"name", call.name}, {"args", parsed_or_raw(call.args)}});
    json result_list = json::array();
    for (const ToolResult& r : results)
        result_list.push_back({{"ok", r.ok},
                               {"truncated", r.truncated},
                               {"rendered", r.rendered},
                               {"payload", parsed_or_raw(r.payload)}});
    json line{{"turn", assistant_turns_},
              {"calls", std::move(call_list)},
              {"results", std::move(result_list)}};
    if (!protocol_error.empty()) line["error"] = protocol_error;

    std::ofstream out(transcript_path_, std::ios::app | std::ios::binary);
    out << line.dump() << "\n";
}

} // namespace sheetkit::harness
