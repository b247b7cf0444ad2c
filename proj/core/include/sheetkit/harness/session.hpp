#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sheetkit/error.hpp"
#include "sheetkit/harness/tools.hpp"
#include "sheetkit/workspace.hpp"

namespace sheetkit::harness {

/// Turn-protocol violation: the offending turn is rejected before any tool
/// executes (though it still consumes a turn).
class ProtocolError : public Error {
public:
    using Error::Error;
};

struct SessionLimits {
    int max_assistant_turns = 20;
    int max_user_turns = 20;
    std::size_t max_tool_response_chars = 8192;
    int max_calls_per_turn = 20;
};

enum class SessionState {
    active,
    completed, ///< agent declared done; output counts
    exhausted, ///< a turn cap was hit; the rollout has no valid output
};

/// Multi-turn tool-calling session over one workspace. A turn is either
/// 1..max_calls_per_turn read-only calls or exactly one write call; anything
/// else is rejected with "mixed turn", "call budget exceeded", or
/// "serialized writes required". Exceeding a turn cap exhausts the session.
/// Each executed turn is appended to a JSON-lines transcript when a path is
/// configured.
class Session {
public:
    Session(WorkspaceManager& manager, std::string workspace_id, SessionLimits limits = {},
            SandboxClient* sandbox = nullptr, std::filesystem::path transcript_path = {});

    /// The protocol check alone: nullopt when the turn is acceptable,
    /// otherwise the rejection message.
    static std::optional<std::string> check_turn(const std::vector<ToolCall>& calls,
                                                 const SessionLimits& limits);

    /// Validates, executes, records, and returns the turn's results.
    /// Throws ProtocolError on violations (turn consumed, nothing executed)
    /// and once a cap exhausts the session.
    std::vector<ToolResult> run_turn(const std::vector<ToolCall>& calls);

    /// Counts a user-authored message (tool results are counted by run_turn).
    void note_user_turn();

    /// Agent declared completion; the workbook on disk is the output.
    void finish();

    SessionState state() const { return state_; }
    /// False only when a cap exhausted the session (the "no valid output"
    /// outcome).
    bool valid_output() const { return state_ != SessionState::exhausted; }

    int assistant_turns_used() const { return assistant_turns_; }
    int user_turns_used() const { return user_turns_; }
    const SessionLimits& limits() const { return limits_; }
    const std::string& workspace_id() const { return workspace_id_; }

private:
    void record_turn(const std::vector<ToolCall>& calls, const std::vector<ToolResult>& results,
                     const std::string& protocol_error);

    WorkspaceManager& manager_;
    std::string workspace_id_;
    SessionLimits limits_;
    SandboxClient* sandbox_;
    std::filesystem::path transcript_path_;
    SessionState state_ = SessionState::active;
    int assistant_turns_ = 0;
    int user_turns_ = 0;
};

} // namespace sheetkit::harness
