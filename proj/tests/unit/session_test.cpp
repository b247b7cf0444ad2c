#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <sheetkit/harness/session.hpp>
#include <sheetkit/io.hpp>
#include <sheetkit/util.hpp>
#include <sheetkit/workspace.hpp>

#include "tmpdir.hpp"

using namespace sheetkit;
using namespace sheetkit::harness;
using json = nlohmann::json;

namespace {

Workbook tiny_book() {
    Workbook wb;
    auto& ws = wb.add_sheet("S");
    ws.set_value({1, 1}, CellValue::number(1));
    ws.set_value({2, 1}, CellValue::number(2));
    return wb;
}

std::string seed_workspace(WorkspaceManager& mgr) {
    const auto id = WorkspaceManager::new_id();
    mgr.create_and_seed(id, {{"data.xlsx", save_workbook(tiny_book(), FileFormat::ooxml), true}});
    return id;
}

ToolCall read_call(const std::string& range = "S!A1") {
    return {"inspect_range", json{{"range", range}}.dump()};
}

ToolCall write_call(const std::string& range = "S!B1", const std::string& body = "A1+A2") {
    return {"fill_formula", json{{"range", range}, {"formula", body}}.dump()};
}

std::vector<json> transcript_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::vector<json> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(json::parse(line));
    return lines;
}

} // namespace

TEST_CASE("turn protocol verdicts") {
    const SessionLimits limits;
    const ToolCall read = read_call();
    const ToolCall write = write_call();

    CHECK(Session::check_turn({}, limits) == "empty turn");

    std::vector<ToolCall> twenty(20, read);
    CHECK_FALSE(Session::check_turn(twenty, limits).has_value());
    std::vector<ToolCall> twenty_one(21, read);
    CHECK(Session::check_turn(twenty_one, limits) == "call budget exceeded");

    CHECK_FALSE(Session::check_turn({write}, limits).has_value());
    CHECK(Session::check_turn({write, write}, limits) == "serialized writes required");
    CHECK(Session::check_turn({read, write}, limits) == "mixed turn");
    CHECK(Session::check_turn({write, read}, limits) == "mixed turn");

    // Write classification sees through recalculate_and_read's writeback flag.
    const ToolCall rw{"recalculate_and_read", R"({"ranges":["S!A1"],"writeback":true})"};
    const ToolCall ro{"recalculate_and_read", R"({"ranges":["S!A1"]})"};
    CHECK(Session::check_turn({rw, read}, limits) == "mixed turn");
    CHECK_FALSE(Session::check_turn({ro, read}, limits).has_value());
}

TEST_CASE("run_turn executes valid turns and counts both sides") {
    testutil::TempDir tmp;
    WorkspaceManager mgr(tmp.path);
    Session session(mgr, seed_workspace(mgr));

    const auto results = session.run_turn({read_call(), read_call("S!A2")});
    REQUIRE(results.size() == 2);
    CHECK(results[0].ok);
    CHECK(results[1].ok);
    CHECK(session.assistant_turns_used() == 1);
    CHECK(session.user_turns_used() == 1);
    CHECK(session.state() == SessionState::active);

    const auto write_results = session.run_turn({write_call()});
    CHECK(write_results[0].ok);
    CHECK(session.assistant_turns_used() == 2);
}

TEST_CASE("protocol violations consume the turn but execute nothing") {
    testutil::TempDir tmp;
    WorkspaceManager mgr(tmp.path);
    const auto id = seed_workspace(mgr);
    Session session(mgr, id);
    const auto before = sha256_hex(read_file(mgr.resolve_path(id, "data.xlsx")));

    CHECK_THROWS_WITH_AS(session.run_turn({read_call(), write_call()}), "mixed turn",
                         ProtocolError);
    CHECK(session.assistant_turns_used() == 1);
    CHECK(session.user_turns_used() == 1);
    CHECK(session.state() == SessionState::active); // violation is not exhaustion

    CHECK_THROWS_WITH_AS(session.run_turn({write_call(), write_call("S!C1", "1")}),
                         "serialized writes required", ProtocolError);
    CHECK_THROWS_WITH_AS(session.run_turn({}), "empty turn", ProtocolError);
    CHECK_THROWS_WITH_AS(session.run_turn(std::vector<ToolCall>(21, read_call())),
                         "call budget exceeded", ProtocolError);
    CHECK(session.assistant_turns_used() == 4);

    // None of the rejected writes touched the workbook.
    CHECK(sha256_hex(read_file(mgr.resolve_path(id, "data.xlsx"))) == before);
    // The session still works afterwards.
    CHECK(session.run_turn({write_call()})[0].ok);
}

TEST_CASE("assistant turn cap exhausts the session") {
    testutil::TempDir tmp;
    WorkspaceManager mgr(tmp.path);
    SessionLimits limits;
    limits.max_assistant_turns = 2;
    Session session(mgr, seed_workspace(mgr), limits);

    session.run_turn({read_call()});
    session.run_turn({read_call()});
    CHECK_THROWS_WITH_AS(session.run_turn({read_call()}), "assistant turn limit exceeded",
                         ProtocolError);
    CHECK(session.state() == SessionState::exhausted);
    CHECK_FALSE(session.valid_output());
    // Exhaustion is terminal.
    CHECK_THROWS_WITH_AS(session.run_turn({read_call()}), "session exhausted", ProtocolError);
}

TEST_CASE("user turn cap exhausts the session") {
    testutil::TempDir tmp;
    WorkspaceManager mgr(tmp.path);
    SessionLimits limits;
    limits.max_user_turns = 1;
    Session session(mgr, seed_workspace(mgr), limits);

    session.run_turn({read_call()}); // consumes the single user turn
    CHECK_THROWS_WITH_AS(session.run_turn({read_call()}), "user turn limit exceeded",
                         ProtocolError);
    CHECK(session.state() == SessionState::exhausted);
    CHECK_FALSE(session.valid_output());

    // note_user_turn also drives the cap.
    Session chatty(mgr, seed_workspace(mgr), limits);
    chatty.note_user_turn();
    CHECK(chatty.state() == SessionState::active);
    chatty.note_user_turn();
    CHECK(chatty.state() == SessionState::exhausted);
    CHECK_FALSE(chatty.valid_output());
}

TEST_CASE("finishing completes a session and freezes it") {
    testutil::TempDir tmp;
    WorkspaceManager mgr(tmp.path);
    Session session(mgr, seed_workspace(mgr));

    session.run_turn({write_call()});
    session.finish();
    CHECK(session.state() == SessionState::completed);
    CHECK(session.valid_output());
    CHECK_THROWS_WITH_AS(session.run_turn({read_call()}), "session already completed",
                         ProtocolError);

    // finish never resurrects an exhausted session.
    SessionLimits limits;
    limits.max_assistant_turns = 0;
    Session dead(mgr, seed_workspace(mgr), limits);
    CHECK_THROWS_AS(dead.run_turn({read_call()}), ProtocolError);
    dead.finish();
    CHECK(dead.state() == SessionState::exhausted);
    CHECK_FALSE(dead.valid_output());
}

TEST_CASE("tool responses honor the session's response cap") {
    testutil::TempDir tmp;
    WorkspaceManager mgr(tmp.path);
    Workbook wb;
    wb.add_sheet("S").set_value({1, 1}, CellValue::text(std::string(500, 'x')));
    const auto id = WorkspaceManager::new_id();
    mgr.create_and_seed(id, {{"data.xlsx", save_workbook(wb, FileFormat::ooxml), true}});

    SessionLimits limits;
    limits.max_tool_response_chars = 64;
    Session session(mgr, id, limits);
    const auto results = session.run_turn({read_call()});
    CHECK(results[0].truncated);
    CHECK(results[0].rendered.size() <= 64);
    CHECK(results[0].rendered.find("...[truncated]") != std::string::npos);
}

TEST_CASE("transcript records every turn as JSON lines") {
    testutil::TempDir tmp;
    WorkspaceManager mgr(tmp.path);
    const auto id = seed_workspace(mgr);
    const auto transcript = tmp / "transcript.jsonl";
    Session session(mgr, id, SessionLimits{}, nullptr, transcript);

    session.run_turn({read_call()});
    CHECK_THROWS_AS(session.run_turn({read_call(), write_call()}), ProtocolError);
    session.run_turn({write_call()});

    const auto lines = transcript_lines(transcript);
    REQUIRE(lines.size() == 3);

    CHECK(lines[0]["turn"] == 1);
    CHECK(lines[0]["calls"][0]["name"] == "inspect_range");
    CHECK(lines[0]["calls"][0]["args"]["range"] == "S!A1");
    CHECK(lines[0]["results"][0]["ok"] == true);
    CHECK(lines[0]["results"][0]["payload"]["rows"].is_array());
    CHECK_FALSE(lines[0].contains("error"));

    CHECK(lines[1]["turn"] == 2);
    CHECK(lines[1]["error"] == "mixed turn");
    CHECK(lines[1]["results"].empty());
    CHECK(lines[1]["calls"].size() == 2);

    CHECK(lines[2]["turn"] == 3);
    CHECK(lines[2]["calls"][0]["name"] == "fill_formula");
    CHECK(lines[2]["results"][0]["ok"] == true);
    CHECK(lines[2]["results"][0]["truncated"] == false);
}
