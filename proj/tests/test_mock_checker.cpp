#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "proofgate/mock_checker.hpp"

using namespace proofgate;

namespace {

MockConfig fast() {
    MockConfig config;
    config.header_cost = 0;
    config.body_cost = 0;
    return config;
}

struct Session {
    int exit_code;
    std::vector<json> replies;
};

Session run(const std::vector<ReplCommand>& commands, const MockConfig& config = fast()) {
    std::stringstream in;
    for (const auto& c : commands) in << encode_command(c) << "\n";
    std::stringstream out;
    Session session{run_mock_checker(in, out, config), {}};
    std::string line;
    while (std::getline(out, line)) session.replies.push_back(json::parse(line));
    return session;
}

}  // namespace

TEST_CASE("a probe answers without allocating an environment") {
    const auto s = run({ReplCommand{}, ReplCommand{"import Mathlib"}});
    REQUIRE(s.replies.size() == 2);
    CHECK(s.replies[0]["env"] == 0);
    CHECK(s.replies[1]["env"] == 0);
    CHECK(s.exit_code == kMockExitOk);
}

TEST_CASE("environments are numbered sequentially and can be extended") {
    const auto s = run({ReplCommand{"import Mathlib"}, ReplCommand{"theorem t : True := trivial", 0},
                        ReplCommand{"theorem u : True := trivial", 0}});
    REQUIRE(s.replies.size() == 3);
    CHECK(s.replies[1]["env"] == 1);
    CHECK(s.replies[2]["env"] == 2);
    for (const auto& r : s.replies) CHECK(reply_from_json(r).messages.empty());
}

TEST_CASE("an unknown environment yields an error object") {
    const auto s = run({ReplCommand{"theorem t : True := trivial", 7}});
    REQUIRE(s.replies.size() == 1);
    CHECK(s.replies[0] == json{{"message", "Unknown environment."}});
}

TEST_CASE("markers drive the verdict") {
    const auto s = run({ReplCommand{"theorem a : True := trivial"}, ReplCommand{"theorem b : False := by\n  MOCK_ERROR"},
                        ReplCommand{"theorem c : False := by\n  sorry"}});
    REQUIRE(s.replies.size() == 3);
    CHECK(analyze(reply_from_json(s.replies[0])).status == Status::valid);

    const auto invalid = reply_from_json(s.replies[1]);
    CHECK(analyze(invalid).status == Status::invalid);
    CHECK(invalid.messages[0].pos == Position{2, 2});
    CHECK(invalid.messages[0].end_pos == Position{2, 12});

    const auto sorry = reply_from_json(s.replies[2]);
    CHECK(analyze(sorry).status == Status::sorry);
    CHECK(sorry.sorries.size() == 1);
    CHECK(sorry.messages[0].data == "declaration uses 'sorry'");
}

TEST_CASE("sorry must be a whole word") {
    const auto s = run({ReplCommand{"theorem sorryish : True := trivial"}});
    CHECK(reply_from_json(s.replies[0]).sorries.empty());
}

TEST_CASE("MOCK_CRASH exits without replying") {
    const auto s = run({ReplCommand{"theorem t : True := by\n  MOCK_CRASH"}, ReplCommand{"theorem u : True := trivial"}});
    CHECK(s.exit_code == kMockExitCrash);
    CHECK(s.replies.empty());
}

TEST_CASE("malformed input exits with the dedicated code") {
    std::stringstream in("this is not json\n");
    std::stringstream out;
    CHECK(run_mock_checker(in, out, fast()) == kMockExitMalformed);
}

TEST_CASE("header and body costs are charged separately") {
    MockConfig config;
    config.header_cost = 0.2;
    config.body_cost = 0.05;
    auto timed = [&](const std::string& code) {
        const auto start = std::chrono::steady_clock::now();
        run({ReplCommand{code}}, config);
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    CHECK(timed("import Mathlib\n") == doctest::Approx(0.2).epsilon(0.5));
    CHECK(timed("theorem t : True := trivial") == doctest::Approx(0.05).epsilon(0.8));
    CHECK(timed("import Mathlib\ntheorem t : True := trivial") == doctest::Approx(0.25).epsilon(0.4));
}

TEST_CASE("MOCK_SLEEP adds its argument to the cost") {
    const auto start = std::chrono::steady_clock::now();
    run({ReplCommand{"theorem t : True := by\n  MOCK_SLEEP(0.3)\n  trivial"}});
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= 0.3);
}

TEST_CASE("infotree requests get one node per tactic line") {
    const std::string code = "theorem t : True := by\n  skip\n\n  -- comment\n  trivial";
    const auto s = run({ReplCommand{code, std::nullopt, InfotreeMode::tactics}});
    const auto reply = reply_from_json(s.replies[0]);
    REQUIRE(reply.infotree.has_value());
    const auto& tree = *reply.infotree;
    REQUIRE(tree.size() == 2);
    CHECK(tree[0]["range"]["start"] == json{{"line", 2}, {"column", 2}});
    CHECK(tree[0]["range"]["finish"] == json{{"line", 2}, {"column", 6}});
    CHECK(tree[1]["goalsBefore"] == json::array({"⊢ goal_1"}));
    CHECK(tree[1]["goalsAfter"].empty());
}

TEST_CASE("the call log records one line per command") {
    const std::string path = "mock_call_log_test.jsonl";
    std::remove(path.c_str());
    auto config = fast();
    config.call_log = path;
    run({ReplCommand{}, ReplCommand{"import A\n-- c\nimport B\n"}, ReplCommand{"theorem t : True := trivial", 0}}, config);
    std::ifstream in(path);
    std::vector<json> entries;
    std::string line;
    while (std::getline(in, line)) entries.push_back(json::parse(line));
    REQUIRE(entries.size() == 3);
    CHECK(entries[0]["kind"] == "probe");
    CHECK(entries[1]["kind"] == "import");
    CHECK(entries[1]["header"] == "import A\nimport B");
    CHECK(entries[1]["body"] == false);
    CHECK(entries[2]["kind"] == "body");
    CHECK(entries[2]["env"] == 0);
    CHECK(entries[2]["end"].get<double>() >= entries[2]["start"].get<double>());
    std::remove(path.c_str());
}

TEST_CASE("configuration validation") {
    MockConfig config;
    config.header_cost = -1;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    config = MockConfig{};
    config.jitter = 1.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}
