#include <doctest.h>

#include <random>

#include "proofgate/protocol.hpp"
#include "proofgate/text.hpp"

using namespace proofgate;

TEST_CASE("split_snippet separates the leading import block") {
    const std::string code = "import Mathlib\nimport Aesop\n\ntheorem t : 1 = 1 := by\n  rfl\n";
    const auto split = split_snippet(code);
    CHECK(split.header == "import Mathlib\nimport Aesop\n");
    CHECK(split.body == "\ntheorem t : 1 = 1 := by\n  rfl\n");
}

TEST_CASE("split_snippet keeps comments between imports in the header") {
    const std::string code = "-- preamble\nimport A\n/- block\n   comment -/\nimport B\ntheorem x : True := trivial";
    const auto split = split_snippet(code);
    CHECK(split.header == "-- preamble\nimport A\n/- block\n   comment -/\nimport B\n");
    CHECK(split.body == "theorem x : True := trivial");
}

TEST_CASE("split_snippet without imports leaves everything in the body") {
    for (std::string code : {"theorem t : True := trivial", "-- just a comment\ntheorem t : True := trivial", ""}) {
        const auto split = split_snippet(code);
        CHECK(split.header.empty());
        CHECK(split.body == code);
    }
}

TEST_CASE("split_snippet stops at the first non-import line") {
    const auto split = split_snippet("import A\ndef x := 1\nimport B\n");
    CHECK(split.header == "import A\n");
    CHECK(split.body == "def x := 1\nimport B\n");
}

TEST_CASE("split_snippet does not mistake identifiers for imports") {
    const auto split = split_snippet("imports_are_fun : Nat := 1\n");
    CHECK(split.header.empty());
}

TEST_CASE("split_snippet with a header and no trailing newline") {
    const auto split = split_snippet("import Mathlib");
    CHECK(split.header == "import Mathlib");
    CHECK(split.body.empty());
}

TEST_CASE("normalize_header drops comments, blanks and trailing spaces") {
    CHECK(normalize_header("import A   \n\n-- note\nimport B\n") == "import A\nimport B");
    CHECK(normalize_header("/- multi\nline -/\nimport A\n") == "import A");
    CHECK(normalize_header("") == "");
    CHECK(normalize_header("import A\r\n") == "import A");
}

TEST_CASE("normalize_header is sensitive to import order") {
    CHECK(normalize_header("import A\nimport B") != normalize_header("import B\nimport A"));
}

TEST_CASE("analyze ranks errors over sorries over success") {
    ReplReply reply;
    CHECK(analyze(reply).status == Status::valid);

    reply.messages.push_back(Diagnostic{Severity::warning, {1, 0}, std::nullopt, "unused variable"});
    CHECK(analyze(reply).status == Status::valid);

    reply.sorries.push_back(Sorry{{2, 2}, Position{2, 7}, "⊢ p"});
    CHECK(analyze(reply).status == Status::sorry);

    reply.messages.push_back(Diagnostic{Severity::error, {3, 0}, std::nullopt, "type mismatch"});
    const auto verdict = analyze(reply);
    CHECK(verdict.status == Status::invalid);
    CHECK(verdict.diagnostics.size() == 2);
}

TEST_CASE("commands encode to a single line") {
    const ReplCommand command{"theorem t :\n  True := trivial", 3, InfotreeMode::tactics};
    const auto line = encode_command(command);
    CHECK(line.back() == '\n');
    CHECK(line.find('\n') == line.size() - 1);
    CHECK(json::parse(line) == json{{"cmd", command.cmd}, {"env", 3}, {"infotree", "tactics"}});
    CHECK(decode_command(line) == command);
}

TEST_CASE("commands omit absent env and infotree") {
    const auto doc = json::parse(encode_command(ReplCommand{"import A", std::nullopt, InfotreeMode::none}));
    CHECK(doc == json{{"cmd", "import A"}});
}

TEST_CASE("decode_command rejects garbage") {
    CHECK_THROWS_AS(decode_command("not json"), MalformedCommand);
    CHECK_THROWS_AS(decode_command("[1,2]"), MalformedCommand);
    CHECK_THROWS_AS(decode_command(R"({"env": 1})"), MalformedCommand);
    CHECK_THROWS_AS(decode_command(R"({"cmd": "x", "infotree": "bogus"})"), MalformedCommand);
}

TEST_CASE("replies decode the checker's field names") {
    const auto reply = decode_reply(R"({"env": 4,
        "messages": [{"severity": "error", "pos": {"line": 2, "column": 4},
                      "endPos": {"line": 2, "column": 9}, "data": "unknown tactic"}],
        "sorries": [{"pos": {"line": 3, "column": 2}, "endPos": null, "goal": "⊢ False"}],
        "time": 0.25})");
    CHECK(reply.env == 4);
    REQUIRE(reply.messages.size() == 1);
    CHECK(reply.messages[0].severity == Severity::error);
    CHECK(reply.messages[0].pos == Position{2, 4});
    CHECK(reply.messages[0].end_pos == Position{2, 9});
    REQUIRE(reply.sorries.size() == 1);
    CHECK_FALSE(reply.sorries[0].end_pos.has_value());
    CHECK(reply.time == doctest::Approx(0.25));
}

TEST_CASE("replies tolerate missing optional fields") {
    const auto reply = decode_reply(R"({"env": 0})");
    CHECK(reply.messages.empty());
    CHECK(reply.sorries.empty());
    CHECK(reply.time == 0.0);
    CHECK_FALSE(reply.infotree.has_value());
}

TEST_CASE("malformed replies are rejected") {
    CHECK_THROWS_AS(decode_reply("garbage"), MalformedReply);
    CHECK_THROWS_AS(decode_reply("[]"), MalformedReply);
    CHECK_THROWS_AS(decode_reply(R"({"message": "Unknown environment."})"), MalformedReply);
    CHECK_THROWS_AS(decode_reply(R"({"env": -1})"), MalformedReply);
    CHECK_THROWS_AS(decode_reply(R"({"env": "3"})"), MalformedReply);
    CHECK_THROWS_AS(decode_reply(R"({"env": 1, "time": -2})"), MalformedReply);
    CHECK_THROWS_AS(decode_reply(R"({"env": 1, "messages": [{"severity": "fatal", "pos": {"line": 1, "column": 0}, "data": ""}]})"),
                    MalformedReply);
}

TEST_CASE("status names round-trip") {
    for (Status s : {Status::valid, Status::invalid, Status::sorry, Status::timeout, Status::crashed}) {
        CHECK(status_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(status_from_string("maybe"), std::invalid_argument);
}

namespace {

std::string random_text(std::mt19937& rng) {
    static const std::vector<std::string> pieces = {"a", "Nat", " ", "\n", "\"", "\\", "⊢", "∀", "é", "\t", "{", "}",
                                                    "import", "--", "/-", "-/", "sorry", "\x01"};
    std::uniform_int_distribution<std::size_t> count(0, 12);
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    std::string out;
    for (auto n = count(rng); n > 0; --n) out += pieces[pick(rng)];
    return out;
}

Position random_position(std::mt19937& rng) {
    std::uniform_int_distribution<int> line(1, 500);
    std::uniform_int_distribution<int> col(0, 200);
    return Position{line(rng), col(rng)};
}

}  // namespace

TEST_CASE("property: reply and command codecs round-trip") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> small(0, 4);
    std::uniform_int_distribution<EnvId> env(0, 1'000'000);
    for (int trial = 0; trial < 500; ++trial) {
        ReplReply reply;
        reply.env = env(rng);
        for (int i = small(rng); i > 0; --i) {
            reply.messages.push_back(Diagnostic{static_cast<Severity>(small(rng) % 3), random_position(rng),
                                                small(rng) % 2 ? std::optional(random_position(rng)) : std::nullopt,
                                                random_text(rng)});
        }
        for (int i = small(rng); i > 0; --i) {
            reply.sorries.push_back(Sorry{random_position(rng), random_position(rng), random_text(rng)});
        }
        reply.time = small(rng) * 0.125;
        if (small(rng) == 0) reply.infotree = json::array({json{{"kind", "tactic"}}});

        const auto line = encode_reply(reply);
        CHECK(line.find('\n') == line.size() - 1);
        CHECK(decode_reply(line) == reply);

        const ReplCommand command{random_text(rng), small(rng) % 2 ? std::optional(env(rng)) : std::nullopt,
                                  static_cast<InfotreeMode>(small(rng) % 3)};
        const auto encoded = encode_command(command);
        CHECK(encoded.find('\n') == encoded.size() - 1);
        CHECK(decode_command(encoded) == command);
    }
}

TEST_CASE("property: split is lossless and the header holds only import, comment or blank lines") {
    std::mt19937 rng(11);
    static const std::vector<std::string> lines = {"import Mathlib", "import Aesop", "", "-- c", "/- a -/",
                                                   "/- open", "still -/", "theorem t : True := by", "  trivial",
                                                   "  import_like", "open Nat", "   "};
    std::uniform_int_distribution<std::size_t> pick(0, lines.size() - 1);
    std::uniform_int_distribution<int> count(0, 9);
    for (int trial = 0; trial < 2000; ++trial) {
        std::string code;
        for (int n = count(rng); n > 0; --n) code += lines[pick(rng)] + "\n";
        const auto split = split_snippet(code);
        REQUIRE(split.header + split.body == code);

        if (!split.header.empty()) {
            // The header ends right after an import line.
            const auto header_lines = split_lines(split.header);
            CHECK(is_import_line(header_lines.back()));
            // Normalizing a header twice changes nothing.
            const auto key = normalize_header(split.header);
            CHECK(normalize_header(key) == key);
            CHECK_FALSE(key.empty());
        }
        // The body never starts with another import.
        const auto rest = split_snippet(split.body);
        if (!split.header.empty()) {
            CHECK(rest.header.empty());
        }
    }
}
