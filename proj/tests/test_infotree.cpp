#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "proofgate/infotree.hpp"
#include "proofgate/protocol.hpp"
#include "proofgate/text.hpp"
#include "support/extract_oracles.hpp"

using namespace proofgate;
using namespace proofgate::testing;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing fixture " << path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_step_invariants(const std::vector<ProofStep>& steps, std::string_view body) {
    for (std::size_t i = 0; i < steps.size(); ++i) {
        REQUIRE(steps[i].start_offset <= steps[i].end_offset);
        REQUIRE(steps[i].end_offset <= body.size());
        CHECK(steps[i].tactic == body.substr(steps[i].start_offset, steps[i].end_offset - steps[i].start_offset));
        if (i + 1 < steps.size()) {
            CHECK(steps[i].end_offset <= steps[i + 1].start_offset);
        }
    }
    if (steps.empty()) return;
    std::string joined;
    for (const auto& s : steps) joined += s.tactic;
    const auto first = steps.front().start_offset;
    const auto last = steps.back().end_offset;
    CHECK(joined == body.substr(first, last - first));
    CHECK(only_trivia(body.substr(last)));
}

}  // namespace

TEST_SUITE("parse_infotree") {
    TEST_CASE("single node spanning the whole body") {
        const std::string body = "norm_num";
        const auto tree = parse_infotree(tactic_node(body, 0, body.size(), {"⊢ 1 = 1"}, {}), body);
        CHECK(tree.is_tactic());
        CHECK(tree.start_offset == 0);
        CHECK(tree.end_offset == body.size());
    }

    TEST_CASE("missing goalsBefore is malformed") {
        const std::string body = "simp";
        auto node = tactic_node(body, 0, 4, {"g"}, {});
        node.erase("goalsBefore");
        CHECK_THROWS_AS(parse_infotree(node, body), MalformedTree);
    }

    TEST_CASE("missing range is malformed") {
        json node{{"kind", "tactic"}, {"goalsBefore", json::array()}, {"goalsAfter", json::array()}};
        CHECK_THROWS_AS(parse_infotree(node, "x"), MalformedTree);
    }

    TEST_CASE("children escaping their parent are clamped") {
        const std::string body = "abc def ghi";
        auto child = tactic_node(body, 2, 11, {"c"}, {});
        auto root = tactic_node(body, 0, 7, {"r"}, {}, json::array({child}));
        const auto tree = parse_infotree(root, body);
        REQUIRE(tree.children.size() == 1);
        CHECK(tree.children[0].start_offset == 2);
        CHECK(tree.children[0].end_offset == 7);
    }

    TEST_CASE("columns count codepoints and the header is subtracted") {
        const std::string header = "import Mathlib\n";
        const std::string body = "\nexample : a ≠ b := by simp";
        const std::string full = header + body;
        // `simp` starts at codepoint column 22 of line 3 in the full text.
        json node{{"kind", "tactic"},
                  {"range", {{"start", {{"line", 3}, {"column", 22}}}, {"finish", {{"line", 3}, {"column", 26}}}}},
                  {"goalsBefore", {"g"}},
                  {"goalsAfter", json::array()}};
        const auto tree = parse_infotree(node, body, header);
        CHECK(body.substr(tree.start_offset, tree.end_offset - tree.start_offset) == "simp");
    }

    TEST_CASE("non-tactic nodes need no goals") {
        json node{{"kind", "term"}, {"range", range_json("x", 0, 1)}};
        CHECK_NOTHROW(parse_infotree(node, "x"));
    }
}

TEST_SUITE("collect_tactic_spans") {
    TEST_CASE("tree with no tactic nodes yields nothing") {
        json node{{"kind", "command"}, {"range", range_json("abc", 0, 3)}, {"children", json::array()}};
        CHECK(collect_tactic_spans(parse_infotree(node, "abc")).empty());
    }

    TEST_CASE("nested have-with-by keeps overlapping parent and children") {
        const std::string body = "have h : p := by simp; ring";
        auto simp = tactic_node(body, 17, 21, {"p"}, {"q"});
        auto ring = tactic_node(body, 23, 27, {"q"}, {});
        auto by = tactic_node(body, 14, 27, {"p"}, {}, json::array({simp, ring}));
        auto have = tactic_node(body, 0, 27, {"main"}, {"main'"}, json::array({by}));
        const auto spans = collect_tactic_spans(parse_infotree(have, body));
        REQUIRE(spans.size() == 4);
        CHECK(spans[0].start_offset == 0);
        CHECK(spans[0].end_offset == 27);
        CHECK(spans[1].start_offset == 14);
        CHECK(spans[1].end_offset > spans[2].start_offset);
    }

    TEST_CASE("calc splitting can be turned off") {
        const std::string body = "calc a = b := by simp\n  _ = c := by ring";
        auto step1 = tactic_node(body, 17, 21, {"a = b"}, {});
        auto step2 = tactic_node(body, 37, 41, {"b = c"}, {});
        auto calc = tactic_node(body, 0, body.size(), {"a = c"}, {}, json::array({step1, step2}));
        calc["name"] = "Lean.calcTactic";
        const auto tree = parse_infotree(calc, body);
        CHECK(collect_tactic_spans(tree).size() == 3);
        CHECK(collect_tactic_spans(tree, ExtractOptions{.split_calc = false}).size() == 1);
    }
}

TEST_SUITE("eliminate_overlaps") {
    TEST_CASE("already disjoint spans are unchanged") {
        const std::vector<RawSpan> spans{span(0, 3, {"a"}, {"b"}), span(4, 9, {"b"}, {"c"}), span(9, 12, {"c"}, {})};
        CHECK(eliminate_overlaps(spans) == spans);
    }

    TEST_CASE("parent truncated to the region before its first child") {
        const std::vector<RawSpan> spans{span(0, 100, {"P"}, {"P'"}), span(20, 50, {"A"}, {"A'"}),
                                         span(60, 90, {"B"}, {"B'"})};
        const auto out = eliminate_overlaps(spans);
        REQUIRE(out.size() == 3);
        CHECK(out[0] == span(0, 20, {"P"}, {"A"}));
        CHECK(out[1] == span(20, 50, {"A"}, {"A'"}));
        CHECK(out[2] == span(60, 90, {"B"}, {"B'"}));
        CHECK(out == brute_force_decomposition(spans));
    }

    TEST_CASE("parent fully covered from its start is dropped") {
        const std::vector<RawSpan> spans{span(0, 10, {"seq"}, {}), span(0, 4, {"x"}, {"y"}), span(5, 10, {"y"}, {"z"})};
        const auto out = eliminate_overlaps(spans);
        REQUIRE(out.size() == 2);
        CHECK(out[0].start_offset == 0);
        CHECK(out[0].end_offset == 4);
        // The last child closes the sequence, so the state after it is the sequence's.
        CHECK(out[1].goals_after == Goals{});
    }

    TEST_CASE("last nested step inherits the state after the outermost enclosing step") {
        // have [0,30) > by [10,30) > rw [13,19), simp [21,30)
        const std::vector<RawSpan> spans{span(0, 30, {"main"}, {"main+this"}), span(10, 30, {"sub"}, {}),
                                         span(13, 19, {"sub"}, {"sub'"}), span(21, 30, {"sub'"}, {})};
        const auto out = eliminate_overlaps(spans);
        REQUIRE(out.size() == 4);
        CHECK(out[3].goals_after == Goals{"main+this"});
        CHECK(out == brute_force_decomposition(spans));
    }

    TEST_CASE("random laminar families match the ownership oracle") {
        std::mt19937 rng(20240501);
        for (int trial = 0; trial < 2000; ++trial) {
            std::vector<RawSpan> spans;
            int label = 0;
            random_laminar(rng, 0, 30, 6, spans, label);
            if (trial % 7 == 0 && !spans.empty()) spans.push_back(spans.front());  // identical ranges
            std::shuffle(spans.begin(), spans.end(), rng);
            // Input order decides ties; sort parents first the way collection emits them.
            std::stable_sort(spans.begin(), spans.end(), [](const RawSpan& a, const RawSpan& b) {
                return a.start_offset != b.start_offset ? a.start_offset < b.start_offset : a.end_offset > b.end_offset;
            });
            const auto out = eliminate_overlaps(spans);
            REQUIRE(out == brute_force_decomposition(spans));
            CHECK(eliminate_overlaps(out) == out);
        }
    }
}

TEST_SUITE("carve_snippets") {
    TEST_CASE("full slice") {
        const auto steps = carve_snippets("norm_num", {span(0, 8)});
        REQUIRE(steps.size() == 1);
        CHECK(steps[0].tactic == "norm_num");
    }

    TEST_CASE("split at the separator") {
        const auto steps = carve_snippets("rw [h]; norm_num", {span(0, 7), span(7, 16)});
        REQUIRE(steps.size() == 2);
        CHECK(steps[0].tactic == "rw [h];");
        CHECK(steps[1].tactic == " norm_num");
    }

    TEST_CASE("span beyond the body") {
        CHECK_THROWS_AS(carve_snippets("simp", {span(0, 9)}), SpanOutOfBounds);
    }
}

TEST_SUITE("adjust_boundaries") {
    TEST_CASE("comment gap rides with the following step") {
        const std::string body = "simp\n  -- comment\n  have ha : a := foo";
        auto steps = carve_snippets(body, {span(0, 4), span(20, body.size())});
        const auto out = adjust_boundaries(steps, body);
        REQUIRE(out.size() == 2);
        CHECK(out[1].tactic == "\n  -- comment\n  have ha : a := foo");
    }

    TEST_CASE("no gaps is the identity") {
        const std::string body = "abcdef";
        const auto steps = carve_snippets(body, {span(0, 3, {"x"}, {"y"}), span(3, 6, {"y"}, {"z"})});
        CHECK(adjust_boundaries(steps, body) == steps);
    }

    TEST_CASE("separators stay with the step before them") {
        const std::string body = "rw [h]; norm_num";
        const auto out = adjust_boundaries(carve_snippets(body, {span(0, 6), span(8, 16)}), body);
        REQUIRE(out.size() == 2);
        CHECK(out[0].tactic == "rw [h];");
        CHECK(out[1].tactic == " norm_num");
    }

    TEST_CASE("trailing comments are discarded without changing the step count") {
        const std::string body = "simp\nring\n  -- done\n/- end -/\n";
        const auto out = adjust_boundaries(carve_snippets(body, {span(0, 4), span(5, 9)}), body);
        REQUIRE(out.size() == 2);
        CHECK(out[1].tactic == "\nring");
        check_step_invariants(out, body);
    }

    TEST_CASE("bare by fuses into the step it opens") {
        const std::string body = "x := by simp";
        auto steps = carve_snippets(body, {span(5, 8, {"g"}, {"g"}), span(8, 12, {"g"}, {})});
        const auto out = adjust_boundaries(steps, body);
        REQUIRE(out.size() == 1);
        CHECK(out[0].tactic == "by simp");
        CHECK(out[0].goals_before == Goals{"g"});
    }
}

TEST_SUITE("extract_data") {
    TEST_CASE("empty body with empty tree") {
        CHECK(extract_data(json::array(), "").empty());
        CHECK(extract_data(nullptr, "").empty());
    }

    TEST_CASE("golden proof fixture") {
        const auto source = read_file(PROOFGATE_FIXTURES "/algebra_4013.lean");
        const auto tree = json::parse(read_file(PROOFGATE_FIXTURES "/algebra_4013.infotree.json"));
        const auto golden = read_file(PROOFGATE_FIXTURES "/algebra_4013.intervals.txt");
        const auto [header, body] = split_snippet(source);
        CHECK(header == "import Mathlib\n");

        const auto parsed = parse_infotree(tree, body);
        const auto raw = collect_tactic_spans(parsed);
        const auto steps = extract_data(tree, body);
        REQUIRE(steps.size() >= 5);
        CHECK(raw.size() >= steps.size());
        check_step_invariants(steps, body);

        CHECK(steps[0].tactic == "by\n  -- need ne_zero condition to perform division\n  have : a * b * c ≠ 0 :=");
        CHECK(steps[1].tactic == " by rw [h];");
        CHECK(steps[2].tactic == " norm_num");
        CHECK(steps[3].tactic == "\n  have ha : a ≠ 0 := left_ne_zero_of_mul <| left_ne_zero_of_mul this");
        CHECK(steps[0].goals_after == steps[1].goals_before);
        REQUIRE(!steps[0].goals_before.empty());
        CHECK(steps[0].goals_before.back().ends_with(
            "⊢ a / (a * b + a + 1) + b / (b * c + b + 1) + c / (c * a + c + 1) = 1"));

        const std::vector<ProofStep> first_five(steps.begin(), steps.begin() + 5);
        auto listing = format_intervals(first_five);
        // The printed listing has no separator after its final block.
        const std::string sep = "--------------------\n";
        REQUIRE(listing.ends_with(sep));
        listing.resize(listing.size() - sep.size());
        CHECK(listing == golden);

        for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
            INFO("step " << i << ": " << steps[i].tactic);
        }
    }

    TEST_CASE("header-relative trees need the header to line up") {
        const auto source = read_file(PROOFGATE_FIXTURES "/algebra_4013.lean");
        const auto tree = json::parse(read_file(PROOFGATE_FIXTURES "/algebra_4013.infotree.json"));
        const auto [header, body] = split_snippet(source);
        // The fixture is body-relative; reading it against the full script shifts every span.
        const auto shifted = extract_data(tree, source);
        const auto aligned = extract_data(tree, body);
        CHECK(shifted.front().tactic != aligned.front().tactic);
    }

    TEST_CASE("synthetic trees satisfy the step invariants") {
        ProofGenerator gen(7);
        for (int i = 0; i < 1000; ++i) {
            const auto proof = gen.make(i % 3 == 0);
            const auto steps = extract_data(proof.tree, proof.body);
            INFO("body: " << proof.body);
            check_step_invariants(steps, proof.body);
            auto spans = eliminate_overlaps(collect_tactic_spans(parse_infotree(proof.tree, proof.body)));
            CHECK(eliminate_overlaps(spans) == spans);
            if (proof.linear) {
                for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
                    CHECK(steps[k].goals_after == steps[k + 1].goals_before);
                }
            }
        }
    }

    TEST_CASE("steps round-trip through JSON") {
        ProofStep step{"simp", {"a"}, {"b"}, 3, 7};
        CHECK(proof_step_from_json(to_json(step)) == step);
    }
}
