#pragma once

// Turns a checker infotree plus the proof body into an ordered list of
// non-overlapping tactic steps with their goal states.
//
// Pipeline: parse_infotree -> collect_tactic_spans -> eliminate_overlaps
//           -> carve_snippets -> adjust_boundaries.
//
// All offsets are byte offsets into the body. Tree ranges arrive as
// (1-based line, 0-based codepoint column) over `header + body`; the header
// length is subtracted after conversion. Trees produced by this server are
// already body-relative because bodies are sent as separate commands, so the
// header argument defaults to empty.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "proofgate/protocol.hpp"

namespace proofgate {

class MalformedTree : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SpanOutOfBounds : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Goals = std::vector<std::string>;

struct InfoTreeNode {
    std::string kind;
    std::string name;
    Position start;
    Position finish;
    std::size_t start_offset = 0;
    std::size_t end_offset = 0;
    Goals goals_before;
    Goals goals_after;
    std::vector<InfoTreeNode> children;

    bool is_tactic() const;
};

struct RawSpan {
    std::size_t start_offset = 0;
    std::size_t end_offset = 0;
    Goals goals_before;
    Goals goals_after;

    bool operator==(const RawSpan&) const = default;
};

struct ProofStep {
    std::string tactic;
    Goals goals_before;
    Goals goals_after;
    std::size_t start_offset = 0;
    std::size_t end_offset = 0;

    bool operator==(const ProofStep&) const = default;
};

struct ExtractOptions {
    /// When false, calc blocks stay single steps even if the tree has child tactics.
    bool split_calc = true;
};

/// Accepts one node object, an array of root nodes, or null (empty tree).
/// Children that escape their parent's range are clamped into it.
InfoTreeNode parse_infotree(const json& document, std::string_view body, std::string_view header = {});

/// Pre-order spans of every tactic node. Overlaps are expected here.
std::vector<RawSpan> collect_tactic_spans(const InfoTreeNode& tree, const ExtractOptions& options = {});

/// Child-priority overlap resolution. Each parent keeps only the region before
/// its first child; a parent whose children start at its own start vanishes.
/// A truncated parent's goalsAfter is its first child's goalsBefore. An
/// untruncated span that ends where enclosing spans end takes the goalsAfter of
/// the outermost such span, since that is the state the following step sees.
/// Output is sorted and pairwise disjoint.
std::vector<RawSpan> eliminate_overlaps(std::vector<RawSpan> spans);

/// Throws SpanOutOfBounds when a span leaves the body.
std::vector<ProofStep> carve_snippets(std::string_view body, const std::vector<RawSpan>& spans);

/// Redistributes the text between steps: trailing trivia (whitespace and
/// comments) moves to the next step, separators such as `;` stay with the
/// step before them, trivia after the last step is dropped, trivia-only steps
/// disappear, and a bare `by` step is fused into the step it opens.
std::vector<ProofStep> adjust_boundaries(std::vector<ProofStep> steps, std::string_view body);

std::vector<ProofStep> extract_data(const json& document, std::string_view body, std::string_view header = {},
                                    const ExtractOptions& options = {});

json to_json(const ProofStep& step);
ProofStep proof_step_from_json(const json& doc);

/// Human-readable listing: one INTERVAL block per step with goals before,
/// tactic and goals after.
std::string format_intervals(const std::vector<ProofStep>& steps);

}  // namespace proofgate
