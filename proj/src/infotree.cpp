#include "proofgate/infotree.hpp"

#include <algorithm>
#include <numeric>

#include "proofgate/text.hpp"

namespace proofgate {

namespace {

Position read_position(const json& doc, const char* what) {
    if (!doc.is_object() || !doc.contains("line") || !doc.contains("column")) {
        throw MalformedTree(std::string("range.") + what + " needs line and column");
    }
    try {
        return Position{doc.at("line").get<int>(), doc.at("column").get<int>()};
    } catch (const json::exception&) {
        throw MalformedTree(std::string("range.") + what + " has non-integer coordinates");
    }
}

Goals read_goals(const json& node, const char* key) {
    auto it = node.find(key);
    if (it == node.end() || !it->is_array()) {
        throw MalformedTree(std::string("tactic node without ") + key);
    }
    Goals goals;
    for (const auto& g : *it) {
        if (!g.is_string()) {
            throw MalformedTree(std::string(key) + " entries must be strings");
        }
        goals.push_back(g.get<std::string>());
    }
    return goals;
}

std::size_t to_body_offset(std::string_view full, std::size_t header_size, const Position& pos) {
    const auto offset = byte_offset(full, pos.line, pos.column);
    return offset < header_size ? 0 : offset - header_size;
}

InfoTreeNode parse_node(const json& doc, std::string_view full, std::size_t header_size) {
    if (!doc.is_object()) {
        throw MalformedTree("tree node is not an object");
    }
    InfoTreeNode node;
    if (auto it = doc.find("kind"); it != doc.end() && it->is_string()) {
        node.kind = it->get<std::string>();
    }
    if (auto it = doc.find("name"); it != doc.end() && it->is_string()) {
        node.name = it->get<std::string>();
    }
    auto range = doc.find("range");
    if (range == doc.end() || !range->is_object() || !range->contains("start") || !range->contains("finish")) {
        throw MalformedTree("node without range");
    }
    node.start = read_position(range->at("start"), "start");
    node.finish = read_position(range->at("finish"), "finish");
    if (node.finish < node.start) {
        throw MalformedTree("range finishes before it starts");
    }
    node.start_offset = to_body_offset(full, header_size, node.start);
    node.end_offset = to_body_offset(full, header_size, node.finish);
    if (node.is_tactic()) {
        node.goals_before = read_goals(doc, "goalsBefore");
        node.goals_after = read_goals(doc, "goalsAfter");
    }
    if (auto it = doc.find("children"); it != doc.end() && !it->is_null()) {
        if (!it->is_array()) {
            throw MalformedTree("children must be an array");
        }
        for (const auto& child : *it) {
            node.children.push_back(parse_node(child, full, header_size));
        }
    }
    return node;
}

void clamp_into(InfoTreeNode& node, std::size_t lo, std::size_t hi) {
    node.start_offset = std::clamp(node.start_offset, lo, hi);
    node.end_offset = std::clamp(node.end_offset, node.start_offset, hi);
    for (auto& child : node.children) {
        clamp_into(child, node.start_offset, node.end_offset);
    }
}

bool is_calc(const InfoTreeNode& node) {
    std::string lowered = node.name;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(), [](unsigned char c) { return std::tolower(c); });
    return lowered.find("calc") != std::string::npos;
}

void collect(const InfoTreeNode& node, const ExtractOptions& options, std::vector<RawSpan>& out) {
    if (node.is_tactic()) {
        out.push_back(RawSpan{node.start_offset, node.end_offset, node.goals_before, node.goals_after});
        if (!options.split_calc && is_calc(node)) {
            return;
        }
    }
    for (const auto& child : node.children) {
        collect(child, options, out);
    }
}

std::string join_goals(const Goals& goals) {
    std::string out;
    for (std::size_t i = 0; i < goals.size(); ++i) {
        if (i > 0) {
            out += "\n\n";
        }
        out += goals[i];
    }
    return out;
}

}  // namespace

bool InfoTreeNode::is_tactic() const {
    return kind == "tactic" || kind == "TacticInfo";
}

InfoTreeNode parse_infotree(const json& document, std::string_view body, std::string_view header) {
    std::string full;
    full.reserve(header.size() + body.size());
    full.append(header).append(body);

    InfoTreeNode root;
    if (document.is_null()) {
        root.kind = "root";
        return root;
    }
    if (document.is_array()) {
        root.kind = "root";
        root.end_offset = body.size();
        for (const auto& child : document) {
            root.children.push_back(parse_node(child, full, header.size()));
        }
        // The virtual root spans whatever its children span so that nothing is clamped away.
        for (const auto& child : root.children) {
            root.end_offset = std::max(root.end_offset, child.end_offset);
        }
        for (auto& child : root.children) {
            clamp_into(child, 0, root.end_offset);
        }
        return root;
    }
    root = parse_node(document, full, header.size());
    clamp_into(root, root.start_offset, root.end_offset);
    return root;
}

std::vector<RawSpan> collect_tactic_spans(const InfoTreeNode& tree, const ExtractOptions& options) {
    std::vector<RawSpan> spans;
    collect(tree, options, spans);
    return spans;
}

std::vector<RawSpan> eliminate_overlaps(std::vector<RawSpan> spans) {
    std::erase_if(spans, [](const RawSpan& s) { return s.end_offset <= s.start_offset; });

    std::vector<std::size_t> order(spans.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (spans[a].start_offset != spans[b].start_offset) {
            return spans[a].start_offset < spans[b].start_offset;
        }
        return spans[a].end_offset > spans[b].end_offset;
    });

    struct Open {
        RawSpan span;
        bool truncated = false;
        std::size_t own_end = 0;
        Goals after;
    };
    std::vector<Open> resolved;
    resolved.reserve(order.size());
    std::vector<std::size_t> stack;  // indices into `resolved`, outermost first

    for (std::size_t idx : order) {
        RawSpan span = spans[idx];
        while (!stack.empty() && resolved[stack.back()].span.end_offset <= span.start_offset) {
            stack.pop_back();
        }
        if (!stack.empty()) {
            // Partial overlaps cannot come from a well-formed tree; treat the later span as nested.
            span.end_offset = std::min(span.end_offset, resolved[stack.back()].span.end_offset);
            auto& parent = resolved[stack.back()];
            if (!parent.truncated) {
                parent.truncated = true;
                parent.own_end = span.start_offset;
                parent.after = span.goals_before;
            }
        }
        Open open{span, false, span.end_offset, span.goals_after};
        // Outermost enclosing span that ends exactly where this one ends.
        for (std::size_t s : stack) {
            if (resolved[s].span.end_offset == span.end_offset) {
                open.after = resolved[s].span.goals_after;
                break;
            }
        }
        resolved.push_back(std::move(open));
        stack.push_back(resolved.size() - 1);
    }

    std::vector<RawSpan> out;
    for (auto& r : resolved) {
        const auto end = r.truncated ? r.own_end : r.span.end_offset;
        if (end <= r.span.start_offset) {
            continue;
        }
        out.push_back(RawSpan{r.span.start_offset, end, std::move(r.span.goals_before), std::move(r.after)});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const RawSpan& a, const RawSpan& b) { return a.start_offset < b.start_offset; });
    return out;
}

std::vector<ProofStep> carve_snippets(std::string_view body, const std::vector<RawSpan>& spans) {
    std::vector<ProofStep> steps;
    steps.reserve(spans.size());
    for (const auto& span : spans) {
        if (span.start_offset > span.end_offset || span.end_offset > body.size()) {
            throw SpanOutOfBounds("span [" + std::to_string(span.start_offset) + ", " +
                                  std::to_string(span.end_offset) + ") exceeds body of " +
                                  std::to_string(body.size()) + " bytes");
        }
        steps.push_back(ProofStep{std::string(body.substr(span.start_offset, span.end_offset - span.start_offset)),
                                  span.goals_before, span.goals_after, span.start_offset, span.end_offset});
    }
    return steps;
}

std::vector<ProofStep> adjust_boundaries(std::vector<ProofStep> steps, std::string_view body) {
    std::erase_if(steps, [&](const ProofStep& s) {
        return start_of_content(body, s.start_offset, s.end_offset) == s.end_offset;
    });
    if (steps.empty()) {
        return steps;
    }

    // Each step ends after the last content byte before the next step begins;
    // what follows (whitespace and comments) opens the next step.
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto content_end = end_of_content(body, steps[i].start_offset, steps[i].end_offset);
        const auto limit = i + 1 < steps.size() ? steps[i + 1].start_offset : body.size();
        const auto split = std::max(content_end, end_of_content(body, content_end, limit));
        steps[i].end_offset = split;
        if (i + 1 < steps.size()) {
            steps[i + 1].start_offset = split;
        }
    }

    std::vector<ProofStep> fused;
    fused.reserve(steps.size());
    std::optional<ProofStep> opener;
    for (auto& step : steps) {
        if (opener) {
            step.start_offset = opener->start_offset;
            step.goals_before = std::move(opener->goals_before);
            opener.reset();
        }
        const auto first = start_of_content(body, step.start_offset, step.end_offset);
        const auto last = end_of_content(body, step.start_offset, step.end_offset);
        if (body.substr(first, last - first) == "by" && &step != &steps.back()) {
            opener = std::move(step);
            continue;
        }
        fused.push_back(std::move(step));
    }

    for (auto& step : fused) {
        step.tactic = std::string(body.substr(step.start_offset, step.end_offset - step.start_offset));
    }
    return fused;
}

std::vector<ProofStep> extract_data(const json& document, std::string_view body, std::string_view header,
                                    const ExtractOptions& options) {
    const auto tree = parse_infotree(document, body, header);
    auto spans = eliminate_overlaps(collect_tactic_spans(tree, options));
    return adjust_boundaries(carve_snippets(body, spans), body);
}

json to_json(const ProofStep& step) {
    return json{{"tactic", step.tactic},
                {"goalsBefore", step.goals_before},
                {"goalsAfter", step.goals_after},
                {"span", {{"start", step.start_offset}, {"end", step.end_offset}}}};
}

ProofStep proof_step_from_json(const json& doc) {
    ProofStep step;
    step.tactic = doc.at("tactic").get<std::string>();
    step.goals_before = doc.at("goalsBefore").get<Goals>();
    step.goals_after = doc.at("goalsAfter").get<Goals>();
    step.start_offset = doc.at("span").at("start").get<std::size_t>();
    step.end_offset = doc.at("span").at("end").get<std::size_t>();
    return step;
}

std::string format_intervals(const std::vector<ProofStep>& steps) {
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        out += "INTERVAL " + std::to_string(i + 1) + "\n";
        out += "-----\nGoals before:\n" + join_goals(steps[i].goals_before) + "\n";
        out += "-----\nTactic:\n" + steps[i].tactic + "\n";
        out += "-----\nGoals after:\n" + join_goals(steps[i].goals_after) + "\n";
        out += "--------------------\n";
    }
    return out;
}

}  // namespace proofgate
