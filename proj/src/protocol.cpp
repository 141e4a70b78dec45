#include "proofgate/protocol.hpp"

#include <algorithm>

#include "proofgate/text.hpp"

namespace proofgate {

namespace {

// Line-level classification used by split_snippet and normalize_header.
enum class LineKind { blank, comment, import, other };

// Scans one line, updating the block-comment nesting depth carried across lines.
LineKind classify_line(std::string_view line, int& block_depth) {
    std::size_t i = 0;
    bool saw_comment = false;
    while (i < line.size()) {
        if (block_depth > 0) {
            if (line.compare(i, 2, "-/") == 0) {
                --block_depth;
                i += 2;
            } else if (line.compare(i, 2, "/-") == 0) {
                ++block_depth;
                i += 2;
            } else {
                ++i;
            }
            saw_comment = true;
            continue;
        }
        const char c = line[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++i;
            continue;
        }
        if (line.compare(i, 2, "--") == 0) {
            return LineKind::comment;
        }
        if (line.compare(i, 2, "/-") == 0) {
            ++block_depth;
            i += 2;
            saw_comment = true;
            continue;
        }
        if (!saw_comment && is_import_line(line.substr(i))) {
            return LineKind::import;
        }
        return LineKind::other;
    }
    return saw_comment ? LineKind::comment : LineKind::blank;
}

json position_to_json(const Position& pos) {
    return json{{"line", pos.line}, {"column", pos.column}};
}

Position position_from_json(const json& doc) {
    if (!doc.is_object()) {
        throw MalformedReply("position is not an object");
    }
    return Position{doc.at("line").get<int>(), doc.at("column").get<int>()};
}

std::optional<Position> optional_position(const json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) {
        return std::nullopt;
    }
    return position_from_json(*it);
}

Severity severity_from_string(std::string_view name) {
    if (name == "error") return Severity::error;
    if (name == "warning") return Severity::warning;
    if (name == "info" || name == "information") return Severity::info;
    throw MalformedReply("unknown severity: " + std::string(name));
}

json sorry_to_json(const Sorry& sorry) {
    json doc{{"pos", position_to_json(sorry.pos)}, {"goal", sorry.goal}};
    doc["endPos"] = sorry.end_pos ? position_to_json(*sorry.end_pos) : json(nullptr);
    return doc;
}

Sorry sorry_from_json(const json& doc) {
    Sorry sorry;
    sorry.pos = position_from_json(doc.at("pos"));
    sorry.end_pos = optional_position(doc, "endPos");
    if (auto it = doc.find("goal"); it != doc.end() && it->is_string()) {
        sorry.goal = it->get<std::string>();
    }
    return sorry;
}

}  // namespace

std::string_view to_string(InfotreeMode mode) {
    switch (mode) {
        case InfotreeMode::none: return "none";
        case InfotreeMode::tactics: return "tactics";
        case InfotreeMode::full: return "full";
    }
    return "none";
}

InfotreeMode infotree_mode_from_string(std::string_view name) {
    if (name == "none") return InfotreeMode::none;
    if (name == "tactics") return InfotreeMode::tactics;
    if (name == "full") return InfotreeMode::full;
    throw std::invalid_argument("unknown infotree mode: " + std::string(name));
}

std::string_view to_string(Severity severity) {
    switch (severity) {
        case Severity::error: return "error";
        case Severity::warning: return "warning";
        case Severity::info: return "info";
    }
    return "error";
}

std::string_view to_string(Status status) {
    switch (status) {
        case Status::valid: return "valid";
        case Status::invalid: return "invalid";
        case Status::sorry: return "sorry";
        case Status::timeout: return "timeout";
        case Status::crashed: return "crashed";
    }
    return "crashed";
}

Status status_from_string(std::string_view name) {
    for (Status s : {Status::valid, Status::invalid, Status::sorry, Status::timeout, Status::crashed}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw std::invalid_argument("unknown status: " + std::string(name));
}

bool ReplReply::has_errors() const {
    return std::any_of(messages.begin(), messages.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::error; });
}

bool is_import_line(std::string_view line) {
    const auto text = trim_left(line);
    if (!text.starts_with("import")) {
        return false;
    }
    return text.size() == 6 || text[6] == ' ' || text[6] == '\t' || text[6] == '\r';
}

SplitSource split_snippet(std::string_view code) {
    std::size_t split = 0;
    std::size_t pos = 0;
    int block_depth = 0;
    while (pos < code.size()) {
        const auto newline = code.find('\n', pos);
        const auto line_end = newline == std::string_view::npos ? code.size() : newline + 1;
        const auto line = code.substr(pos, line_end - pos);
        const auto kind = classify_line(line, block_depth);
        if (kind == LineKind::other) {
            break;
        }
        if (kind == LineKind::import) {
            split = line_end;
        }
        pos = line_end;
    }
    return SplitSource{std::string(code.substr(0, split)), std::string(code.substr(split))};
}

HeaderKey normalize_header(std::string_view header) {
    std::string key;
    int block_depth = 0;
    for (auto line : split_lines(header)) {
        const bool inside_comment = block_depth > 0;
        const auto kind = classify_line(line, block_depth);
        if (inside_comment || kind == LineKind::blank || kind == LineKind::comment) {
            continue;
        }
        if (!key.empty()) {
            key += '\n';
        }
        key += trim_right(line);
    }
    return key;
}

Verdict analyze(const ReplReply& reply) {
    Verdict verdict;
    verdict.diagnostics = reply.messages;
    if (reply.has_errors()) {
        verdict.status = Status::invalid;
    } else if (!reply.sorries.empty()) {
        verdict.status = Status::sorry;
    } else {
        verdict.status = Status::valid;
    }
    return verdict;
}

std::string encode_command(const ReplCommand& command) {
    json doc{{"cmd", command.cmd}};
    if (command.env) {
        doc["env"] = *command.env;
    }
    if (command.infotree != InfotreeMode::none) {
        doc["infotree"] = std::string(to_string(command.infotree));
    }
    return doc.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

ReplCommand decode_command(std::string_view line) {
    const auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw MalformedCommand("command is not a JSON object");
    }
    try {
        ReplCommand command;
        command.cmd = doc.at("cmd").get<std::string>();
        if (auto it = doc.find("env"); it != doc.end() && !it->is_null()) {
            command.env = it->get<EnvId>();
        }
        if (auto it = doc.find("infotree"); it != doc.end() && !it->is_null()) {
            command.infotree = infotree_mode_from_string(it->get<std::string>());
        }
        return command;
    } catch (const json::exception& e) {
        throw MalformedCommand(e.what());
    } catch (const std::invalid_argument& e) {
        throw MalformedCommand(e.what());
    }
}

json to_json(const Diagnostic& diagnostic) {
    json doc{{"severity", std::string(to_string(diagnostic.severity))},
             {"pos", position_to_json(diagnostic.pos)},
             {"data", diagnostic.data}};
    doc["endPos"] = diagnostic.end_pos ? position_to_json(*diagnostic.end_pos) : json(nullptr);
    return doc;
}

Diagnostic diagnostic_from_json(const json& doc) {
    Diagnostic diagnostic;
    diagnostic.severity = severity_from_string(doc.at("severity").get<std::string>());
    diagnostic.pos = position_from_json(doc.at("pos"));
    diagnostic.end_pos = optional_position(doc, "endPos");
    diagnostic.data = doc.at("data").get<std::string>();
    return diagnostic;
}

json to_json(const ReplReply& reply) {
    json messages = json::array();
    for (const auto& m : reply.messages) {
        messages.push_back(to_json(m));
    }
    json sorries = json::array();
    for (const auto& s : reply.sorries) {
        sorries.push_back(sorry_to_json(s));
    }
    json doc{{"env", reply.env}, {"messages", messages}, {"sorries", sorries}, {"time", reply.time}};
    if (reply.infotree) {
        doc["infotree"] = *reply.infotree;
    }
    return doc;
}

ReplReply reply_from_json(const json& doc) {
    if (!doc.is_object()) {
        throw MalformedReply("reply is not a JSON object");
    }
    try {
        ReplReply reply;
        const auto env = doc.find("env");
        if (env == doc.end() || !env->is_number_integer()) {
            if (auto msg = doc.find("message"); msg != doc.end() && msg->is_string()) {
                throw MalformedReply("checker error: " + msg->get<std::string>());
            }
            throw MalformedReply("reply has no integer env");
        }
        reply.env = env->get<EnvId>();
        if (reply.env < 0) {
            throw MalformedReply("negative env");
        }
        if (auto it = doc.find("messages"); it != doc.end() && !it->is_null()) {
            for (const auto& m : *it) {
                reply.messages.push_back(diagnostic_from_json(m));
            }
        }
        if (auto it = doc.find("sorries"); it != doc.end() && !it->is_null()) {
            for (const auto& s : *it) {
                reply.sorries.push_back(sorry_from_json(s));
            }
        }
        if (auto it = doc.find("time"); it != doc.end() && !it->is_null()) {
            reply.time = it->get<double>();
            if (reply.time < 0) {
                throw MalformedReply("negative time");
            }
        }
        if (auto it = doc.find("infotree"); it != doc.end() && !it->is_null()) {
            reply.infotree = *it;
        }
        return reply;
    } catch (const json::exception& e) {
        throw MalformedReply(e.what());
    }
}

std::string encode_reply(const ReplReply& reply) {
    return to_json(reply).dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

ReplReply decode_reply(std::string_view line) {
    const auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) {
        throw MalformedReply("reply is not a JSON document");
    }
    return reply_from_json(doc);
}

}  // namespace proofgate
