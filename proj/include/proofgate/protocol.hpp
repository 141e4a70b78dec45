#pragma once

// Snippet model, checker wire protocol, header/body splitting and verdicts.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace proofgate {

using json = nlohmann::json;

/// Integer handle to an elaboration context held by one checker process.
using EnvId = std::int64_t;

/// Canonical form of a header, used as the warm-cache key.
using HeaderKey = std::string;

struct Snippet {
    std::string id;
    std::string code;
};

struct SplitSource {
    std::string header;
    std::string body;
};

enum class InfotreeMode { none, tactics, full };

std::string_view to_string(InfotreeMode mode);
/// Throws std::invalid_argument on an unknown name.
InfotreeMode infotree_mode_from_string(std::string_view name);

struct ReplCommand {
    std::string cmd;
    std::optional<EnvId> env;
    InfotreeMode infotree = InfotreeMode::none;

    bool operator==(const ReplCommand&) const = default;
};

/// 1-based line, 0-based column.
struct Position {
    int line = 1;
    int column = 0;

    auto operator<=>(const Position&) const = default;
};

enum class Severity { error, warning, info };

std::string_view to_string(Severity severity);

struct Diagnostic {
    Severity severity = Severity::error;
    Position pos;
    std::optional<Position> end_pos;
    std::string data;

    bool operator==(const Diagnostic&) const = default;
};

struct Sorry {
    Position pos;
    std::optional<Position> end_pos;
    std::string goal;

    bool operator==(const Sorry&) const = default;
};

struct ReplReply {
    EnvId env = 0;
    std::vector<Diagnostic> messages;
    std::vector<Sorry> sorries;
    double time = 0.0;
    std::optional<json> infotree;

    bool operator==(const ReplReply&) const = default;

    bool has_errors() const;
};

enum class Status { valid, invalid, sorry, timeout, crashed };

std::string_view to_string(Status status);
Status status_from_string(std::string_view name);

struct Verdict {
    Status status = Status::valid;
    std::vector<Diagnostic> diagnostics;
};

/// A reply line that could not be decoded. Callers treat it as a worker crash.
class MalformedReply : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A command line that could not be decoded (checker side).
class MalformedCommand : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Splits `code` after the last line of its leading import block.
/// Comments and blank lines before the first import belong to the header
/// only if an import follows them. header + body == code always holds.
SplitSource split_snippet(std::string_view code);

/// Drops comment and blank lines, trims trailing whitespace, keeps order.
HeaderKey normalize_header(std::string_view header);

/// Classifies a completed reply. Never yields timeout or crashed; those
/// come from the pool.
Verdict analyze(const ReplReply& reply);

/// One JSON document followed by a single newline.
std::string encode_command(const ReplCommand& command);
ReplCommand decode_command(std::string_view line);

std::string encode_reply(const ReplReply& reply);
ReplReply decode_reply(std::string_view line);

json to_json(const Diagnostic& diagnostic);
Diagnostic diagnostic_from_json(const json& doc);
json to_json(const ReplReply& reply);
ReplReply reply_from_json(const json& doc);

/// True for a line whose first token is the `import` keyword.
bool is_import_line(std::string_view line);

}  // namespace proofgate
