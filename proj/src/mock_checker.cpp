#include "proofgate/mock_checker.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <memory>
#include <ostream>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "proofgate/text.hpp"

namespace proofgate {

namespace {

using Clock = std::chrono::steady_clock;

double env_double(const char* name, double fallback) {
    const char* value = std::getenv(name);
    if (!value || !*value) return fallback;
    char* end = nullptr;
    const double parsed = std::strtod(value, &end);
    if (end == value) throw std::invalid_argument(std::string(name) + " is not a number");
    return parsed;
}

double wall_seconds() {
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

std::vector<std::size_t> find_word(std::string_view text, std::string_view word) {
    std::vector<std::size_t> hits;
    std::size_t pos = 0;
    while ((pos = text.find(word, pos)) != std::string_view::npos) {
        const bool left_ok = pos == 0 || !is_ident_char(text[pos - 1]);
        const auto after = pos + word.size();
        const bool right_ok = after >= text.size() || !is_ident_char(text[after]);
        if (left_ok && right_ok) hits.push_back(pos);
        pos = after;
    }
    return hits;
}

// Argument of the first `NAME(arg)` marker, if present.
std::optional<std::string> marker_argument(std::string_view text, std::string_view name) {
    const auto at = text.find(name);
    if (at == std::string_view::npos) return std::nullopt;
    auto open = at + name.size();
    if (open >= text.size() || text[open] != '(') return std::nullopt;
    const auto close = text.find(')', open);
    if (close == std::string_view::npos) return std::nullopt;
    return std::string(text.substr(open + 1, close - open - 1));
}

Position position_at(std::string_view text, std::size_t offset) {
    const auto lc = line_column(text, offset);
    return Position{lc.line, lc.column};
}

void sleep_seconds(double seconds) {
    if (seconds > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    }
}

class CallLog {
public:
    explicit CallLog(std::string path) : path_(std::move(path)) {}

    void append(const json& entry) const {
        if (path_.empty()) return;
        const auto line = entry.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
        const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
        if (fd < 0) return;
        // A single O_APPEND write keeps lines from concurrent workers intact.
        [[maybe_unused]] auto n = ::write(fd, line.data(), line.size());
        ::close(fd);
    }

private:
    std::string path_;
};

}  // namespace

MockConfig MockConfig::from_env() {
    MockConfig config;
    config.header_cost = env_double("MOCK_HEADER_COST", config.header_cost);
    config.body_cost = env_double("MOCK_BODY_COST", config.body_cost);
    config.jitter = env_double("MOCK_JITTER", config.jitter);
    if (const char* log = std::getenv("MOCK_CALL_LOG")) config.call_log = log;
    config.validate();
    return config;
}

void MockConfig::validate() const {
    if (header_cost < 0 || body_cost < 0) throw std::invalid_argument("mock costs must be non-negative");
    if (jitter < 0 || jitter >= 1) throw std::invalid_argument("mock jitter must lie in [0, 1)");
}

json mock_infotree(std::string_view code) {
    json nodes = json::array();
    const auto by_hits = find_word(code, "by");
    if (by_hits.empty()) return nodes;

    struct Line {
        std::size_t start;
        std::size_t end;
    };
    std::vector<Line> tactic_lines;
    std::size_t pos = by_hits.front() + 2;
    while (pos < code.size()) {
        auto nl = code.find('\n', pos);
        if (nl == std::string_view::npos) nl = code.size();
        const auto content_start = start_of_content(code, pos, nl);
        if (content_start < nl) {
            const auto content_end = end_of_content(code, content_start, nl);
            tactic_lines.push_back({content_start, content_end});
        }
        pos = nl + 1;
    }
    for (std::size_t i = 0; i < tactic_lines.size(); ++i) {
        const auto s = position_at(code, tactic_lines[i].start);
        const auto e = position_at(code, tactic_lines[i].end);
        json after = json::array();
        if (i + 1 < tactic_lines.size()) after.push_back("⊢ goal_" + std::to_string(i + 1));
        nodes.push_back(json{{"kind", "tactic"},
                             {"name", "mock.tactic"},
                             {"range", {{"start", {{"line", s.line}, {"column", s.column}}},
                                        {"finish", {{"line", e.line}, {"column", e.column}}}}},
                             {"goalsBefore", json::array({"⊢ goal_" + std::to_string(i)})},
                             {"goalsAfter", after},
                             {"children", json::array()}});
    }
    return nodes;
}

int run_mock_checker(std::istream& in, std::ostream& out, const MockConfig& config) {
    config.validate();
    const CallLog log(config.call_log);
    std::mt19937_64 rng(static_cast<std::uint64_t>(::getpid()) ^
                        static_cast<std::uint64_t>(Clock::now().time_since_epoch().count()));
    std::uniform_real_distribution<double> noise(-config.jitter, config.jitter);
    auto cost = [&](double base) { return config.jitter > 0 ? base * (1.0 + noise(rng)) : base; };

    std::set<EnvId> envs;
    EnvId next_env = 0;
    std::vector<std::unique_ptr<char[]>> ballast;

    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ReplCommand command;
        try {
            command = decode_command(line);
        } catch (const MalformedCommand&) {
            return kMockExitMalformed;
        }
        const auto started = Clock::now();
        const double wall_start = wall_seconds();
        const auto split = split_snippet(command.cmd);
        const bool has_body = !is_trivia(split.body);
        json entry{{"pid", ::getpid()},
                   {"header", normalize_header(split.header)},
                   {"body", has_body},
                   {"env", command.env ? json(*command.env) : json(nullptr)},
                   {"start", wall_start}};

        if (trim(command.cmd).empty()) {
            entry["kind"] = "probe";
            entry["end"] = wall_seconds();
            log.append(entry);
            out << encode_reply(ReplReply{}) << std::flush;
            continue;
        }
        entry["kind"] = split.header.empty() ? "body" : "import";

        if (command.env && !envs.contains(*command.env)) {
            entry["end"] = wall_seconds();
            log.append(entry);
            out << json{{"message", "Unknown environment."}}.dump() << "\n" << std::flush;
            continue;
        }

        const std::string_view body = split.body;
        if (body.find("MOCK_CRASH") != std::string_view::npos) {
            entry["end"] = wall_seconds();
            entry["crash"] = true;
            log.append(entry);
            return kMockExitCrash;
        }

        if (!split.header.empty()) sleep_seconds(cost(config.header_cost));
        if (has_body) sleep_seconds(cost(config.body_cost));
        if (auto arg = marker_argument(body, "MOCK_SLEEP")) {
            sleep_seconds(std::strtod(arg->c_str(), nullptr));
        }
        if (auto arg = marker_argument(body, "MOCK_GROW")) {
            const auto bytes = static_cast<std::size_t>(std::strtoull(arg->c_str(), nullptr, 10));
            if (bytes > 0) {
                auto block = std::make_unique<char[]>(bytes);
                // Touch every page so the allocation is resident.
                for (std::size_t i = 0; i < bytes; i += 4096) block[i] = 1;
                ballast.push_back(std::move(block));
            }
        }

        ReplReply reply;
        reply.env = next_env++;
        envs.insert(reply.env);
        const auto body_offset = split.header.size();
        const std::string_view code = command.cmd;
        if (const auto at = code.find("MOCK_ERROR"); at != std::string_view::npos) {
            const auto start = position_at(code, at);
            const auto end = position_at(code, at + std::strlen("MOCK_ERROR"));
            reply.messages.push_back(Diagnostic{Severity::error, start, end, "unknown identifier 'MOCK_ERROR'"});
        }
        for (auto at : find_word(body, "sorry")) {
            const auto start = position_at(code, body_offset + at);
            const auto end = position_at(code, body_offset + at + 5);
            reply.sorries.push_back(Sorry{start, end, "⊢ goal"});
        }
        if (!reply.sorries.empty()) {
            reply.messages.push_back(
                Diagnostic{Severity::warning, reply.sorries.front().pos, reply.sorries.front().end_pos,
                           "declaration uses 'sorry'"});
        }
        if (command.infotree != InfotreeMode::none && has_body) {
            auto tree = mock_infotree(code);
            if (!tree.empty()) reply.infotree = std::move(tree);
        }
        reply.time = std::chrono::duration<double>(Clock::now() - started).count();

        entry["end"] = wall_seconds();
        log.append(entry);
        out << encode_reply(reply) << std::flush;
    }
    return kMockExitOk;
}

}  // namespace proofgate
