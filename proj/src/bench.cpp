#include "proofgate/bench.hpp"

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "proofgate/service.hpp"
#include "proofgate/text.hpp"

namespace proofgate {

namespace {

bool mentions_sorry(std::string_view code) {
    auto ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; };
    for (std::size_t pos = code.find("sorry"); pos != std::string_view::npos; pos = code.find("sorry", pos + 1)) {
        const bool left = pos == 0 || !ident(code[pos - 1]);
        const bool right = pos + 5 >= code.size() || !ident(code[pos + 5]);
        if (left && right) return true;
    }
    return false;
}

std::string record_string(const json& record, const char* field, std::size_t line) {
    const auto it = record.find(field);
    if (it == record.end() || !it->is_string()) {
        throw DataError("record " + std::to_string(line) + ": missing string field '" + field + "'");
    }
    return it->get<std::string>();
}

httplib::Client make_client(const std::string& server) {
    httplib::Client client(server);
    if (!client.is_valid()) throw TransportError("invalid server URL '" + server + "'");
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(24 * 3600, 0);
    client.set_write_timeout(600, 0);
    return client;
}

}  // namespace

std::string_view to_string(BenchMode mode) {
    return mode == BenchMode::cached ? "cached" : "non-cached";
}

BenchMode bench_mode_from_string(std::string_view name) {
    if (name == "cached") return BenchMode::cached;
    if (name == "non-cached" || name == "non_cached") return BenchMode::non_cached;
    throw std::invalid_argument("unknown mode '" + std::string(name) + "'");
}

std::vector<Snippet> load_corpus(std::istream& in) {
    std::vector<Snippet> corpus;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (trim(line).empty()) continue;
        const auto record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            throw DataError("corpus line " + std::to_string(number) + " is not a JSON object");
        }
        Snippet s{record_string(record, "uuid", number), record_string(record, "code", number)};
        if (!seen.insert(s.id).second) throw DataError("corpus line " + std::to_string(number) + ": duplicate uuid");
        corpus.push_back(std::move(s));
    }
    return corpus;
}

std::vector<Snippet> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus '" + path + "'");
    return load_corpus(in);
}

PrepareStats prepare_corpus(std::istream& in, std::ostream& out) {
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    std::vector<json> records;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
        const auto doc = json::parse(text, nullptr, false);
        if (doc.is_discarded()) throw DataError("dataset export is not valid JSON");
        records.assign(doc.begin(), doc.end());
    } else {
        std::size_t number = 0;
        for (auto line : split_lines(text)) {
            ++number;
            if (trim(line).empty()) continue;
            auto doc = json::parse(line, nullptr, false);
            if (doc.is_discarded()) throw DataError("dataset line " + std::to_string(number) + " is not valid JSON");
            records.push_back(std::move(doc));
        }
    }

    PrepareStats stats;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& record = records[i];
        if (!record.is_object()) throw DataError("record " + std::to_string(i + 1) + " is not an object");
        ++stats.read;
        const auto uuid = record_string(record, "uuid", i + 1);
        if (!seen.insert(uuid).second) {
            ++stats.duplicates;
            continue;
        }
        if (record.value("ground_truth_type", "") != "complete") {
            ++stats.incomplete;
            continue;
        }
        const auto code = record_string(record, "formal_ground_truth", i + 1);
        if (mentions_sorry(code)) {
            ++stats.with_sorry;
            continue;
        }
        out << json{{"uuid", uuid}, {"code", code}}.dump(-1, ' ', false, json::error_handler_t::replace) << "\n";
        ++stats.kept;
    }
    return stats;
}

double BenchReport::avg_time_per_proof() const {
    return n_proofs == 0 ? 0.0 : total_seconds / static_cast<double>(n_proofs);
}

std::string format_mmss(double seconds) {
    const auto whole = static_cast<long long>(std::llround(std::max(seconds, 0.0)));
    char text[32];
    std::snprintf(text, sizeof text, "%lld:%02lld", whole / 60, whole % 60);
    return text;
}

json BenchReport::to_json() const {
    return json{{"total_time", format_mmss(total_seconds)},
                {"total_seconds", total_seconds},
                {"avg_time_per_proof", avg_time_per_proof()},
                {"busy_seconds", busy_seconds},
                {"n_proofs", n_proofs},
                {"n_valid", n_valid},
                {"n_invalid", n_invalid},
                {"n_sorry", n_sorry},
                {"n_timeout", n_timeout},
                {"n_crashed", n_crashed},
                {"worker_count", worker_count},
                {"mode", std::string(to_string(mode))}};
}

std::string BenchReport::table() const {
    std::ostringstream out;
    out << std::left << std::setw(12) << "mode" << std::setw(9) << "workers" << std::setw(8) << "proofs"
        << std::setw(11) << "total" << std::setw(11) << "avg (s)" << std::setw(7) << "valid" << std::setw(9)
        << "invalid" << std::setw(7) << "sorry" << std::setw(9) << "timeout" << "crashed\n";
    std::ostringstream avg;
    avg << std::fixed << std::setprecision(3) << avg_time_per_proof();
    out << std::left << std::setw(12) << to_string(mode) << std::setw(9) << worker_count << std::setw(8) << n_proofs
        << std::setw(11) << format_mmss(total_seconds) << std::setw(11) << avg.str() << std::setw(7) << n_valid
        << std::setw(9) << n_invalid << std::setw(7) << n_sorry << std::setw(9) << n_timeout << n_crashed << "\n";
    return out.str();
}

BenchReport summarize(const std::vector<json>& results, double total_seconds, int worker_count, BenchMode mode) {
    BenchReport report;
    report.total_seconds = total_seconds;
    report.worker_count = worker_count;
    report.mode = mode;
    for (const auto& batch : results) {
        for (const auto& r : batch) {
            ++report.n_proofs;
            switch (status_from_string(r.at("status").get<std::string>())) {
                case Status::valid: ++report.n_valid; break;
                case Status::invalid: ++report.n_invalid; break;
                case Status::sorry: ++report.n_sorry; break;
                case Status::timeout: ++report.n_timeout; break;
                case Status::crashed: ++report.n_crashed; break;
            }
            if (auto it = r.find("response"); it != r.end()) report.busy_seconds += it->value("time", 0.0);
        }
    }
    return report;
}

BenchReport run_benchmark(const BenchOptions& options, const std::vector<Snippet>& corpus) {
    if (options.batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (options.in_flight < 1) throw std::invalid_argument("in-flight limit must be positive");

    int worker_count = 0;
    {
        auto client = make_client(options.server);
        auto res = client.Get("/health");
        if (!res) throw TransportError("cannot reach " + options.server + ": " + httplib::to_string(res.error()));
        const auto health = json::parse(res->body, nullptr, false);
        if (health.is_discarded()) throw TransportError("unexpected /health reply");
        worker_count = health.value("max_repls", health.value("live", 0));
    }

    std::vector<std::vector<Snippet>> batches;
    for (std::size_t i = 0; i < corpus.size(); i += options.batch_size) {
        const auto end = std::min(corpus.size(), i + options.batch_size);
        batches.emplace_back(corpus.begin() + static_cast<std::ptrdiff_t>(i),
                             corpus.begin() + static_cast<std::ptrdiff_t>(end));
    }

    std::vector<json> results(batches.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string first_error;

    auto worker = [&] {
        auto client = make_client(options.server);
        for (std::size_t b = next++; b < batches.size() && !failed; b = next++) {
            CheckRequest request;
            request.snippets = batches[b];
            request.timeout = options.timeout;
            request.reuse = options.mode == BenchMode::cached;
            auto res = client.Post("/check", request.to_json().dump(), "application/json");
            std::string error;
            if (!res) {
                error = "request failed: " + httplib::to_string(res.error());
            } else if (res->status != 200) {
                error = "server answered " + std::to_string(res->status) + ": " + res->body;
            } else {
                auto doc = json::parse(res->body, nullptr, false);
                if (doc.is_discarded() || !doc.contains("results")) {
                    error = "malformed /check reply";
                } else {
                    results[b] = std::move(doc["results"]);
                }
            }
            if (!error.empty()) {
                std::lock_guard lock(error_mutex);
                if (!failed.exchange(true)) first_error = error;
            }
        }
    };

    const auto started = Clock::now();
    std::vector<std::thread> threads;
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(options.in_flight), batches.size());
    for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    const double total = std::chrono::duration<double>(Clock::now() - started).count();
    if (failed) throw TransportError(first_error);

    return summarize(results, corpus.empty() ? 0.0 : total, worker_count, options.mode);
}

}  // namespace proofgate
