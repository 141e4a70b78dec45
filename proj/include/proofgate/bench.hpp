#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "proofgate/protocol.hpp"
#include "proofgate/worker_pool.hpp"

namespace proofgate {

/// Unreadable corpus, tree or source input.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Server unreachable or answering with an unexpected status.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class BenchMode { cached, non_cached };

std::string_view to_string(BenchMode mode);
/// Accepts "cached", "non-cached" and "non_cached".
BenchMode bench_mode_from_string(std::string_view name);

/// Reads newline-delimited {uuid, code} records (blank lines skipped).
std::vector<Snippet> load_corpus(std::istream& in);
std::vector<Snippet> load_corpus(const std::string& path);

struct PrepareStats {
    std::size_t read = 0;
    std::size_t kept = 0;
    std::size_t duplicates = 0;
    std::size_t incomplete = 0;
    std::size_t with_sorry = 0;
};

/// Converts a dataset export (JSON lines or one JSON array of records with
/// uuid, formal_ground_truth and ground_truth_type) into a corpus: first
/// record per uuid wins, only complete ground truths are kept, and proofs
/// mentioning sorry are dropped.
PrepareStats prepare_corpus(std::istream& in, std::ostream& out);

struct BenchOptions {
    std::string server = "http://localhost:8000";
    std::size_t batch_size = 8;
    int in_flight = 1;
    BenchMode mode = BenchMode::cached;
    std::optional<Seconds> timeout;
};

struct BenchReport {
    double total_seconds = 0.0;
    std::size_t n_proofs = 0;
    std::size_t n_valid = 0;
    std::size_t n_invalid = 0;
    std::size_t n_sorry = 0;
    std::size_t n_timeout = 0;
    std::size_t n_crashed = 0;
    /// Sum of the per-result time fields.
    double busy_seconds = 0.0;
    int worker_count = 0;
    BenchMode mode = BenchMode::cached;

    /// Wall time divided by the number of proofs (0 for an empty run).
    double avg_time_per_proof() const;
    json to_json() const;
    std::string table() const;
};

/// "m:ss", rounding to whole seconds.
std::string format_mmss(double seconds);

/// Folds the "results" arrays of check responses into a report.
BenchReport summarize(const std::vector<json>& results, double total_seconds, int worker_count, BenchMode mode);

/// Sends the corpus in batches with up to in_flight concurrent requests.
/// Throws TransportError.
BenchReport run_benchmark(const BenchOptions& options, const std::vector<Snippet>& corpus);

}  // namespace proofgate
