#pragma once

// A stand-in checker speaking the worker wire protocol. Verdicts are driven
// purely by markers in the submitted code:
//
//   MOCK_ERROR        error diagnostic at the marker (also inside imports)
//   sorry             one sorries entry plus a warning
//   MOCK_SLEEP(n)     sleep n seconds before replying
//   MOCK_GROW(bytes)  allocate and touch that much memory, kept until exit
//   MOCK_CRASH        exit without replying
//
// Import lines cost header_cost seconds, any remaining code body_cost seconds.

#include <iosfwd>
#include <string>

#include "proofgate/protocol.hpp"

namespace proofgate {

struct MockConfig {
    double header_cost = 0.3;
    double body_cost = 0.03;
    double jitter = 0.0;
    /// Appended to with one JSON line per received command; empty disables.
    std::string call_log;

    /// Reads MOCK_HEADER_COST, MOCK_BODY_COST, MOCK_JITTER and MOCK_CALL_LOG.
    static MockConfig from_env();
    /// Throws std::invalid_argument on negative costs or jitter outside [0, 1).
    void validate() const;
};

/// Exit codes of the command loop.
inline constexpr int kMockExitOk = 0;
inline constexpr int kMockExitMalformed = 2;
inline constexpr int kMockExitCrash = 3;

/// Serves commands from `in` until end of input. Returns one of the exit codes above.
int run_mock_checker(std::istream& in, std::ostream& out, const MockConfig& config);

/// The tree the mock attaches when an infotree is requested: one sequential
/// tactic node per non-blank, non-comment line after the first `by`.
json mock_infotree(std::string_view code);

}  // namespace proofgate
