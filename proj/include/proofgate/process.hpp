#pragma once

#include <sys/types.h>

#include <chrono>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <utility>
#include <vector>

namespace proofgate {

using Clock = std::chrono::steady_clock;

class SpawnFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A child process with its stdin and stdout attached to pipes.
/// Killing is always SIGKILL followed by a reap; the destructor does both.
class ChildProcess {
public:
    using EnvOverrides = std::vector<std::pair<std::string, std::string>>;

    /// Throws SpawnFailure when the executable cannot be started.
    static ChildProcess spawn(const std::vector<std::string>& argv, const EnvOverrides& env = {},
                              bool inherit_stderr = false);

    ChildProcess(ChildProcess&& other) noexcept;
    ChildProcess& operator=(ChildProcess&& other) noexcept;
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;
    ~ChildProcess();

    pid_t pid() const { return pid_; }
    bool running() const { return pid_ > 0; }

    /// False once the child has closed its end of the pipe.
    bool write_all(std::string_view data);

    enum class ReadStatus { line, timeout, closed, stopped };
    struct ReadResult {
        ReadStatus status;
        std::string line;  // without the trailing newline
    };
    /// Waits for one full line until `deadline`. `stop` interrupts the wait.
    ReadResult read_line(Clock::time_point deadline, std::stop_token stop = {});

    void kill();

    /// Resident set size in bytes, or nullopt if it cannot be read.
    std::optional<std::size_t> resident_bytes() const;

private:
    ChildProcess() = default;
    void close_fds();

    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

std::optional<std::size_t> resident_bytes_of(pid_t pid);

/// Splits a command string on whitespace, honouring single and double quotes.
std::vector<std::string> split_command_line(std::string_view command);

}  // namespace proofgate
