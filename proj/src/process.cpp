#include "proofgate/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>

extern char** environ;

namespace proofgate {

namespace {

std::vector<std::string> merged_environment(const ChildProcess::EnvOverrides& overrides) {
    std::map<std::string, std::string> vars;
    for (char** e = environ; e && *e; ++e) {
        std::string_view entry(*e);
        const auto eq = entry.find('=');
        if (eq == std::string_view::npos) continue;
        vars[std::string(entry.substr(0, eq))] = std::string(entry.substr(eq + 1));
    }
    for (const auto& [k, v] : overrides) {
        vars[k] = v;
    }
    std::vector<std::string> out;
    out.reserve(vars.size());
    for (const auto& [k, v] : vars) {
        out.push_back(k + "=" + v);
    }
    return out;
}

}  // namespace

ChildProcess ChildProcess::spawn(const std::vector<std::string>& argv, const EnvOverrides& env, bool inherit_stderr) {
    if (argv.empty()) {
        throw SpawnFailure("empty checker command");
    }
    int in_pipe[2];
    int out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0) {
        throw SpawnFailure(std::string("pipe: ") + std::strerror(errno));
    }
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw SpawnFailure(std::string("pipe: ") + std::strerror(errno));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    if (!inherit_stderr) {
        posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
    }

    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    const auto env_strings = merged_environment(env);
    std::vector<char*> envp;
    for (const auto& e : env_strings) envp.push_back(const_cast<char*>(e.c_str()));
    envp.push_back(nullptr);

    pid_t pid = -1;
    const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), envp.data());
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        throw SpawnFailure("cannot start " + argv[0] + ": " + std::strerror(rc));
    }

    ChildProcess child;
    child.pid_ = pid;
    child.to_child_ = in_pipe[1];
    child.from_child_ = out_pipe[0];
    return child;
}

ChildProcess::ChildProcess(ChildProcess&& other) noexcept
    : pid_(std::exchange(other.pid_, -1)),
      to_child_(std::exchange(other.to_child_, -1)),
      from_child_(std::exchange(other.from_child_, -1)),
      buffer_(std::move(other.buffer_)) {}

ChildProcess& ChildProcess::operator=(ChildProcess&& other) noexcept {
    if (this != &other) {
        kill();
        pid_ = std::exchange(other.pid_, -1);
        to_child_ = std::exchange(other.to_child_, -1);
        from_child_ = std::exchange(other.from_child_, -1);
        buffer_ = std::move(other.buffer_);
    }
    return *this;
}

ChildProcess::~ChildProcess() {
    kill();
}

void ChildProcess::close_fds() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    to_child_ = from_child_ = -1;
}

void ChildProcess::kill() {
    close_fds();
    if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        while (::waitpid(pid_, nullptr, 0) < 0 && errno == EINTR) {
        }
        pid_ = -1;
    }
    buffer_.clear();
}

bool ChildProcess::write_all(std::string_view data) {
    while (!data.empty()) {
        if (to_child_ < 0) return false;
        const auto n = ::write(to_child_, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

ChildProcess::ReadResult ChildProcess::read_line(Clock::time_point deadline, std::stop_token stop) {
    using namespace std::chrono;
    constexpr auto slice = milliseconds(100);
    for (;;) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return {ReadStatus::line, std::move(line)};
        }
        if (from_child_ < 0) {
            return {ReadStatus::closed, {}};
        }
        if (stop.stop_requested()) {
            return {ReadStatus::stopped, {}};
        }
        const auto now = Clock::now();
        if (now >= deadline) {
            return {ReadStatus::timeout, {}};
        }
        const auto wait = std::min<Clock::duration>(deadline - now, slice);
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(duration_cast<milliseconds>(wait).count()) + 1);
        if (ready < 0) {
            if (errno == EINTR) continue;
            return {ReadStatus::closed, {}};
        }
        if (ready == 0) continue;
        char chunk[65536];
        const auto n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            return {ReadStatus::closed, {}};
        }
        if (n == 0) {
            return {ReadStatus::closed, {}};
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::optional<std::size_t> ChildProcess::resident_bytes() const {
    if (pid_ <= 0) return std::nullopt;
    return resident_bytes_of(pid_);
}

std::optional<std::size_t> resident_bytes_of(pid_t pid) {
    std::ifstream statm("/proc/" + std::to_string(pid) + "/statm");
    std::size_t size_pages = 0;
    std::size_t resident_pages = 0;
    if (!(statm >> size_pages >> resident_pages)) {
        return std::nullopt;
    }
    return resident_pages * static_cast<std::size_t>(::sysconf(_SC_PAGESIZE));
}

std::vector<std::string> split_command_line(std::string_view command) {
    std::vector<std::string> out;
    std::string current;
    bool in_token = false;
    char quote = 0;
    for (char c : command) {
        if (quote) {
            if (c == quote) {
                quote = 0;
            } else {
                current += c;
            }
        } else if (c == '\'' || c == '"') {
            quote = c;
            in_token = true;
        } else if (c == ' ' || c == '\t' || c == '\n') {
            if (in_token) {
                out.push_back(std::move(current));
                current.clear();
                in_token = false;
            }
        } else {
            current += c;
            in_token = true;
        }
    }
    if (in_token) out.push_back(std::move(current));
    return out;
}

}  // namespace proofgate
