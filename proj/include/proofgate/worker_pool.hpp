#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "proofgate/process.hpp"
#include "proofgate/protocol.hpp"
#include "proofgate/warm_cache.hpp"

namespace proofgate {

using Seconds = std::chrono::duration<double>;

struct PoolConfig {
    int max_repls = 1;
    Seconds max_wait{60.0};
    std::size_t max_repl_mem = std::size_t{8} << 30;
    std::vector<std::string> checker_command;
    /// Extra environment for checker processes (mock costs, call log).
    ChildProcess::EnvOverrides checker_env;

    std::chrono::milliseconds supervisor_tick{1000};
    Seconds startup_timeout{30.0};
    /// Queued jobs give up after this many multiples of max_wait.
    double queue_wait_factor = 10.0;
    /// Off only in failure-injection tests: dead workers stay dead.
    bool respawn = true;
    bool inherit_stderr = false;

    /// LEAN_SERVER_MAX_REPLS, LEAN_SERVER_MAX_WAIT, LEAN_SERVER_MAX_REPL_MEM,
    /// LEAN_SERVER_CHECKER_CMD. The checker defaults to the bundled mock.
    static PoolConfig from_env();
    void validate() const;
};

/// "512", "64K", "8M", "2G" (powers of 1024).
std::size_t parse_memory_size(std::string_view text);

/// The mock-checker binary installed next to the running executable.
std::vector<std::string> default_checker_command();

enum class WorkerState { starting, idle_cold, idle_warm, busy, dead };

std::string_view to_string(WorkerState state);

class TimeoutExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class WorkerCrashed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class WarmFailure : public std::runtime_error {
public:
    WarmFailure(const std::string& what, ReplReply reply) : std::runtime_error(what), reply(std::move(reply)) {}
    ReplReply reply;
};

/// A checker process and what it has elaborated so far. Not thread-safe;
/// exactly one thread owns a worker while it runs a command.
class Worker {
public:
    explicit Worker(WorkerId id) : id_(id) {}

    WorkerId id() const { return id_; }
    WorkerState state() const { return state_; }
    std::optional<pid_t> pid() const;
    const std::optional<HeaderKey>& warmed_key() const { return warmed_key_; }
    std::optional<EnvId> warmed_env() const { return warmed_env_; }
    Clock::time_point last_used() const { return last_used_; }
    std::uint64_t jobs_served() const { return jobs_served_; }
    std::optional<std::size_t> resident_bytes() const;

    void count_job() { ++jobs_served_; }
    /// Hard kill. The worker is dead afterwards and never runs another command.
    void kill();

private:
    friend Worker spawn_worker(const PoolConfig& config, WorkerId id);
    friend EnvId warm(Worker& worker, std::string_view header, Clock::time_point deadline, std::stop_token stop);
    friend ReplReply execute(Worker& worker, const ReplCommand& command, Clock::time_point deadline,
                             std::stop_token stop);

    ReplReply exchange(const ReplCommand& command, Clock::time_point deadline, std::stop_token stop);

    WorkerId id_;
    WorkerState state_ = WorkerState::dead;
    std::optional<ChildProcess> process_;
    std::optional<HeaderKey> warmed_key_;
    std::optional<EnvId> warmed_env_;
    Clock::time_point last_used_{};
    std::uint64_t jobs_served_ = 0;
};

/// Launches a checker and waits for a trivial readiness probe. Throws SpawnFailure.
Worker spawn_worker(const PoolConfig& config, WorkerId id);

/// Imports `header` into a fresh environment and remembers it. A worker already
/// warm on the same canonical header answers without touching the process.
/// Throws std::invalid_argument for an empty header, WarmFailure when the
/// import reports errors (the worker is killed), and the execute errors.
EnvId warm(Worker& worker, std::string_view header, Clock::time_point deadline, std::stop_token stop = {});

/// Runs one command. On timeout or a broken reply the process is killed and
/// TimeoutExceeded / WorkerCrashed is thrown. A deadline that has already
/// passed throws TimeoutExceeded before anything is sent.
ReplReply execute(Worker& worker, const ReplCommand& command, Clock::time_point deadline,
                  std::stop_token stop = {});

struct Job {
    std::string snippet_id;
    HeaderKey header_key;
    std::string header;
    std::string body;
    std::string full_code;
    InfotreeMode infotree = InfotreeMode::none;
    /// Execution budget, measured from dispatch to a worker.
    Seconds timeout{60.0};
    /// Cached mode reuses warm workers; otherwise every job imports its header
    /// into a worker that is recycled afterwards.
    bool reuse = true;
};

Job make_job(const Snippet& snippet, Seconds timeout, InfotreeMode infotree = InfotreeMode::none, bool reuse = true);

struct CheckOutcome {
    std::string snippet_id;
    Status status = Status::crashed;
    std::optional<ReplReply> reply;
    std::optional<std::string> error;
    /// Wall time from dispatch until the reply, including any header import.
    double elapsed = 0.0;
    std::optional<WorkerId> worker;
};

struct WorkerInfo {
    WorkerId id;
    WorkerState state;
    std::optional<pid_t> pid;
    std::optional<HeaderKey> warmed_key;
    std::uint64_t jobs_served;
};

struct PoolStats {
    int live = 0;
    int idle = 0;
    int warm = 0;
    int busy = 0;
    int starting = 0;
    int dead = 0;
    std::size_t queued = 0;
    std::size_t executing = 0;
    std::size_t peak_executing = 0;
    std::uint64_t submitted = 0;
    std::uint64_t completed = 0;
    std::uint64_t timeouts = 0;
    std::uint64_t crashes = 0;
    std::uint64_t queue_timeouts = 0;
    std::uint64_t respawns = 0;
    std::uint64_t recycled = 0;
    std::uint64_t memory_kills = 0;
    std::uint64_t header_imports = 0;
    CacheStats cache;
    std::vector<WorkerInfo> workers;
};

/// Fixed set of worker slots sharing a FIFO queue and a warm cache.
///
/// Every slot runs on its own thread, which owns the slot's process and
/// performs all of its I/O. Scheduling, claims, releases and cache updates
/// happen under one mutex and never touch a process. A supervisor thread
/// expires queued jobs and enforces the per-worker memory cap.
class WorkerPool {
public:
    explicit WorkerPool(PoolConfig config);
    ~WorkerPool();
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    std::future<CheckOutcome> submit(Job job);
    CheckOutcome dispatch(Job job) { return submit(std::move(job)).get(); }

    /// Blocks until no slot is starting. Returns false on timeout.
    bool wait_until_ready(Seconds timeout);

    /// Recycles idle workers above the memory cap; returns their ids.
    std::vector<WorkerId> enforce_memory();

    /// Kills every worker (busy ones after their current job).
    void kill_all();

    PoolStats stats() const;
    int live_workers() const;
    const PoolConfig& config() const { return config_; }

private:
    struct Pending {
        Job job;
        Clock::time_point queue_deadline;
        std::promise<CheckOutcome> promise;
    };

    struct Slot {
        explicit Slot(WorkerId id) : worker(id) {}
        Worker worker;
        WorkerState state = WorkerState::starting;  // published copy, guarded by mutex_
        bool idle = false;
        bool recycle = false;
        bool spawned_once = false;
        std::optional<pid_t> pid;
        std::optional<HeaderKey> key;
        std::uint64_t jobs = 0;
        Clock::time_point idle_since{};
        std::unique_ptr<Pending> assignment;
        std::condition_variable_any wake;
        std::jthread thread;
    };

    void run_slot(Slot& slot, std::stop_token stop);
    void run_supervisor(std::stop_token stop);
    CheckOutcome run_job(Worker& worker, const Job& job, std::stop_token stop, bool& imported);

    // Callers hold mutex_.
    void schedule_locked();
    void expire_queue_locked(Clock::time_point now);
    void publish_locked(Slot& slot);
    Slot* pick_slot_locked(const Job& job);
    Slot* oldest_cold_slot_locked();
    void finish_locked(const CheckOutcome& outcome);
    void fail_queue_locked(Status status, const std::string& error);
    bool any_worker_possible_locked() const;

    PoolConfig config_;
    mutable std::mutex mutex_;
    std::condition_variable_any state_changed_;
    std::deque<std::unique_ptr<Pending>> queue_;
    std::vector<std::unique_ptr<Slot>> slots_;
    WarmCache cache_;
    PoolStats counters_;
    bool stopping_ = false;
    std::jthread supervisor_;
};

}  // namespace proofgate
