#include "proofgate/worker_pool.hpp"

#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <climits>
#include <cstdlib>
#include <filesystem>

#include "proofgate/text.hpp"

namespace proofgate {

namespace {

std::optional<std::string> env_value(const char* name) {
    const char* value = std::getenv(name);
    if (!value || !*value) return std::nullopt;
    return std::string(value);
}

double seconds_between(Clock::time_point from, Clock::time_point to) {
    return std::chrono::duration<double>(to - from).count();
}

std::string format_seconds(Seconds s) {
    std::string text = std::to_string(s.count());
    while (text.size() > 1 && text.back() == '0') text.pop_back();
    if (!text.empty() && text.back() == '.') text.pop_back();
    return text + "s";
}

}  // namespace

// ---- configuration -------------------------------------------------------

std::size_t parse_memory_size(std::string_view text) {
    const auto trimmed = trim(text);
    std::size_t value = 0;
    const auto* first = trimmed.data();
    const auto* last = trimmed.data() + trimmed.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr == first) {
        throw std::invalid_argument("invalid memory size '" + std::string(text) + "'");
    }
    std::string suffix(ptr, last);
    std::transform(suffix.begin(), suffix.end(), suffix.begin(), [](unsigned char c) { return std::toupper(c); });
    if (suffix.size() == 2 && suffix[1] == 'B') suffix.pop_back();
    int shift = 0;
    if (suffix.empty() || suffix == "B") {
        shift = 0;
    } else if (suffix == "K") {
        shift = 10;
    } else if (suffix == "M") {
        shift = 20;
    } else if (suffix == "G") {
        shift = 30;
    } else {
        throw std::invalid_argument("invalid memory suffix in '" + std::string(text) + "'");
    }
    if (shift > 0 && value > (SIZE_MAX >> shift)) {
        throw std::invalid_argument("memory size overflows: '" + std::string(text) + "'");
    }
    return value << shift;
}

std::vector<std::string> default_checker_command() {
    std::error_code ec;
    const auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (ec) return {"mock-checker"};
    return {(self.parent_path() / "mock-checker").string()};
}

PoolConfig PoolConfig::from_env() {
    PoolConfig config;
    if (auto v = env_value("LEAN_SERVER_MAX_REPLS")) {
        int n = 0;
        const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), n);
        if (ec != std::errc{} || ptr != v->data() + v->size()) {
            throw std::invalid_argument("LEAN_SERVER_MAX_REPLS must be an integer");
        }
        config.max_repls = n;
    }
    if (auto v = env_value("LEAN_SERVER_MAX_WAIT")) {
        char* end = nullptr;
        const double s = std::strtod(v->c_str(), &end);
        if (end == v->c_str() || *end != '\0') {
            throw std::invalid_argument("LEAN_SERVER_MAX_WAIT must be a number of seconds");
        }
        config.max_wait = Seconds{s};
    }
    if (auto v = env_value("LEAN_SERVER_MAX_REPL_MEM")) {
        config.max_repl_mem = parse_memory_size(*v);
    }
    if (auto v = env_value("LEAN_SERVER_CHECKER_CMD")) {
        config.checker_command = split_command_line(*v);
    } else {
        config.checker_command = default_checker_command();
    }
    config.validate();
    return config;
}

void PoolConfig::validate() const {
    if (max_repls < 1) throw std::invalid_argument("max_repls must be at least 1");
    if (max_wait.count() <= 0) throw std::invalid_argument("max_wait must be positive");
    if (max_repl_mem == 0) throw std::invalid_argument("max_repl_mem must be positive");
    if (checker_command.empty()) throw std::invalid_argument("checker command is empty");
    if (supervisor_tick.count() <= 0) throw std::invalid_argument("supervisor tick must be positive");
    if (queue_wait_factor <= 0) throw std::invalid_argument("queue wait factor must be positive");
}

std::string_view to_string(WorkerState state) {
    switch (state) {
        case WorkerState::starting: return "starting";
        case WorkerState::idle_cold: return "idle_cold";
        case WorkerState::idle_warm: return "idle_warm";
        case WorkerState::busy: return "busy";
        case WorkerState::dead: return "dead";
    }
    return "unknown";
}

// ---- single worker -------------------------------------------------------

std::optional<pid_t> Worker::pid() const {
    if (process_ && process_->running()) return process_->pid();
    return std::nullopt;
}

std::optional<std::size_t> Worker::resident_bytes() const {
    if (!process_) return std::nullopt;
    return process_->resident_bytes();
}

void Worker::kill() {
    process_.reset();
    state_ = WorkerState::dead;
    warmed_key_.reset();
    warmed_env_.reset();
}

ReplReply Worker::exchange(const ReplCommand& command, Clock::time_point deadline, std::stop_token stop) {
    if (!process_ || !process_->running()) {
        throw WorkerCrashed("worker " + std::to_string(id_) + " is not running");
    }
    if (Clock::now() >= deadline) {
        throw TimeoutExceeded("deadline passed before the command was sent");
    }
    // The trailing blank line terminates the command for checkers that read
    // multi-line input.
    if (!process_->write_all(encode_command(command) + "\n")) {
        kill();
        throw WorkerCrashed("checker closed its input");
    }

    auto fail = [&](ChildProcess::ReadStatus status) -> ReplReply {
        kill();
        switch (status) {
            case ChildProcess::ReadStatus::timeout: throw TimeoutExceeded("no reply before the deadline");
            case ChildProcess::ReadStatus::stopped: throw WorkerCrashed("worker stopped during a command");
            default: throw WorkerCrashed("checker exited without replying");
        }
    };

    ChildProcess::ReadResult read;
    do {
        read = process_->read_line(deadline, stop);
        if (read.status != ChildProcess::ReadStatus::line) return fail(read.status);
    } while (trim(read.line).empty());

    try {
        return decode_reply(read.line);
    } catch (const MalformedReply& first_error) {
        // Only an incomplete document is worth continuing; a complete but
        // unexpected one (such as an error object) is final.
        if (!trim_left(read.line).starts_with("{") || json::accept(read.line)) {
            kill();
            throw WorkerCrashed(std::string("malformed reply: ") + first_error.what());
        }
    }
    // Pretty-printed reply: gather lines up to the blank separator.
    std::string document = read.line;
    for (;;) {
        read = process_->read_line(deadline, stop);
        if (read.status != ChildProcess::ReadStatus::line) return fail(read.status);
        if (trim(read.line).empty()) break;
        document += "\n" + read.line;
    }
    try {
        return decode_reply(document);
    } catch (const MalformedReply& e) {
        kill();
        throw WorkerCrashed(std::string("malformed reply: ") + e.what());
    }
}

Worker spawn_worker(const PoolConfig& config, WorkerId id) {
    Worker worker(id);
    worker.process_.emplace(ChildProcess::spawn(config.checker_command, config.checker_env, config.inherit_stderr));
    worker.state_ = WorkerState::starting;
    try {
        worker.exchange(ReplCommand{}, Clock::now() + std::chrono::duration_cast<Clock::duration>(config.startup_timeout),
                        {});
    } catch (const std::exception& e) {
        worker.kill();
        throw SpawnFailure("checker did not answer the readiness probe: " + std::string(e.what()));
    }
    worker.state_ = WorkerState::idle_cold;
    worker.last_used_ = Clock::now();
    return worker;
}

EnvId warm(Worker& worker, std::string_view header, Clock::time_point deadline, std::stop_token stop) {
    const HeaderKey key = normalize_header(header);
    if (key.empty()) {
        throw std::invalid_argument("cannot warm a worker on an empty header");
    }
    if (worker.warmed_key_ == key && worker.warmed_env_) {
        return *worker.warmed_env_;
    }
    worker.state_ = WorkerState::busy;
    ReplReply reply = worker.exchange(ReplCommand{std::string(header), std::nullopt, InfotreeMode::none}, deadline, stop);
    worker.last_used_ = Clock::now();
    if (reply.has_errors()) {
        worker.kill();
        throw WarmFailure("header import failed", std::move(reply));
    }
    worker.warmed_key_ = key;
    worker.warmed_env_ = reply.env;
    worker.state_ = WorkerState::idle_warm;
    return reply.env;
}

ReplReply execute(Worker& worker, const ReplCommand& command, Clock::time_point deadline, std::stop_token stop) {
    const auto previous = worker.state_;
    worker.state_ = WorkerState::busy;
    ReplReply reply = worker.exchange(command, deadline, stop);
    worker.last_used_ = Clock::now();
    worker.state_ = previous == WorkerState::busy ? WorkerState::idle_cold : previous;
    return reply;
}

Job make_job(const Snippet& snippet, Seconds timeout, InfotreeMode infotree, bool reuse) {
    auto split = split_snippet(snippet.code);
    Job job;
    job.snippet_id = snippet.id;
    job.header_key = normalize_header(split.header);
    job.header = std::move(split.header);
    job.body = std::move(split.body);
    job.full_code = snippet.code;
    job.infotree = infotree;
    job.timeout = timeout;
    job.reuse = reuse;
    return job;
}

// ---- pool ----------------------------------------------------------------

WorkerPool::WorkerPool(PoolConfig config) : config_(std::move(config)) {
    config_.validate();
    // Writes to a dead checker must fail with EPIPE instead of killing us.
    ::signal(SIGPIPE, SIG_IGN);
    slots_.reserve(static_cast<std::size_t>(config_.max_repls));
    for (int i = 0; i < config_.max_repls; ++i) {
        slots_.push_back(std::make_unique<Slot>(i));
    }
    for (auto& slot : slots_) {
        slot->thread = std::jthread([this, s = slot.get()](std::stop_token stop) { run_slot(*s, stop); });
    }
    supervisor_ = std::jthread([this](std::stop_token stop) { run_supervisor(stop); });
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
        fail_queue_locked(Status::crashed, "pool shutting down");
    }
    supervisor_.request_stop();
    for (auto& slot : slots_) slot->thread.request_stop();
    if (supervisor_.joinable()) supervisor_.join();
    for (auto& slot : slots_) {
        if (slot->thread.joinable()) slot->thread.join();
    }
}

std::future<CheckOutcome> WorkerPool::submit(Job job) {
    auto pending = std::make_unique<Pending>();
    const auto wait = std::chrono::duration_cast<Clock::duration>(config_.max_wait * config_.queue_wait_factor);
    pending->queue_deadline = Clock::now() + wait;
    pending->job = std::move(job);
    auto future = pending->promise.get_future();

    std::lock_guard lock(mutex_);
    ++counters_.submitted;
    if (stopping_ || !any_worker_possible_locked()) {
        CheckOutcome outcome;
        outcome.snippet_id = pending->job.snippet_id;
        outcome.status = Status::crashed;
        outcome.error = stopping_ ? "pool shutting down" : "no live workers";
        finish_locked(outcome);
        pending->promise.set_value(std::move(outcome));
        return future;
    }
    queue_.push_back(std::move(pending));
    schedule_locked();
    return future;
}

bool WorkerPool::wait_until_ready(Seconds timeout) {
    std::unique_lock lock(mutex_);
    return state_changed_.wait_for(lock, timeout, [&] {
        return std::none_of(slots_.begin(), slots_.end(),
                            [](const auto& s) { return s->state == WorkerState::starting; });
    });
}

std::vector<WorkerId> WorkerPool::enforce_memory() {
    std::vector<WorkerId> recycled;
    std::lock_guard lock(mutex_);
    for (auto& slot : slots_) {
        if (!slot->pid || slot->recycle) continue;
        const auto rss = resident_bytes_of(*slot->pid);
        if (!rss || *rss <= config_.max_repl_mem) continue;
        slot->recycle = true;
        if (slot->idle) {
            slot->idle = false;
            cache_.forget(slot->worker.id());
            ++counters_.memory_kills;
            recycled.push_back(slot->worker.id());
            slot->wake.notify_all();
        }
    }
    return recycled;
}

void WorkerPool::kill_all() {
    std::lock_guard lock(mutex_);
    for (auto& slot : slots_) {
        slot->recycle = true;
        if (slot->idle) {
            slot->idle = false;
            cache_.forget(slot->worker.id());
        }
        slot->wake.notify_all();
    }
}

PoolStats WorkerPool::stats() const {
    std::lock_guard lock(mutex_);
    PoolStats out = counters_;
    out.queued = queue_.size();
    out.cache = cache_.stats();
    for (const auto& slot : slots_) {
        switch (slot->state) {
            case WorkerState::starting: ++out.starting; break;
            case WorkerState::idle_cold: ++out.idle; ++out.live; break;
            case WorkerState::idle_warm: ++out.idle; ++out.warm; ++out.live; break;
            case WorkerState::busy: ++out.busy; ++out.live; break;
            case WorkerState::dead: ++out.dead; break;
        }
        out.workers.push_back(WorkerInfo{slot->worker.id(), slot->state, slot->pid, slot->key, slot->jobs});
    }
    return out;
}

int WorkerPool::live_workers() const {
    std::lock_guard lock(mutex_);
    return static_cast<int>(std::count_if(slots_.begin(), slots_.end(), [](const auto& s) {
        return s->state != WorkerState::starting && s->state != WorkerState::dead;
    }));
}

void WorkerPool::run_slot(Slot& slot, std::stop_token stop) {
    const WorkerId id = slot.worker.id();
    std::unique_lock lock(mutex_);
    while (!stop.stop_requested()) {
        if (slot.worker.state() == WorkerState::dead) {
            if (slot.spawned_once && !config_.respawn) {
                slot.state = WorkerState::dead;
                publish_locked(slot);
                slot.wake.wait(lock, stop, [] { return false; });
                break;
            }
            slot.state = WorkerState::starting;
            publish_locked(slot);
            lock.unlock();
            std::optional<Worker> fresh;
            std::string failure;
            try {
                fresh.emplace(spawn_worker(config_, id));
            } catch (const SpawnFailure& e) {
                failure = e.what();
            }
            lock.lock();
            if (!fresh) {
                slot.state = WorkerState::dead;
                slot.spawned_once = true;
                publish_locked(slot);
                if (!config_.respawn) continue;
                slot.wake.wait_for(lock, stop, config_.supervisor_tick, [] { return false; });
                continue;
            }
            if (slot.spawned_once) ++counters_.respawns;
            slot.spawned_once = true;
            slot.worker = std::move(*fresh);
            slot.recycle = false;
            slot.state = slot.worker.state();
            slot.idle = true;
            slot.idle_since = Clock::now();
            publish_locked(slot);
            schedule_locked();
        }

        slot.wake.wait(lock, stop, [&] { return slot.assignment != nullptr || slot.recycle; });
        if (stop.stop_requested() && !slot.assignment) break;

        if (!slot.assignment) {
            // Recycle request while idle.
            slot.idle = false;
            cache_.forget(id);
            lock.unlock();
            slot.worker.kill();
            lock.lock();
            slot.recycle = false;
            ++counters_.recycled;
            publish_locked(slot);
            continue;
        }

        std::unique_ptr<Pending> pending = std::move(slot.assignment);
        lock.unlock();
        bool imported = false;
        CheckOutcome outcome = run_job(slot.worker, pending->job, stop, imported);
        slot.worker.count_job();

        bool over_memory = false;
        if (slot.worker.state() != WorkerState::dead) {
            if (auto rss = slot.worker.resident_bytes(); rss && *rss > config_.max_repl_mem) over_memory = true;
        }
        lock.lock();
        const bool recycle = slot.worker.state() != WorkerState::dead &&
                             (!pending->job.reuse || over_memory || slot.recycle);
        if (imported) ++counters_.header_imports;
        if (over_memory) ++counters_.memory_kills;
        lock.unlock();
        if (recycle) slot.worker.kill();
        lock.lock();

        if (recycle) ++counters_.recycled;
        slot.recycle = false;
        --counters_.executing;
        const auto& key = slot.worker.warmed_key();
        if (slot.worker.state() != WorkerState::dead && key) {
            if (cache_.assigned_key(id) != key) cache_.assign(id, *key);
            cache_.release(id, *key);
        } else {
            cache_.forget(id);
        }
        const bool alive = slot.worker.state() != WorkerState::dead;
        slot.state = slot.worker.state();
        slot.idle = alive;
        slot.idle_since = Clock::now();
        finish_locked(outcome);
        publish_locked(slot);
        schedule_locked();
        pending->promise.set_value(std::move(outcome));
    }
    lock.unlock();
    slot.worker.kill();
    lock.lock();
    slot.idle = false;
    cache_.forget(id);
    slot.state = WorkerState::dead;
    publish_locked(slot);
}

CheckOutcome WorkerPool::run_job(Worker& worker, const Job& job, std::stop_token stop, bool& imported) {
    CheckOutcome outcome;
    outcome.snippet_id = job.snippet_id;
    outcome.worker = worker.id();
    const auto started = Clock::now();
    const auto deadline = started + std::chrono::duration_cast<Clock::duration>(job.timeout);
    try {
        ReplReply reply;
        if (job.header_key.empty()) {
            reply = execute(worker, ReplCommand{job.full_code, std::nullopt, job.infotree}, deadline, stop);
        } else if (job.reuse) {
            imported = worker.warmed_key() != job.header_key;
            const EnvId env = warm(worker, job.header, deadline, stop);
            reply = execute(worker, ReplCommand{job.body, env, job.infotree}, deadline, stop);
        } else {
            imported = true;
            ReplReply header = execute(worker, ReplCommand{job.header, std::nullopt, InfotreeMode::none}, deadline, stop);
            if (header.has_errors()) throw WarmFailure("header import failed", std::move(header));
            reply = execute(worker, ReplCommand{job.body, header.env, job.infotree}, deadline, stop);
        }
        outcome.status = analyze(reply).status;
        outcome.reply = std::move(reply);
    } catch (const WarmFailure& e) {
        outcome.status = Status::invalid;
        outcome.reply = e.reply;
        outcome.error = e.what();
    } catch (const TimeoutExceeded&) {
        outcome.status = Status::timeout;
        outcome.error = "timed out after " + format_seconds(job.timeout);
    } catch (const WorkerCrashed& e) {
        outcome.status = Status::crashed;
        outcome.error = e.what();
    }
    outcome.elapsed = seconds_between(started, Clock::now());
    if (outcome.reply) outcome.reply->time = outcome.elapsed;
    return outcome;
}

void WorkerPool::run_supervisor(std::stop_token stop) {
    constexpr auto poll = std::chrono::milliseconds(100);
    auto next_memory_check = Clock::now() + config_.supervisor_tick;
    std::unique_lock lock(mutex_);
    while (!stop.stop_requested()) {
        state_changed_.wait_for(lock, stop, std::min<Clock::duration>(poll, config_.supervisor_tick),
                                [] { return false; });
        if (stop.stop_requested()) break;
        const auto now = Clock::now();
        expire_queue_locked(now);
        if (!any_worker_possible_locked()) fail_queue_locked(Status::crashed, "no live workers");
        if (now >= next_memory_check) {
            next_memory_check = now + config_.supervisor_tick;
            lock.unlock();
            enforce_memory();
            lock.lock();
        }
    }
}

void WorkerPool::schedule_locked() {
    while (!queue_.empty()) {
        Slot* slot = pick_slot_locked(queue_.front()->job);
        if (!slot) break;
        slot->assignment = std::move(queue_.front());
        queue_.pop_front();
        slot->idle = false;
        slot->state = WorkerState::busy;
        ++counters_.executing;
        counters_.peak_executing = std::max(counters_.peak_executing, counters_.executing);
        slot->wake.notify_all();
    }
    if (!queue_.empty() && !any_worker_possible_locked()) {
        fail_queue_locked(Status::crashed, "no live workers");
    }
    state_changed_.notify_all();
}

void WorkerPool::expire_queue_locked(Clock::time_point now) {
    for (auto it = queue_.begin(); it != queue_.end();) {
        if ((*it)->queue_deadline > now) {
            ++it;
            continue;
        }
        CheckOutcome outcome;
        outcome.snippet_id = (*it)->job.snippet_id;
        outcome.status = Status::timeout;
        outcome.error = "queued past deadline";
        ++counters_.queue_timeouts;
        finish_locked(outcome);
        (*it)->promise.set_value(std::move(outcome));
        it = queue_.erase(it);
    }
}

void WorkerPool::fail_queue_locked(Status status, const std::string& error) {
    while (!queue_.empty()) {
        auto pending = std::move(queue_.front());
        queue_.pop_front();
        CheckOutcome outcome;
        outcome.snippet_id = pending->job.snippet_id;
        outcome.status = status;
        outcome.error = error;
        finish_locked(outcome);
        pending->promise.set_value(std::move(outcome));
    }
}

bool WorkerPool::any_worker_possible_locked() const {
    if (config_.respawn) return true;
    return std::any_of(slots_.begin(), slots_.end(), [](const auto& s) {
        return s->state != WorkerState::dead || !s->spawned_once;
    });
}

void WorkerPool::publish_locked(Slot& slot) {
    slot.pid = slot.worker.pid();
    slot.key = slot.worker.warmed_key();
    slot.jobs = slot.worker.jobs_served();
    state_changed_.notify_all();
}

WorkerPool::Slot* WorkerPool::oldest_cold_slot_locked() {
    Slot* best = nullptr;
    for (auto& slot : slots_) {
        if (!slot->idle || slot->recycle || slot->state != WorkerState::idle_cold) continue;
        if (!best || slot->idle_since < best->idle_since) best = slot.get();
    }
    return best;
}

WorkerPool::Slot* WorkerPool::pick_slot_locked(const Job& job) {
    const bool any_idle = std::any_of(slots_.begin(), slots_.end(),
                                      [](const auto& s) { return s->idle && !s->recycle; });
    if (!any_idle) return nullptr;
    auto by_id = [&](WorkerId id) { return slots_.at(static_cast<std::size_t>(id)).get(); };

    if (job.reuse && !job.header_key.empty()) {
        if (auto hit = cache_.lookup(job.header_key)) return by_id(*hit);
        if (Slot* cold = oldest_cold_slot_locked()) return cold;
        if (auto victim = cache_.evict_lru()) return by_id(*victim);
        return nullptr;
    }
    if (Slot* cold = oldest_cold_slot_locked()) return cold;
    if (auto oldest = cache_.least_recent()) {
        cache_.claim(*oldest);
        return by_id(*oldest);
    }
    return nullptr;
}

void WorkerPool::finish_locked(const CheckOutcome& outcome) {
    ++counters_.completed;
    if (outcome.status == Status::timeout) ++counters_.timeouts;
    if (outcome.status == Status::crashed) ++counters_.crashes;
}

}  // namespace proofgate
