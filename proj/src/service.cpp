#include "proofgate/service.hpp"

#include <httplib.h>

#include <future>
#include <iostream>
#include <sstream>
#include <unordered_set>

namespace proofgate {

namespace {

void raise_peak(std::atomic<std::uint64_t>& peak, std::uint64_t value) {
    auto current = peak.load();
    while (value > current && !peak.compare_exchange_weak(current, value)) {
    }
}

json error_body(const std::string& message) {
    return json{{"error", message}};
}

void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
}

}  // namespace

CheckRequest CheckRequest::from_json(const json& doc) {
    if (!doc.is_object()) throw ValidationError("request body must be an object");
    CheckRequest request;
    const auto snippets = doc.find("snippets");
    if (snippets == doc.end() || !snippets->is_array()) throw ValidationError("'snippets' must be an array");
    request.snippets.reserve(snippets->size());
    for (const auto& item : *snippets) {
        if (!item.is_object()) throw ValidationError("each snippet must be an object");
        const auto id = item.find("id");
        const auto code = item.find("code");
        if (id == item.end() || !id->is_string()) throw ValidationError("snippet 'id' must be a string");
        if (code == item.end() || !code->is_string()) throw ValidationError("snippet 'code' must be a string");
        request.snippets.push_back(Snippet{id->get<std::string>(), code->get<std::string>()});
    }
    if (auto it = doc.find("timeout"); it != doc.end() && !it->is_null()) {
        if (!it->is_number()) throw ValidationError("'timeout' must be a number");
        request.timeout = Seconds{it->get<double>()};
    }
    if (auto it = doc.find("infotree"); it != doc.end() && !it->is_null()) {
        if (!it->is_string()) throw ValidationError("'infotree' must be a string");
        try {
            request.infotree = infotree_mode_from_string(it->get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
    }
    if (auto it = doc.find("reuse"); it != doc.end() && !it->is_null()) {
        if (!it->is_boolean()) throw ValidationError("'reuse' must be a boolean");
        request.reuse = it->get<bool>();
    }
    return request;
}

json CheckRequest::to_json() const {
    json items = json::array();
    for (const auto& s : snippets) items.push_back(json{{"id", s.id}, {"code", s.code}});
    json doc{{"snippets", std::move(items)}, {"reuse", reuse}};
    if (timeout) doc["timeout"] = timeout->count();
    if (infotree != InfotreeMode::none) doc["infotree"] = std::string(to_string(infotree));
    return doc;
}

json result_to_json(const CheckOutcome& outcome) {
    json doc{{"id", outcome.snippet_id}, {"status", std::string(to_string(outcome.status))}};
    if (outcome.reply) {
        doc["response"] = to_json(*outcome.reply);
    } else {
        doc["error"] = outcome.error.value_or("no reply");
    }
    return doc;
}

Service::Service(WorkerPool& pool, ServiceConfig config)
    : pool_(pool), config_(config), started_(Clock::now()) {}

void Service::validate(const CheckRequest& request) const {
    if (request.snippets.empty()) throw ValidationError("batch is empty");
    if (request.snippets.size() > config_.max_batch) {
        throw ValidationError("batch of " + std::to_string(request.snippets.size()) + " exceeds the limit of " +
                                  std::to_string(config_.max_batch),
                              413);
    }
    if (request.timeout && !(request.timeout->count() > 0)) throw ValidationError("timeout must be positive");
    std::unordered_set<std::string_view> ids;
    for (const auto& s : request.snippets) {
        if (!ids.insert(s.id).second) throw ValidationError("duplicate snippet id '" + s.id + "'");
    }
}

json Service::check(const CheckRequest& request) {
    ++check_requests_;
    try {
        validate(request);
    } catch (const ValidationError&) {
        ++rejected_;
        throw;
    }
    const auto stats = pool_.stats();
    if (stats.live == 0 && stats.starting == 0) {
        ++unavailable_;
        throw ServiceUnavailable("no live workers");
    }

    raise_peak(peak_checks_, ++active_checks_);
    struct Leave {
        std::atomic<std::uint64_t>& counter;
        ~Leave() { --counter; }
    } leave{active_checks_};

    const Seconds timeout = request.timeout.value_or(pool_.config().max_wait);
    std::vector<std::future<CheckOutcome>> futures;
    futures.reserve(request.snippets.size());
    for (const auto& snippet : request.snippets) {
        futures.push_back(pool_.submit(make_job(snippet, timeout, request.infotree, request.reuse)));
    }
    snippets_ += request.snippets.size();

    json results = json::array();
    for (auto& f : futures) results.push_back(result_to_json(f.get()));
    return json{{"results", std::move(results)}};
}

double Service::uptime() const {
    return std::chrono::duration<double>(Clock::now() - started_).count();
}

bool Service::healthy() const {
    return pool_.live_workers() > 0;
}

json Service::health() const {
    const auto stats = pool_.stats();
    json buckets = json::object();
    for (const auto& [key, size] : stats.cache.bucket_sizes) buckets[key] = size;
    json workers = json::array();
    for (const auto& w : stats.workers) {
        json info{{"id", w.id}, {"state", std::string(to_string(w.state))}, {"jobs", w.jobs_served}};
        info["pid"] = w.pid ? json(*w.pid) : json(nullptr);
        info["header"] = w.warmed_key ? json(*w.warmed_key) : json(nullptr);
        workers.push_back(std::move(info));
    }
    return json{{"status", stats.live > 0 ? "ok" : "unavailable"},
                {"live", stats.live},
                {"idle", stats.idle},
                {"warm", stats.warm},
                {"busy", stats.busy},
                {"starting", stats.starting},
                {"dead", stats.dead},
                {"queued", stats.queued},
                {"max_repls", pool_.config().max_repls},
                {"cache",
                 {{"hits", stats.cache.hits},
                  {"misses", stats.cache.misses},
                  {"evictions", stats.cache.evictions},
                  {"buckets", std::move(buckets)}}},
                {"workers", std::move(workers)},
                {"uptime", uptime()}};
}

std::string Service::metrics() const {
    const auto s = pool_.stats();
    std::ostringstream out;
    auto line = [&](std::string_view name, auto value) { out << "proofgate_" << name << ' ' << value << '\n'; };
    line("uptime_seconds", uptime());
    line("check_requests_total", check_requests_.load());
    line("check_requests_rejected_total", rejected_.load());
    line("check_requests_unavailable_total", unavailable_.load());
    line("check_requests_active", active_checks_.load());
    line("check_requests_active_peak", peak_checks_.load());
    line("snippets_total", snippets_.load());
    line("workers_max", pool_.config().max_repls);
    line("workers_live", s.live);
    line("workers_idle", s.idle);
    line("workers_warm", s.warm);
    line("workers_busy", s.busy);
    line("workers_starting", s.starting);
    line("workers_dead", s.dead);
    line("jobs_queued", s.queued);
    line("jobs_executing", s.executing);
    line("jobs_executing_peak", s.peak_executing);
    line("jobs_submitted_total", s.submitted);
    line("jobs_completed_total", s.completed);
    line("jobs_timeout_total", s.timeouts);
    line("jobs_crashed_total", s.crashes);
    line("jobs_queue_timeout_total", s.queue_timeouts);
    line("worker_respawns_total", s.respawns);
    line("worker_recycled_total", s.recycled);
    line("worker_memory_kills_total", s.memory_kills);
    line("header_imports_total", s.header_imports);
    line("cache_hits_total", s.cache.hits);
    line("cache_misses_total", s.cache.misses);
    line("cache_evictions_total", s.cache.evictions);
    line("cache_buckets", s.cache.bucket_sizes.size());
    return out.str();
}

// ---- HTTP ----------------------------------------------------------------

HttpServer::HttpServer(Service& service, std::string host, int port, int threads)
    : service_(service), host_(std::move(host)), port_(port), server_(std::make_unique<httplib::Server>()) {
    const auto pool_size = static_cast<std::size_t>(std::max(threads, 1));
    server_->new_task_queue = [pool_size] { return new httplib::ThreadPool(pool_size); };
    // Large batches can take a long time; never cut a response short.
    server_->set_read_timeout(std::chrono::hours(24));
    server_->set_write_timeout(std::chrono::hours(24));
    server_->set_payload_max_length(std::size_t{1} << 30);
    install_routes();
}

HttpServer::~HttpServer() {
    stop();
}

void HttpServer::install_routes() {
    server_->Post("/check", [this](const httplib::Request& req, httplib::Response& res) {
        const auto doc = json::parse(req.body, nullptr, false);
        if (doc.is_discarded()) {
            reply_json(res, 400, error_body("request body is not valid JSON"));
            return;
        }
        try {
            reply_json(res, 200, service_.check(CheckRequest::from_json(doc)));
        } catch (const ValidationError& e) {
            reply_json(res, e.http_status, error_body(e.what()));
        } catch (const ServiceUnavailable& e) {
            reply_json(res, 503, error_body(e.what()));
        }
    });
    server_->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        const auto body = service_.health();
        reply_json(res, body["live"].get<int>() > 0 ? 200 : 503, body);
    });
    server_->Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(service_.metrics(), "text/plain; version=0.0.4");
    });
    server_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        reply_json(res, 500, error_body(message));
    });
}

int HttpServer::bind() {
    if (port_ == 0) {
        port_ = server_->bind_to_any_port(host_);
        if (port_ < 0) throw std::runtime_error("cannot bind " + host_);
    } else if (!server_->bind_to_port(host_, port_)) {
        throw std::runtime_error("cannot bind " + host_ + ":" + std::to_string(port_));
    }
    return port_;
}

void HttpServer::serve() {
    server_->listen_after_bind();
}

int HttpServer::start() {
    const int bound = bind();
    thread_ = std::thread([this] { serve(); });
    server_->wait_until_ready();
    return bound;
}

void HttpServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace proofgate
