#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "proofgate/protocol.hpp"
#include "proofgate/worker_pool.hpp"

namespace httplib {
class Server;
}

namespace proofgate {

/// Rejected request (maps to HTTP 400, or 413 for an oversized batch).
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what, int http_status = 400)
        : std::invalid_argument(what), http_status(http_status) {}
    int http_status;
};

/// No worker can take the request (HTTP 503).
class ServiceUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CheckRequest {
    std::vector<Snippet> snippets;
    std::optional<Seconds> timeout;
    InfotreeMode infotree = InfotreeMode::none;
    /// false selects non-cached mode: fresh import per snippet, worker recycled.
    bool reuse = true;

    /// Throws ValidationError on schema violations (but not on batch rules).
    static CheckRequest from_json(const json& doc);
    json to_json() const;
};

/// One entry of the "results" array.
json result_to_json(const CheckOutcome& outcome);

struct ServiceConfig {
    std::size_t max_batch = 10'000;
};

/// Transport-independent request handling on top of a pool.
class Service {
public:
    Service(WorkerPool& pool, ServiceConfig config = {});

    /// Validates, fans the batch out to the pool and gathers results in
    /// request order. Throws ValidationError or ServiceUnavailable.
    json check(const CheckRequest& request);

    json health() const;
    bool healthy() const;
    /// Plain-text counters, one "name value" pair per line.
    std::string metrics() const;

    double uptime() const;
    std::uint64_t peak_concurrent_checks() const { return peak_checks_.load(); }

private:
    void validate(const CheckRequest& request) const;

    WorkerPool& pool_;
    ServiceConfig config_;
    Clock::time_point started_;
    std::atomic<std::uint64_t> check_requests_{0};
    std::atomic<std::uint64_t> rejected_{0};
    std::atomic<std::uint64_t> unavailable_{0};
    std::atomic<std::uint64_t> snippets_{0};
    std::atomic<std::uint64_t> active_checks_{0};
    std::atomic<std::uint64_t> peak_checks_{0};
};

/// HTTP front end: POST /check, GET /health, GET /metrics.
class HttpServer {
public:
    HttpServer(Service& service, std::string host, int port, int threads = 64);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds the socket; with port 0 an ephemeral port is chosen. Returns the bound port.
    int bind();
    /// Serves until stop(); blocks.
    void serve();
    /// bind() plus serve() on a background thread.
    int start();
    void stop();

    int port() const { return port_; }
    const std::string& host() const { return host_; }

private:
    void install_routes();

    Service& service_;
    std::string host_;
    int port_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace proofgate
