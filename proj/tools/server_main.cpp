#include <signal.h>

#include <CLI11.hpp>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "proofgate/service.hpp"

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* value = std::getenv(name);
    return value && *value ? value : fallback;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace proofgate;

    CLI::App app{"Batch proof-checking server backed by a pool of checker processes"};
    std::string host = env_or("LEAN_SERVER_HOST", "0.0.0.0");
    int port = std::stoi(env_or("LEAN_SERVER_PORT", "8000"));
    std::size_t max_batch = 10'000;
    int http_threads = 64;
    bool log_stderr = false;
    app.add_option("--host", host, "Listen address (LEAN_SERVER_HOST)");
    app.add_option("--port", port, "Listen port, 0 for any (LEAN_SERVER_PORT)");
    app.add_option("--max-batch", max_batch, "Largest accepted batch")->check(CLI::PositiveNumber);
    app.add_option("--http-threads", http_threads, "Request handler threads")->check(CLI::PositiveNumber);
    app.add_flag("--checker-stderr", log_stderr, "Let checker processes write to this stderr");
    CLI11_PARSE(app, argc, argv);

    // Handle termination signals on a dedicated thread.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    try {
        auto config = PoolConfig::from_env();
        config.inherit_stderr = log_stderr;
        WorkerPool pool(config);
        Service service(pool, ServiceConfig{max_batch});
        HttpServer server(service, host, port, http_threads);
        const int bound = server.bind();
        std::cerr << "proofgate: " << config.max_repls << " workers, checker '" << config.checker_command.front()
                  << "', listening on " << host << ":" << bound << std::endl;

        std::atomic<bool> signalled{false};
        std::thread waiter([&] {
            int received = 0;
            sigwait(&signals, &received);
            signalled = true;
            std::cerr << "proofgate: shutting down" << std::endl;
            server.stop();
        });
        server.serve();
        // serve() can also return on its own (socket error); unblock the waiter.
        if (!signalled) pthread_kill(waiter.native_handle(), SIGTERM);
        waiter.join();
    } catch (const std::exception& e) {
        std::cerr << "proofgate: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
