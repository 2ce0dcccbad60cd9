// reflect-serve: HTTP job service for the mask-painting UI.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "reflect/service.hpp"

namespace {
reflect::service::Service* g_service = nullptr;

void on_signal(int) {
    if (g_service != nullptr) g_service->stop();
}
} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Job-based HTTP service for reflection suppression"};
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t max_upload_mb = 64;
    reflect::service::ServiceConfig cfg;
    app.add_option("--host", host, "bind address")->capture_default_str();
    app.add_option("--port", port, "listen port")->capture_default_str();
    app.add_option("--workers", cfg.jobs.workers, "concurrent solver jobs")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--max-upload-mb", max_upload_mb, "request size cap in MiB")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--results", cfg.jobs.result_capacity, "finished jobs kept in memory")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--threads", cfg.jobs.threads_per_job, "solver threads per job")->capture_default_str();
    app.add_option("--cors-origin", cfg.cors_origin, "Access-Control-Allow-Origin value")->capture_default_str();
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    cfg.max_upload_bytes = max_upload_mb << 20;
    cfg.jobs.threads_per_job = reflect::resolve_threads(cfg.jobs.threads_per_job == 0 ? 1 : cfg.jobs.threads_per_job);

    reflect::service::Service service(cfg);
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on http://" << host << ":" << port << "\n";
    if (!service.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return 2;
    }
    return 0;
}
