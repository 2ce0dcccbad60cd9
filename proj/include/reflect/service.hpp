#pragma once

// In-memory job queue and HTTP front end for interactive use:
//   POST /jobs               multipart: image, mask?, params? (JSON object)
//   GET  /jobs/{id}          job status
//   GET  /jobs/{id}/result   image/png once done
//   GET  /healthz

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <ctime>
#include <deque>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "reflect/cli.hpp"
#include "reflect/image_io.hpp"
#include "reflect/json_io.hpp"
#include "reflect/selection.hpp"
#include "reflect/solver.hpp"

namespace reflect::service {

enum class JobStatus { queued, running, done, failed };

inline const char* to_string(JobStatus s) {
    switch (s) {
        case JobStatus::queued: return "queued";
        case JobStatus::running: return "running";
        case JobStatus::done: return "done";
        case JobStatus::failed: return "failed";
    }
    return "unknown";
}

inline std::string iso8601(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Copy of a job's observable state.
struct JobSnapshot {
    std::string id;
    JobStatus status = JobStatus::queued;
    SolverParams params;
    std::chrono::system_clock::time_point created;
    std::optional<std::chrono::system_clock::time_point> completed;
    double progress = 0.0;
    std::string error;
    std::size_t height = 0;
    std::size_t width = 0;
};

inline nlohmann::json to_json(const JobSnapshot& s) {
    nlohmann::json j{
        {"id", s.id},
        {"status", to_string(s.status)},
        {"progress", s.progress},
        {"params", params_to_json(s.params)},
        {"created", iso8601(s.created)},
        {"completed", nullptr},
        {"height", s.height},
        {"width", s.width},
    };
    if (s.completed) j["completed"] = iso8601(*s.completed);
    if (s.status == JobStatus::failed) j["error"] = s.error;
    return j;
}

struct JobManagerConfig {
    std::size_t workers = 2;
    /// Finished jobs kept in memory; the least recently used beyond this are dropped.
    std::size_t result_capacity = 32;
    /// Solver threads per job (channel parallelism).
    std::size_t threads_per_job = 1;
};

/// FIFO queue drained by a fixed worker pool. At most `workers` solves run at once.
class JobManager {
public:
    explicit JobManager(JobManagerConfig cfg = {}) : cfg_(cfg), rng_(std::random_device{}()) {
        if (cfg_.workers == 0) throw ParameterError("worker pool must have at least one worker");
        if (cfg_.result_capacity == 0) throw ParameterError("result capacity must be positive");
        for (std::size_t i = 0; i < cfg_.workers; ++i) pool_.emplace_back([this] { work(); });
    }

    JobManager(const JobManager&) = delete;
    JobManager& operator=(const JobManager&) = delete;

    ~JobManager() {
        {
            std::lock_guard lock(mu_);
            stopping_ = true;
        }
        cv_.notify_all();
        for (auto& t : pool_) t.join();
    }

    std::string submit(ImageBuffer image, SelectionMask mask, SolverParams params) {
        params.validate();
        require_stencil_size(image.shape(), "job");
        require_mask_matches(mask, image.shape(), "job");
        auto job = std::make_shared<Job>();
        job->snapshot.params = params;
        job->snapshot.created = std::chrono::system_clock::now();
        job->snapshot.height = image.height();
        job->snapshot.width = image.width();
        job->image = std::move(image);
        job->mask = std::move(mask);
        std::string id;
        {
            std::lock_guard lock(mu_);
            do {
                id = new_id();
            } while (jobs_.contains(id));
            job->snapshot.id = id;
            jobs_.emplace(id, job);
            queue_.push_back(job);
        }
        cv_.notify_one();
        return id;
    }

    [[nodiscard]] std::optional<JobSnapshot> get(const std::string& id) const {
        std::lock_guard lock(mu_);
        auto it = jobs_.find(id);
        if (it == jobs_.end()) return std::nullopt;
        return it->second->snapshot;
    }

    enum class Fetch { ok, not_found, not_ready };

    /// Result PNG of a done job. Counts as a use for the LRU.
    Fetch result(const std::string& id, std::vector<std::uint8_t>& png) {
        std::lock_guard lock(mu_);
        auto it = jobs_.find(id);
        if (it == jobs_.end()) return Fetch::not_found;
        if (it->second->snapshot.status != JobStatus::done) return Fetch::not_ready;
        touch(id);
        png = *it->second->result;
        return Fetch::ok;
    }

    /// Blocks until the job leaves queued/running or the timeout passes.
    std::optional<JobSnapshot> wait(const std::string& id, std::chrono::milliseconds timeout) {
        std::unique_lock lock(mu_);
        auto finished = [&] {
            auto it = jobs_.find(id);
            return it == jobs_.end() || it->second->snapshot.status == JobStatus::done ||
                   it->second->snapshot.status == JobStatus::failed;
        };
        done_cv_.wait_for(lock, timeout, finished);
        auto it = jobs_.find(id);
        if (it == jobs_.end()) return std::nullopt;
        return it->second->snapshot;
    }

    struct Counts {
        std::size_t queued = 0;
        std::size_t running = 0;
        std::size_t finished = 0;
    };

    [[nodiscard]] Counts counts() const {
        std::lock_guard lock(mu_);
        Counts c;
        for (const auto& [_, job] : jobs_) {
            switch (job->snapshot.status) {
                case JobStatus::queued: ++c.queued; break;
                case JobStatus::running: ++c.running; break;
                default: ++c.finished; break;
            }
        }
        return c;
    }

    /// Largest number of simultaneously running solves observed so far.
    [[nodiscard]] std::size_t peak_running() const {
        std::lock_guard lock(mu_);
        return peak_running_;
    }

    [[nodiscard]] const JobManagerConfig& config() const { return cfg_; }

private:
    struct Job {
        JobSnapshot snapshot;
        ImageBuffer image;
        SelectionMask mask;
        std::optional<std::vector<std::uint8_t>> result;
    };

    std::string new_id() {
        static constexpr char hex[] = "0123456789abcdef";
        std::string id(16, '0');
        std::uint64_t v = rng_();
        for (auto& ch : id) {
            ch = hex[v & 0xF];
            v >>= 4;
        }
        return id;
    }

    // Callers hold mu_.
    void touch(const std::string& id) {
        lru_.remove(id);
        lru_.push_front(id);
    }

    void retire(const std::string& id) {
        touch(id);
        while (lru_.size() > cfg_.result_capacity) {
            jobs_.erase(lru_.back());
            lru_.pop_back();
        }
    }

    void work() {
        for (;;) {
            std::shared_ptr<Job> job;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
                if (stopping_) return;
                job = queue_.front();
                queue_.pop_front();
                job->snapshot.status = JobStatus::running;
                ++running_;
                peak_running_ = std::max(peak_running_, running_);
            }

            SolveOptions opts;
            opts.threads = cfg_.threads_per_job;
            opts.on_iteration = [&](const IterationRecord& r, std::size_t total) {
                std::lock_guard lock(mu_);
                // Reaches 1 only when the result is stored.
                const double p = static_cast<double>(r.index + 1) / static_cast<double>(total);
                if (p < 1.0) job->snapshot.progress = std::max(job->snapshot.progress, p);
            };

            std::optional<std::vector<std::uint8_t>> png;
            std::string error;
            try {
                png = cli::restore_to_png(job->image, job->mask, job->snapshot.params, opts);
            } catch (const std::exception& e) {
                error = e.what();
            }

            {
                std::lock_guard lock(mu_);
                --running_;
                job->snapshot.completed = std::chrono::system_clock::now();
                if (png) {
                    job->result = std::move(png);
                    job->snapshot.progress = 1.0;
                    job->snapshot.status = JobStatus::done;
                } else {
                    job->snapshot.error = error;
                    job->snapshot.status = JobStatus::failed;
                }
                // Inputs are no longer needed.
                job->image = ImageBuffer();
                job->mask = SelectionMask();
                retire(job->snapshot.id);
            }
            done_cv_.notify_all();
        }
    }

    JobManagerConfig cfg_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::deque<std::shared_ptr<Job>> queue_;
    std::list<std::string> lru_;
    std::size_t running_ = 0;
    std::size_t peak_running_ = 0;
    bool stopping_ = false;
    std::mt19937_64 rng_;
    std::vector<std::thread> pool_;
};

struct ServiceConfig {
    JobManagerConfig jobs;
    std::size_t max_upload_bytes = 64u << 20;
    std::string cors_origin = "*";
};

/// HTTP binding of a JobManager.
class Service {
public:
    explicit Service(ServiceConfig cfg = {}) : cfg_(std::move(cfg)), jobs_(cfg_.jobs) { routes(); }

    httplib::Server& http() { return server_; }
    JobManager& jobs() { return jobs_; }

    bool listen(const std::string& host, int port) { return server_.listen(host, port); }

    /// Binds an ephemeral port and returns it (-1 on failure); call listen_after_bind() next.
    int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void wait_until_ready() { server_.wait_until_ready(); }
    void stop() { server_.stop(); }

private:
    static void send_error(httplib::Response& res, int status, const std::string& reason, const std::string& message) {
        res.status = status;
        res.set_content(nlohmann::json{{"error", message}, {"reason", reason}}.dump(), "application/json");
    }

    void routes() {
        server_.set_payload_max_length(cfg_.max_upload_bytes);
        server_.set_default_headers({
            {"Access-Control-Allow-Origin", cfg_.cors_origin},
            {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
            {"Access-Control-Allow-Headers", "Content-Type"},
        });
        server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                const char* reason = res.status == 413 ? "too_large" : res.status == 404 ? "not_found" : "http";
                res.set_content(nlohmann::json{{"error", httplib::status_message(res.status)}, {"reason", reason}}.dump(),
                                "application/json");
            }
        });

        server_.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            const auto c = jobs_.counts();
            res.set_content(nlohmann::json{{"status", "ok"},
                                           {"workers", jobs_.config().workers},
                                           {"queued", c.queued},
                                           {"running", c.running},
                                           {"finished", c.finished}}
                                .dump(),
                            "application/json");
        });

        server_.Post("/jobs", [this](const httplib::Request& req, httplib::Response& res) { create_job(req, res); });

        server_.Get(R"(/jobs/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto snap = jobs_.get(req.matches[1]);
            if (!snap) return send_error(res, 404, "not_found", "unknown job");
            res.set_content(to_json(*snap).dump(), "application/json");
        });

        server_.Get(R"(/jobs/([0-9a-f]+)/result)", [this](const httplib::Request& req, httplib::Response& res) {
            std::vector<std::uint8_t> png;
            switch (jobs_.result(req.matches[1], png)) {
                case JobManager::Fetch::not_found: return send_error(res, 404, "not_found", "unknown job");
                case JobManager::Fetch::not_ready: return send_error(res, 409, "not_done", "job has no result");
                case JobManager::Fetch::ok: break;
            }
            res.set_content(std::string(png.begin(), png.end()), "image/png");
        });
    }

    void create_job(const httplib::Request& req, httplib::Response& res) {
        if (!req.is_multipart_form_data()) return send_error(res, 400, "not_multipart", "expected multipart/form-data");
        if (!req.has_file("image")) return send_error(res, 400, "missing_image", "missing 'image' part");

        const auto bytes = [](const std::string& s) {
            return std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
        };

        ImageBuffer image;
        try {
            image = decode_image(bytes(req.get_file_value("image").content));
            require_stencil_size(image.shape(), "image");
        } catch (const Error& e) {
            return send_error(res, 400, "image_decode", e.what());
        }

        SelectionMask mask;
        const MaskDims dims{image.height(), image.width()};
        if (req.has_file("mask") && !req.get_file_value("mask").content.empty()) {
            ImageBuffer mask_img;
            try {
                mask_img = decode_image(bytes(req.get_file_value("mask").content));
            } catch (const Error& e) {
                return send_error(res, 400, "mask_decode", e.what());
            }
            try {
                mask = fit_mask(mask_from_image(mask_img), dims, ResizePolicy::strict);
            } catch (const Error& e) {
                return send_error(res, 400, "mask_dims", e.what());
            }
        } else {
            mask = default_mask(dims);
        }

        SolverParams params;
        if (req.has_file("params") && !req.get_file_value("params").content.empty()) {
            try {
                params = params_from_json(nlohmann::json::parse(req.get_file_value("params").content));
            } catch (const nlohmann::json::exception& e) {
                return send_error(res, 400, "params", std::string("invalid params JSON: ") + e.what());
            } catch (const Error& e) {
                return send_error(res, 400, "params", e.what());
            }
        }

        const std::string id = jobs_.submit(std::move(image), std::move(mask), params);
        res.status = 202;
        res.set_header("Location", "/jobs/" + id);
        res.set_content(nlohmann::json{{"id", id}, {"status", "queued"}}.dump(), "application/json");
    }

    ServiceConfig cfg_;
    JobManager jobs_;
    httplib::Server server_;
};

} // namespace reflect::service
