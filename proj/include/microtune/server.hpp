#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "microtune/engine.hpp"
#include "microtune/run_spec.hpp"
#include "microtune/trial.hpp"

namespace httplib {
class Server;
}

namespace microtune {

/// Maps onto an HTTP status and an `{error: {code, message}}` body.
struct ApiError : std::runtime_error {
    ApiError(int status, std::string code, const std::string& message)
        : std::runtime_error(message), status(status), code(std::move(code)) {}
    int status;
    std::string code;
};

struct ServerOptions {
    std::filesystem::path data_dir = ".";
    bool sync_log = true;
};

/// Owns every run of one server lifetime. At most one run is Running; its
/// worker thread is the only trial-log writer. All methods are thread-safe.
class RunManager {
public:
    explicit RunManager(ServerOptions options);
    ~RunManager();
    RunManager(const RunManager&) = delete;
    RunManager& operator=(const RunManager&) = delete;

    /// POST /api/runs. 400 on an invalid spec, 409 while another run is Running.
    nlohmann::json create_run(const nlohmann::json& spec_document);
    /// GET /api/runs/{id}: {run: handle, report: report-so-far or null}.
    nlohmann::json get_run(const std::string& run_id) const;
    /// GET /api/runs/{id}/trials?since=N: trials with trial_id > since.
    /// Omitting `since` lists everything, the baseline (trial 0) included.
    nlohmann::json list_trials(const std::string& run_id, std::optional<std::int64_t> since) const;
    /// POST /api/runs/{id}/stop. Idempotent.
    nlohmann::json stop_run(const std::string& run_id);
    /// GET /api/spaces: space files under <data_dir>/spaces.
    nlohmann::json list_spaces() const;

    /// Blocks until the run leaves Pending/Running or the timeout passes.
    bool wait(const std::string& run_id, std::chrono::milliseconds timeout) const;
    std::filesystem::path log_path(const std::string& run_id) const;

private:
    struct Run;
    std::shared_ptr<Run> find(const std::string& run_id) const;
    static nlohmann::json handle_json(const Run& run);

    ServerOptions options_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Run>> runs_;
};

/// HTTP/JSON front end over a RunManager.
class ControlServer {
public:
    explicit ControlServer(ServerOptions options);
    ~ControlServer();

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Returns the bound port; throws Error when binding fails.
    int start(const std::string& host, int port);
    /// Blocks in the calling thread.
    void listen(const std::string& host, int port);
    void stop();

    RunManager& runs() noexcept { return manager_; }

private:
    void install_routes();

    RunManager manager_;
    std::unique_ptr<httplib::Server> http_;
    std::thread thread_;
};

/// "host:port" → (host, port); bare port allowed. Throws Error.
std::pair<std::string, int> parse_listen_address(const std::string& text);

}  // namespace microtune
