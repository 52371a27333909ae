#include "microtune/server.hpp"

#include <algorithm>
#include <charconv>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "microtune/errors.hpp"
#include "microtune/report.hpp"
#include "microtune/search_space.hpp"

namespace microtune {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunManager::Run {
    std::string run_id;
    RunSpec spec;
    fs::path log_path;

    mutable std::mutex mu;
    mutable std::condition_variable cv;
    RunStatus status = RunStatus::Pending;
    std::optional<Trial> baseline;
    std::vector<Trial> trials;  // candidates
    std::string stop_cause;

    std::jthread worker;  // last: joins before the fields above go away

    bool active() const {
        return status == RunStatus::Pending || status == RunStatus::Running;
    }
};

RunManager::RunManager(ServerOptions options) : options_(std::move(options)) {}

RunManager::~RunManager() {
    std::vector<std::shared_ptr<Run>> runs;
    {
        std::lock_guard lock(mu_);
        for (auto& [id, r] : runs_)
            runs.push_back(r);
    }
    for (auto& r : runs) {
        r->worker.request_stop();
        if (r->worker.joinable())
            r->worker.join();
    }
}

fs::path RunManager::log_path(const std::string& run_id) const {
    return options_.data_dir / "runs" / (run_id + ".jsonl");
}

std::shared_ptr<RunManager::Run> RunManager::find(const std::string& run_id) const {
    std::lock_guard lock(mu_);
    auto it = runs_.find(run_id);
    if (it == runs_.end())
        throw ApiError(404, "not_found", "unknown run '" + run_id + "'");
    return it->second;
}

json RunManager::handle_json(const Run& run) {
    json incumbent = nullptr;
    if (const Trial* best = best_trial(run.trials)) {
        incumbent = {{"trial_id", best->trial_id},
                     {"config_index", best->config_index},
                     {"configuration", configuration_to_json(best->configuration)},
                     {"mean_s", best->stats->mean}};
        if (run.baseline && run.baseline->complete && run.baseline->stats)
            incumbent["improvement_percent"] =
                improvement_percent(run.baseline->stats->mean, best->stats->mean);
    }
    json h{{"run_id", run.run_id},
           {"status", to_string(run.status)},
           {"strategy", to_string(run.spec.plan.strategy.kind)},
           {"progress", {{"trials_done", run.trials.size()}, {"budget", run.spec.plan.budget}}},
           {"baseline_mean_s", run.baseline && run.baseline->stats
                                   ? json(run.baseline->stats->mean)
                                   : json(nullptr)},
           {"incumbent", std::move(incumbent)}};
    if (!run.stop_cause.empty())
        h["stop_cause"] = run.stop_cause;
    return h;
}

json RunManager::create_run(const json& spec_document) {
    RunSpec spec;
    try {
        spec = parse_run_spec(spec_document, options_.data_dir);
    } catch (const std::exception& e) {
        throw ApiError(400, "invalid_spec", e.what());
    }

    std::lock_guard lock(mu_);
    for (const auto& [id, r] : runs_) {
        std::lock_guard rl(r->mu);
        if (r->active())
            throw ApiError(409, "run_active", "run '" + id + "' is still running");
    }

    auto run = std::make_shared<Run>();
    do {
        run->run_id = generate_run_id();
    } while (runs_.count(run->run_id));
    run->spec = std::move(spec);
    run->log_path = log_path(run->run_id);
    run->status = RunStatus::Running;

    Run* raw = run.get();
    const bool sync = options_.sync_log;
    run->worker = std::jthread([raw, sync](std::stop_token stop) {
        auto observer = [raw](const Trial& t) {
            std::lock_guard lock(raw->mu);
            if (t.baseline)
                raw->baseline = t;
            else
                raw->trials.push_back(t);
            raw->cv.notify_all();
        };
        RunState state;
        try {
            state = run_with_log(raw->spec, raw->run_id, raw->log_path, observer, stop, sync);
        } catch (const std::exception& e) {
            state.status = RunStatus::Stopped;
            state.stop_cause = e.what();
        }
        spdlog::info("run {} ended: {}", raw->run_id, to_string(state.status));
        std::lock_guard lock(raw->mu);
        raw->status = state.status;
        raw->stop_cause = state.stop_cause;
        raw->cv.notify_all();
    });

    json handle;
    {
        std::lock_guard rl(run->mu);
        handle = handle_json(*run);
    }
    runs_.emplace(run->run_id, std::move(run));
    spdlog::info("run {} started", handle["run_id"].get<std::string>());
    return handle;
}

json RunManager::get_run(const std::string& run_id) const {
    auto run = find(run_id);
    std::lock_guard lock(run->mu);
    json report = nullptr;
    if (run->baseline && run->baseline->complete) {
        ReportContext ctx{run->run_id, std::string(to_string(run->spec.plan.strategy.kind)),
                          run->spec.plan.space};
        report = report_to_json(build_report(ctx, run->trials, *run->baseline));
    }
    return {{"run", handle_json(*run)}, {"report", std::move(report)}};
}

json RunManager::list_trials(const std::string& run_id, std::optional<std::int64_t> since) const {
    auto run = find(run_id);
    std::lock_guard lock(run->mu);
    const std::int64_t after = since.value_or(-1);
    json page = json::array();
    std::int64_t cursor = after;
    auto consider = [&](const Trial& t) {
        if (static_cast<std::int64_t>(t.trial_id) > after) {
            page.push_back(trial_to_json(t));
            cursor = static_cast<std::int64_t>(t.trial_id);
        }
    };
    if (run->baseline)
        consider(*run->baseline);
    for (const auto& t : run->trials)
        consider(t);
    return {{"trials", std::move(page)}, {"cursor", cursor}};
}

json RunManager::stop_run(const std::string& run_id) {
    auto run = find(run_id);
    run->worker.request_stop();
    std::lock_guard lock(run->mu);
    return handle_json(*run);
}

json RunManager::list_spaces() const {
    json out = json::array();
    const fs::path dir = options_.data_dir / "spaces";
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        return out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
        if (e.is_regular_file() && e.path().extension() == ".json")
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        json entry{{"file", (fs::path("spaces") / f.filename()).string()}};
        try {
            auto space = load_space_file(f.string());
            entry["name"] = space.name();
            entry["cardinality"] = space.cardinality();
            entry["space"] = space.to_json();
        } catch (const std::exception& e) {
            entry["error"] = e.what();
        }
        out.push_back(std::move(entry));
    }
    return out;
}

bool RunManager::wait(const std::string& run_id, std::chrono::milliseconds timeout) const {
    auto run = find(run_id);
    std::unique_lock lock(run->mu);
    return run->cv.wait_for(lock, timeout, [&] { return !run->active(); });
}

std::pair<std::string, int> parse_listen_address(const std::string& text) {
    std::string host = "127.0.0.1";
    std::string port_text = text;
    if (auto colon = text.rfind(':'); colon != std::string::npos) {
        host = text.substr(0, colon);
        port_text = text.substr(colon + 1);
        if (host.empty())
            host = "0.0.0.0";
    }
    int port = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 ||
        port > 65535)
        throw Error("invalid listen address '" + text + "'");
    return {host, port};
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
    send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const ApiError& e) {
        send_error(res, e.status, e.code, e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

}  // namespace

ControlServer::ControlServer(ServerOptions options)
    : manager_(std::move(options)), http_(std::make_unique<httplib::Server>()) {
    install_routes();
}

ControlServer::~ControlServer() {
    stop();
}

void ControlServer::install_routes() {
    auto& srv = *http_;

    srv.Post("/api/runs", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            json doc;
            try {
                doc = json::parse(req.body);
            } catch (const json::parse_error& e) {
                throw ApiError(400, "invalid_json", e.what());
            }
            send_json(res, 201, manager_.create_run(doc));
        });
    });

    srv.Get(R"(/api/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, manager_.get_run(req.matches[1])); });
    });

    srv.Get(R"(/api/runs/([^/]+)/trials)",
            [this](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                    std::optional<std::int64_t> since;
                    if (req.has_param("since")) {
                        const auto text = req.get_param_value("since");
                        std::int64_t v = 0;
                        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
                        if (ec != std::errc{} || ptr != text.data() + text.size())
                            throw ApiError(400, "invalid_cursor", "since must be an integer");
                        since = v;
                    }
                    send_json(res, 200, manager_.list_trials(req.matches[1], since));
                });
            });

    srv.Post(R"(/api/runs/([^/]+)/stop)",
             [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] { send_json(res, 200, manager_.stop_run(req.matches[1])); });
             });

    srv.Get("/api/spaces", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, manager_.list_spaces()); });
    });
}

int ControlServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = http_->bind_to_any_port(host);
        if (bound < 0)
            throw Error("cannot bind " + host);
    } else if (!http_->bind_to_port(host, port)) {
        throw Error("cannot bind " + host + ":" + std::to_string(port));
    }
    thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    return bound;
}

void ControlServer::listen(const std::string& host, int port) {
    if (!http_->listen(host, port))
        throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void ControlServer::stop() {
    if (http_)
        http_->stop();
    if (thread_.joinable())
        thread_.join();
}

}  // namespace microtune
