#include "microtune/exec_evaluator.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "microtune/errors.hpp"
#include "microtune/process.hpp"
#include "microtune/trace.hpp"

namespace microtune {

using nlohmann::json;
namespace fs = std::filesystem;
using SteadyClock = std::chrono::steady_clock;

namespace {

constexpr std::string_view kRuntimeFlags = "{runtime_flags}";
constexpr std::string_view kContainerFlags = "{container_flags}";
constexpr std::string_view kTraceSource = "{trace_source}";
constexpr std::string_view kRequests = "{requests}";

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty())
            out += ' ';
        out += p;
    }
    return out;
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

std::vector<std::string> string_list(const json& j, const char* field) {
    if (!j.contains(field) || j[field].is_null())
        return {};
    if (!j[field].is_array())
        throw SpecError(std::string("target: '") + field + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : j[field])
        out.push_back(e.get<std::string>());
    return out;
}

void resolve_program(std::vector<std::string>& argv, const fs::path& base_dir) {
    if (argv.empty())
        return;
    fs::path program(argv[0]);
    if (argv[0].find('/') != std::string::npos && program.is_relative())
        argv[0] = (base_dir / program).lexically_normal().string();
}

std::chrono::nanoseconds seconds(double s) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::duration<double>(s));
}

void require_resolvable(const std::vector<std::string>& argv, const char* what) {
    if (argv.empty())
        return;
    if (!resolve_executable(argv[0]))
        throw ConfigurationError(std::string(what) + " command '" + argv[0] +
                                 "' cannot be resolved to an executable");
}

}  // namespace

TargetSpec parse_target(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object())
        throw SpecError("target must be a JSON object");
    TargetSpec t;
    try {
        t.launch_command = string_list(doc, "launch_command");
        t.workload_command = string_list(doc, "workload_command");
        t.teardown_command = string_list(doc, "teardown_command");
        if (doc.contains("environment")) {
            for (const auto& [k, v] : doc["environment"].items())
                t.environment[k] = v.get<std::string>();
        }
        if (doc.contains("readiness")) {
            const auto& r = doc["readiness"];
            t.readiness.probe_command = string_list(r, "probe_command");
            t.readiness.delay_s = r.value("delay_s", 0.0);
            t.readiness.timeout_s = r.value("timeout_s", t.readiness.timeout_s);
            t.readiness.interval_s = r.value("interval_s", t.readiness.interval_s);
        }
        t.trace_source = doc.at("trace_source").get<std::string>();
        t.log_file = doc.value("log_file", "");
        t.teardown_timeout_s = doc.value("teardown_timeout_s", t.teardown_timeout_s);
    } catch (const json::exception& e) {
        throw SpecError(std::string("malformed target: ") + e.what());
    }
    if (t.launch_command.empty())
        throw SpecError("target: launch_command must be non-empty");
    if (t.workload_command.empty())
        throw SpecError("target: workload_command must be non-empty");
    if (t.readiness.delay_s < 0.0)
        throw SpecError("target: readiness delay must be >= 0");
    if (!(t.readiness.timeout_s > 0.0) || !(t.readiness.interval_s > 0.0))
        throw SpecError("target: readiness timeout and interval must be positive");
    if (t.trace_source.empty())
        throw SpecError("target: trace_source must be set");

    resolve_program(t.launch_command, base_dir);
    resolve_program(t.workload_command, base_dir);
    resolve_program(t.teardown_command, base_dir);
    resolve_program(t.readiness.probe_command, base_dir);
    if (fs::path(t.trace_source).is_relative())
        t.trace_source = (base_dir / t.trace_source).lexically_normal().string();
    if (!t.log_file.empty() && fs::path(t.log_file).is_relative())
        t.log_file = (base_dir / t.log_file).lexically_normal().string();
    return t;
}

json target_to_json(const TargetSpec& t) {
    json readiness{{"probe_command", t.readiness.probe_command},
                   {"delay_s", t.readiness.delay_s},
                   {"timeout_s", t.readiness.timeout_s},
                   {"interval_s", t.readiness.interval_s}};
    return {{"launch_command", t.launch_command},
            {"environment", t.environment},
            {"workload_command", t.workload_command},
            {"readiness", std::move(readiness)},
            {"trace_source", t.trace_source},
            {"teardown_command", t.teardown_command},
            {"log_file", t.log_file},
            {"teardown_timeout_s", t.teardown_timeout_s}};
}

std::vector<std::string> expand_command(const std::vector<std::string>& command,
                                        const RenderedConfig& rendered,
                                        const std::string& trace_source, std::size_t requests) {
    std::vector<std::string> out;
    for (const auto& arg : command) {
        if (arg == kRuntimeFlags) {
            out.insert(out.end(), rendered.runtime_flags.begin(), rendered.runtime_flags.end());
            continue;
        }
        if (arg == kContainerFlags) {
            out.insert(out.end(), rendered.container_flags.begin(), rendered.container_flags.end());
            continue;
        }
        std::string a = arg;
        replace_all(a, kRuntimeFlags, join(rendered.runtime_flags));
        replace_all(a, kContainerFlags, join(rendered.container_flags));
        replace_all(a, kTraceSource, trace_source);
        replace_all(a, kRequests, std::to_string(requests));
        out.push_back(std::move(a));
    }
    return out;
}

Evaluation run_external(const SearchSpace& space, const Configuration& config,
                        const TargetSpec& target, const MeasurementProtocol& protocol) {
    if (target.launch_command.empty() || target.workload_command.empty())
        throw ConfigurationError("target needs launch and workload commands");
    require_resolvable(target.launch_command, "launch");
    require_resolvable(target.workload_command, "workload");
    require_resolvable(target.readiness.probe_command, "readiness probe");
    require_resolvable(target.teardown_command, "teardown");

    const RenderedConfig rendered = space.render(config);
    auto expand = [&](const std::vector<std::string>& cmd) {
        return expand_command(cmd, rendered, target.trace_source, protocol.requests);
    };

    ChildProcess::Environment env = inherited_environment();
    for (const auto& [k, v] : target.environment)
        env[k] = v;
    for (const auto& [k, v] : rendered.environment)
        env[k] = v;
    env["MICROTUNE_TRACE_SOURCE"] = target.trace_source;
    env["MICROTUNE_REQUESTS"] = std::to_string(protocol.requests);

    std::error_code ec;
    fs::remove(target.trace_source, ec);

    const auto started = SteadyClock::now();
    const auto deadline = started + seconds(protocol.timeout_s);
    auto elapsed = [&] {
        return std::chrono::duration<double>(SteadyClock::now() - started).count();
    };

    std::optional<ChildProcess> service = ChildProcess::spawn(expand(target.launch_command), env,
                                                              target.log_file);
    bool torn_down = false;
    auto teardown = [&] {
        if (torn_down)
            return;
        torn_down = true;
        if (!target.teardown_command.empty()) {
            const auto limit = SteadyClock::now() + seconds(target.teardown_timeout_s);
            auto code = run_to_completion(expand(target.teardown_command), env, limit,
                                          target.log_file);
            if (!code || *code != 0)
                spdlog::warn("teardown command did not exit cleanly");
        }
        if (service)
            service->terminate();
    };

    auto measure = [&]() -> Evaluation {
        auto launch_failed = [&] {
            if (!service)
                return true;
            auto code = service->exit_code();
            return code && *code != 0;
        };
        if (launch_failed())
            return Evaluation::incomplete(incomplete::kLaunchFailed, std::nullopt, 0, elapsed());

        // Readiness
        if (target.readiness.probe_command.empty()) {
            const auto ready_at = SteadyClock::now() + seconds(target.readiness.delay_s);
            if (ready_at > deadline)
                return Evaluation::incomplete(incomplete::kReadinessTimeout, std::nullopt, 0,
                                              elapsed());
            while (SteadyClock::now() < ready_at) {
                if (launch_failed())
                    return Evaluation::incomplete(incomplete::kLaunchFailed, std::nullopt, 0,
                                                  elapsed());
                std::this_thread::sleep_for(std::min<SteadyClock::duration>(
                    std::chrono::milliseconds(10), ready_at - SteadyClock::now()));
            }
            if (launch_failed())
                return Evaluation::incomplete(incomplete::kLaunchFailed, std::nullopt, 0,
                                              elapsed());
        } else {
            const auto ready_limit =
                std::min(deadline, SteadyClock::now() + seconds(target.readiness.timeout_s));
            for (;;) {
                if (launch_failed())
                    return Evaluation::incomplete(incomplete::kLaunchFailed, std::nullopt, 0,
                                                  elapsed());
                auto code = run_to_completion(expand(target.readiness.probe_command), env,
                                              ready_limit, target.log_file);
                if (code && *code == 0)
                    break;
                if (SteadyClock::now() + seconds(target.readiness.interval_s) >= ready_limit)
                    return Evaluation::incomplete(incomplete::kReadinessTimeout, std::nullopt,
                                                  0, elapsed());
                std::this_thread::sleep_for(seconds(target.readiness.interval_s));
            }
        }

        if (launch_failed())
            return Evaluation::incomplete(incomplete::kLaunchFailed, std::nullopt, 0, elapsed());

        // Workload
        auto workload = ChildProcess::spawn(expand(target.workload_command), env, target.log_file);
        if (!workload)
            return Evaluation::incomplete(incomplete::kWorkloadFailed, std::nullopt, 0, elapsed());
        auto code = workload->wait_until(deadline);
        if (!code) {
            workload->terminate(std::chrono::milliseconds(200));
            return Evaluation::incomplete(incomplete::kTimeout, std::nullopt, 0, elapsed());
        }
        if (*code != 0)
            return Evaluation::incomplete(incomplete::kWorkloadFailed, std::nullopt, 0, elapsed());

        // Traces
        std::ifstream in(target.trace_source);
        if (!in)
            return Evaluation::incomplete(incomplete::kTracesMissing, std::nullopt, 0, elapsed());
        auto read = read_traces(in);
        if (read.rejected > 0)
            spdlog::warn("{} malformed trace line(s) in {}", read.rejected, target.trace_source);
        const std::size_t usable = std::min(read.traces.size(), protocol.requests);
        std::vector<LatencySample> samples;
        samples.reserve(usable);
        for (std::size_t i = 0; i < usable; ++i)
            samples.push_back(to_sample(read.traces[i], static_cast<std::int64_t>(i)));
        std::optional<TrialStats> stats;
        if (samples.size() > protocol.warmup)
            stats = aggregate_samples(samples, protocol);
        if (read.traces.size() < protocol.requests)
            return Evaluation::incomplete(incomplete::kTracesMissing, stats, samples.size(),
                                          elapsed());
        if (SteadyClock::now() > deadline)
            return Evaluation::incomplete(incomplete::kTimeout, stats, samples.size(), elapsed());
        return Evaluation::completed(*stats, samples.size(), elapsed());
    };

    Evaluation result;
    try {
        result = measure();
    } catch (...) {
        teardown();
        throw;
    }
    teardown();
    result.elapsed_s = elapsed();
    return result;
}

Evaluation ExecEvaluator::evaluate(const Configuration& config, std::uint64_t) {
    return run_external(*space_, config, target_, protocol_);
}

}  // namespace microtune
