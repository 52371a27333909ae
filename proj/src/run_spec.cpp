#include "microtune/run_spec.hpp"

#include <cctype>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "microtune/errors.hpp"
#include "microtune/trial_log.hpp"

namespace microtune {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const fs::path& path, const char* what) {
    std::ifstream in(path);
    if (!in)
        throw SpecError(fmt::format("cannot open {} file '{}'", what, path.string()));
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SpecError(fmt::format("malformed {} file '{}': {}", what, path.string(), e.what()));
    }
}

/// Inline object, or a path relative to base_dir. Returns the document and the
/// directory further relative paths resolve against.
std::pair<json, fs::path> inline_or_file(const json& j, const fs::path& base_dir,
                                         const char* what) {
    if (j.is_object())
        return {j, base_dir};
    if (j.is_string()) {
        fs::path p = j.get<std::string>();
        if (p.is_relative())
            p = base_dir / p;
        return {read_json_file(p, what), p.parent_path()};
    }
    throw SpecError(fmt::format("'{}' must be an object or a file path", what));
}

}  // namespace

RunSpec parse_run_spec(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object())
        throw SpecError("run spec must be a JSON object");
    RunSpec spec;
    try {
        if (!doc.contains("space"))
            throw SpecError("run spec needs 'space'");
        auto [space_doc, space_dir] = inline_or_file(doc["space"], base_dir, "space");
        (void)space_dir;
        SearchSpace space = parse_space(space_doc);
        if (doc.contains("enabled")) {
            const auto names = doc["enabled"].get<std::vector<std::string>>();
            space = space.with_enabled(names);
        }
        auto shared_space = std::make_shared<const SearchSpace>(std::move(space));
        spec.plan.space = shared_space;

        const json strategy = doc.value("strategy", json{{"type", "grid"}});
        const auto type = strategy.value("type", "grid");
        if (type == "grid")
            spec.plan.strategy.kind = StrategyKind::Grid;
        else if (type == "random")
            spec.plan.strategy.kind = StrategyKind::Random;
        else
            throw SpecError("unknown strategy type '" + type + "'");
        spec.plan.strategy.seed = strategy.value("seed", std::uint64_t{0});
        std::optional<std::uint64_t> budget;
        if (strategy.contains("budget") && !strategy["budget"].is_null())
            budget = strategy["budget"].get<std::uint64_t>();
        spec.plan.budget = resolve_budget(*shared_space, spec.plan.strategy, budget);

        spec.protocol = protocol_from_json(doc.value("protocol", json(nullptr)));

        Configuration baseline = shared_space->defaults();
        if (doc.contains("baseline") && !doc["baseline"].is_null()) {
            json merged = configuration_to_json(baseline);
            for (const auto& [k, v] : doc["baseline"].items())
                merged[k] = v;
            baseline = shared_space->configuration_from_json(merged);
        }
        spec.plan.baseline = baseline;

        if (!doc.contains("evaluator") || !doc["evaluator"].is_object())
            throw SpecError("run spec needs an 'evaluator' object");
        const json& ev = doc["evaluator"];
        const auto ev_type = ev.value("type", "");
        json ev_snapshot;
        if (ev_type == "sim") {
            if (!ev.contains("scenario"))
                throw SpecError("sim evaluator needs 'scenario'");
            auto [scenario_doc, scenario_dir] = inline_or_file(ev["scenario"], base_dir, "scenario");
            (void)scenario_dir;
            SimEvaluatorConfig sim;
            sim.scenario = std::make_shared<const Scenario>(Scenario::parse(scenario_doc, shared_space));
            sim.seed = ev.value("seed", std::uint64_t{0});
            ev_snapshot = {{"type", "sim"}, {"scenario", sim.scenario->to_json()}, {"seed", sim.seed}};
            spec.evaluator = std::move(sim);
        } else if (ev_type == "external") {
            if (!ev.contains("target"))
                throw SpecError("external evaluator needs 'target'");
            auto [target_doc, target_dir] = inline_or_file(ev["target"], base_dir, "target");
            ExternalEvaluatorConfig ext{parse_target(target_doc, target_dir)};
            ev_snapshot = {{"type", "external"}, {"target", target_to_json(ext.target)}};
            spec.evaluator = std::move(ext);
        } else {
            throw SpecError("unknown evaluator type '" + ev_type + "'");
        }

        json strategy_snapshot{{"type", type}, {"budget", spec.plan.budget}};
        if (spec.plan.strategy.kind == StrategyKind::Random)
            strategy_snapshot["seed"] = spec.plan.strategy.seed;
        spec.snapshot = {{"space", shared_space->to_json()},
                         {"strategy", std::move(strategy_snapshot)},
                         {"protocol", protocol_to_json(spec.protocol)},
                         {"evaluator", std::move(ev_snapshot)},
                         {"baseline", configuration_to_json(spec.plan.baseline)}};
    } catch (const json::exception& e) {
        throw SpecError(std::string("malformed run spec: ") + e.what());
    }
    return spec;
}

RunSpec load_run_spec(const fs::path& file) {
    return parse_run_spec(read_json_file(file, "run spec"), file.parent_path());
}

std::unique_ptr<Evaluator> make_evaluator(const RunSpec& spec) {
    if (const auto* sim = std::get_if<SimEvaluatorConfig>(&spec.evaluator))
        return std::make_unique<SimEvaluator>(sim->scenario, spec.protocol, sim->seed);
    const auto& ext = std::get<ExternalEvaluatorConfig>(spec.evaluator);
    return std::make_unique<ExecEvaluator>(spec.plan.space, ext.target, spec.protocol);
}

RunState run_with_log(const RunSpec& spec, const std::string& run_id, const fs::path& log_path,
                      const TrialSink& observer, std::stop_token stop, bool sync) {
    TrialLogWriter writer(log_path, LogHeader{run_id, spec.snapshot, now_timestamp()}, sync);
    auto evaluator = make_evaluator(spec);

    std::vector<Trial> seen;
    auto sink = [&](const Trial& t) {
        writer.append(t);
        seen.push_back(t);
        if (observer)
            observer(t);
    };

    RunState state;
    try {
        state = execute_run(spec.plan, *evaluator, run_id, sink, stop);
    } catch (const std::exception& e) {
        // Rebuild what we know so the log and caller still see every trial.
        state = RunState{};
        state.run_id = run_id;
        state.budget = spec.plan.budget;
        state.status = RunStatus::Stopped;
        state.stop_cause = e.what();
        for (auto& t : seen) {
            if (t.baseline) {
                state.baseline = t;
                continue;
            }
            state.trials.push_back(t);
        }
        if (const Trial* best = best_trial(state.trials))
            state.incumbent = static_cast<std::size_t>(best - state.trials.data());
    }
    try {
        writer.finish(LogFooter{state.status, now_timestamp(), state.stop_cause});
    } catch (const LogError& e) {
        if (state.stop_cause.empty())
            state.stop_cause = e.what();
    }
    return state;
}

std::string generate_run_id() {
    static std::mt19937_64 rng{std::random_device{}()};
    static std::mutex mu;
    std::uint64_t suffix;
    {
        std::lock_guard lock(mu);
        suffix = rng();
    }
    auto ts = format_timestamp(now_timestamp());
    std::string compact;
    for (char c : ts) {
        if (std::isdigit(static_cast<unsigned char>(c)))
            compact += c;
    }
    return fmt::format("run-{}-{:06x}", compact.substr(0, 14), suffix & 0xffffff);
}

}  // namespace microtune
