#include "microtune/sim_evaluator.hpp"

#include <cmath>
#include <string>

#include "microtune/errors.hpp"

namespace microtune {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

double noise_unit(std::uint64_t seed, std::uint64_t config_index, std::uint64_t request_index,
                  std::uint64_t stage_index) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ config_index);
    h = splitmix64(h ^ request_index);
    h = splitmix64(h ^ stage_index);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

Scenario::Scenario(std::shared_ptr<const SearchSpace> space, std::vector<Stage> stages,
                   std::vector<std::vector<double>> multipliers, double noise_amplitude,
                   std::vector<FailureRule> failures)
    : space_(std::move(space)),
      stages_(std::move(stages)),
      multipliers_(std::move(multipliers)),
      noise_(noise_amplitude),
      failures_(std::move(failures)) {
    if (!space_)
        throw SpecError("scenario needs a search space");
    const auto& params = space_->parameters();
    if (stages_.empty())
        throw SpecError("scenario needs at least one stage");
    for (const auto& s : stages_) {
        if (!(s.base_s > 0.0) || !std::isfinite(s.base_s))
            throw SpecError("stage '" + s.service + "' base latency must be positive");
    }
    multipliers_.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
        const auto& table = multipliers_[p];
        if (table.empty())
            continue;
        if (table.size() != params[p].values.size())
            throw SpecError("effects for '" + params[p].name + "' must cover every value");
        for (double m : table) {
            if (!(m > 0.0) || !std::isfinite(m))
                throw SpecError("effect multipliers for '" + params[p].name + "' must be positive");
        }
    }
    if (!(noise_ >= 0.0 && noise_ < 1.0))
        throw SpecError("noise_amplitude must lie in [0, 1)");
    for (const auto& rule : failures_) {
        if (rule.when.empty())
            throw SpecError("failure rule '" + rule.reason + "' has no conditions");
        for (const auto& [p, v] : rule.when) {
            if (p >= params.size() || v >= params[p].values.size())
                throw SpecError("failure rule '" + rule.reason + "' references an unknown value");
        }
    }
}

Scenario Scenario::parse(const json& doc, std::shared_ptr<const SearchSpace> space) {
    if (!space)
        throw SpecError("scenario needs a search space");
    if (!doc.is_object())
        throw SpecError("scenario must be a JSON object");
    const auto& params = space->parameters();
    try {
        std::vector<Stage> stages;
        for (const auto& sj : doc.at("stages")) {
            if (!sj.is_array() || sj.size() != 2)
                throw SpecError("each stage must be [name, base_s]");
            stages.push_back({sj[0].get<std::string>(), sj[1].get<double>()});
        }

        std::vector<std::vector<double>> multipliers(params.size());
        const json effects = doc.value("effects", json::object());
        for (const auto& [pname, table] : effects.items()) {
            auto pos = space->position_of(pname);
            if (!pos)
                throw SpecError("effects name unknown parameter '" + pname + "'");
            const auto& p = params[*pos];
            auto& row = multipliers[*pos];
            row.assign(p.values.size(), 1.0);
            for (const auto& [key, mult] : table.items()) {
                ParamValue v;
                try {
                    v = value_from_key(p.kind, key);
                } catch (const SpaceError& e) {
                    throw SpecError("effects for '" + pname + "': " + e.what());
                }
                auto vpos = p.position_of(v);
                if (!vpos)
                    throw SpecError("effects for '" + pname + "': value '" + key +
                                    "' is not admissible");
                row[*vpos] = mult.get<double>();
            }
        }

        std::vector<FailureRule> failures;
        const json failure_docs = doc.value("failures", json::array());
        for (const auto& fj : failure_docs) {
            FailureRule rule;
            rule.reason = fj.at("reason").get<std::string>();
            for (const auto& [pname, vj] : fj.at("when").items()) {
                auto pos = space->position_of(pname);
                if (!pos)
                    throw SpecError("failure rule names unknown parameter '" + pname + "'");
                const auto& p = params[*pos];
                ParamValue v;
                try {
                    v = value_from_json(p.kind, vj);
                } catch (const SpaceError& e) {
                    throw SpecError("failure rule '" + rule.reason + "': " + e.what());
                }
                auto vpos = p.position_of(v);
                if (!vpos)
                    throw SpecError("failure rule '" + rule.reason + "': value for '" + pname +
                                    "' is not admissible");
                rule.when.emplace_back(*pos, *vpos);
            }
            failures.push_back(std::move(rule));
        }

        return Scenario(std::move(space), std::move(stages), std::move(multipliers),
                        doc.value("noise_amplitude", 0.0), std::move(failures));
    } catch (const json::exception& e) {
        throw SpecError(std::string("malformed scenario: ") + e.what());
    }
}

double Scenario::multiplier_product(const std::vector<std::size_t>& positions) const {
    double product = 1.0;
    for (std::size_t p = 0; p < multipliers_.size(); ++p) {
        if (!multipliers_[p].empty())
            product *= multipliers_[p][positions[p]];
    }
    return product;
}

const FailureRule* Scenario::matching_failure(const std::vector<std::size_t>& positions) const {
    for (const auto& rule : failures_) {
        bool all = true;
        for (const auto& [p, v] : rule.when)
            all = all && positions[p] == v;
        if (all)
            return &rule;
    }
    return nullptr;
}

json Scenario::to_json() const {
    const auto& params = space_->parameters();
    json stages = json::array();
    for (const auto& s : stages_)
        stages.push_back(json::array({s.service, s.base_s}));
    json effects = json::object();
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (multipliers_[p].empty())
            continue;
        json table = json::object();
        for (std::size_t v = 0; v < params[p].values.size(); ++v)
            table[value_text(params[p].kind, params[p].values[v])] = multipliers_[p][v];
        effects[params[p].name] = std::move(table);
    }
    json failures = json::array();
    for (const auto& rule : failures_) {
        json when = json::object();
        for (const auto& [p, v] : rule.when)
            when[params[p].name] = value_to_json(params[p].values[v]);
        failures.push_back({{"when", std::move(when)}, {"reason", rule.reason}});
    }
    return {{"stages", std::move(stages)},
            {"effects", std::move(effects)},
            {"noise_amplitude", noise_},
            {"failures", std::move(failures)}};
}

std::vector<double> closed_form_stage_latencies(const Scenario& scenario,
                                                const Configuration& config) {
    const auto positions = scenario.space().value_positions(config);
    if (const auto* rule = scenario.matching_failure(positions))
        throw SimulatedFailure(rule->reason);
    const double product = scenario.multiplier_product(positions);
    std::vector<double> out;
    out.reserve(scenario.stages().size());
    for (const auto& s : scenario.stages())
        out.push_back(s.base_s * product);
    return out;
}

double closed_form_latency(const Scenario& scenario, const Configuration& config) {
    double total = 0.0;
    for (double d : closed_form_stage_latencies(scenario, config))
        total += d;
    return total;
}

Trace simulate_request(const Scenario& scenario, const Configuration& config,
                       std::uint64_t request_index, std::uint64_t seed) {
    auto durations = closed_form_stage_latencies(scenario, config);
    const double eta = scenario.noise_amplitude();
    if (eta > 0.0) {
        const auto config_index = scenario.space().index_of(config);
        for (std::size_t s = 0; s < durations.size(); ++s) {
            const double e = eta * (2.0 * noise_unit(seed, config_index, request_index, s) - 1.0);
            durations[s] *= 1.0 + e;
        }
    }

    Trace trace;
    trace.trace_id = "req-" + std::to_string(request_index);
    trace.spans.reserve(durations.size() + 1);
    trace.spans.push_back({"root", std::nullopt, "chain", 0.0, 0.0});
    double cursor = 0.0;
    for (std::size_t s = 0; s < durations.size(); ++s) {
        trace.spans.push_back({"stage-" + std::to_string(s), std::string("root"),
                               scenario.stages()[s].service, cursor, durations[s]});
        cursor += durations[s];
    }
    trace.spans.front().duration_s = cursor;
    return trace;
}

Evaluation evaluate_sim(const Scenario& scenario, const Configuration& config,
                        const MeasurementProtocol& protocol, std::uint64_t seed) {
    std::vector<LatencySample> samples;
    samples.reserve(protocol.requests);
    double simulated = 0.0;
    std::string failure;
    for (std::size_t i = 0; i < protocol.requests; ++i) {
        try {
            auto trace = simulate_request(scenario, config, i, seed);
            samples.push_back(to_sample(trace, static_cast<std::int64_t>(i)));
            simulated += samples.back().end_to_end;
        } catch (const SimulatedFailure& f) {
            failure = f.reason();
            break;
        }
    }

    std::optional<TrialStats> stats;
    if (samples.size() > protocol.warmup)
        stats = aggregate_samples(samples, protocol);
    if (!failure.empty())
        return Evaluation::incomplete(failure, stats, samples.size(), simulated);
    if (simulated > protocol.timeout_s)
        return Evaluation::incomplete(incomplete::kTimeout, stats, samples.size(), simulated);
    return Evaluation::completed(*stats, samples.size(), simulated);
}

Evaluation SimEvaluator::evaluate(const Configuration& config, std::uint64_t) {
    return evaluate_sim(*scenario_, config, protocol_, seed_);
}

}  // namespace microtune
