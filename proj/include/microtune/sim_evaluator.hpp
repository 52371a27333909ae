#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "microtune/evaluator.hpp"
#include "microtune/measurement.hpp"
#include "microtune/search_space.hpp"
#include "microtune/trace.hpp"
#include "microtune/trial.hpp"

namespace microtune {

struct Stage {
    std::string service;
    double base_s = 0.0;
};

/// Conjunction of (parameter = value) terms, stored as value positions.
struct FailureRule {
    std::vector<std::pair<std::size_t, std::size_t>> when;  // (parameter, value) positions
    std::string reason;
};

/// Deterministic simulated service chain bound to one search space.
///
/// Stage latency is `base_s * product of effect multipliers over all parameters`
/// (absent multipliers count as 1); the request latency is the sum over stages.
/// Noise is multiplicative: each stage duration is scaled by (1 + e) with e
/// uniform in [-noise, +noise], derived from (seed, config index, request, stage)
/// through a SplitMix64 hash chain, see noise_unit().
class Scenario {
public:
    /// `multipliers[p]` is empty (no effect) or has one entry per value of parameter p.
    Scenario(std::shared_ptr<const SearchSpace> space, std::vector<Stage> stages,
             std::vector<std::vector<double>> multipliers, double noise_amplitude,
             std::vector<FailureRule> failures);

    /// Parses the scenario JSON document against `space`. Throws SpecError.
    static Scenario parse(const nlohmann::json& document, std::shared_ptr<const SearchSpace> space);

    const SearchSpace& space() const noexcept { return *space_; }
    std::shared_ptr<const SearchSpace> space_ptr() const noexcept { return space_; }
    const std::vector<Stage>& stages() const noexcept { return stages_; }
    const std::vector<std::vector<double>>& multipliers() const noexcept { return multipliers_; }
    double noise_amplitude() const noexcept { return noise_; }
    const std::vector<FailureRule>& failures() const noexcept { return failures_; }

    double multiplier_product(const std::vector<std::size_t>& positions) const;
    const FailureRule* matching_failure(const std::vector<std::size_t>& positions) const;

    nlohmann::json to_json() const;

private:
    std::shared_ptr<const SearchSpace> space_;
    std::vector<Stage> stages_;
    std::vector<std::vector<double>> multipliers_;
    double noise_;
    std::vector<FailureRule> failures_;
};

/// Uniform value in [0, 1) keyed on the four inputs.
double noise_unit(std::uint64_t seed, std::uint64_t config_index, std::uint64_t request_index,
                  std::uint64_t stage_index);

/// Noise-free stage latencies, in stage order. Throws SimulatedFailure.
std::vector<double> closed_form_stage_latencies(const Scenario& scenario,
                                                const Configuration& config);
/// Throws SimulatedFailure when a failure rule matches.
double closed_form_latency(const Scenario& scenario, const Configuration& config);

/// Chain-topology trace: root span "chain" plus one sequential child per stage.
Trace simulate_request(const Scenario& scenario, const Configuration& config,
                       std::uint64_t request_index, std::uint64_t seed);

/// Runs `protocol.requests` simulated requests. `elapsed_s` is simulated time
/// (sum of request latencies); exceeding `protocol.timeout_s` marks the trial
/// Incomplete{timeout}.
Evaluation evaluate_sim(const Scenario& scenario, const Configuration& config,
                        const MeasurementProtocol& protocol, std::uint64_t seed);

class SimEvaluator final : public Evaluator {
public:
    SimEvaluator(std::shared_ptr<const Scenario> scenario, MeasurementProtocol protocol,
                 std::uint64_t seed)
        : scenario_(std::move(scenario)), protocol_(protocol), seed_(seed) {}

    Evaluation evaluate(const Configuration& config, std::uint64_t config_index) override;

private:
    std::shared_ptr<const Scenario> scenario_;
    MeasurementProtocol protocol_;
    std::uint64_t seed_;
};

}  // namespace microtune
