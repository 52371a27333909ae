#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "microtune/evaluator.hpp"
#include "microtune/measurement.hpp"
#include "microtune/search_space.hpp"
#include "microtune/trial.hpp"

namespace microtune {

struct Readiness {
    std::vector<std::string> probe_command;  // empty => fixed delay
    double delay_s = 0.0;
    double timeout_s = 30.0;   // probe mode
    double interval_s = 0.1;   // probe mode
};

/// How to launch, exercise, and tear down one target.
///
/// Every command may use the placeholders {runtime_flags}, {container_flags},
/// {trace_source} and {requests}. An argument that is exactly "{runtime_flags}"
/// or "{container_flags}" expands to one argument per flag; inside a longer
/// argument the flags are joined with single spaces.
struct TargetSpec {
    std::vector<std::string> launch_command;
    std::map<std::string, std::string> environment;
    std::vector<std::string> workload_command;
    Readiness readiness;
    std::string trace_source;
    std::vector<std::string> teardown_command;
    std::string log_file;  // child stdout/stderr; empty discards
    double teardown_timeout_s = 30.0;
};

/// Parses the target JSON. Relative command paths (containing '/') and relative
/// file paths are resolved against `base_dir`. Throws SpecError.
TargetSpec parse_target(const nlohmann::json& document, const std::filesystem::path& base_dir);
nlohmann::json target_to_json(const TargetSpec& target);

/// Substitutes placeholders into one command line.
std::vector<std::string> expand_command(const std::vector<std::string>& command,
                                        const RenderedConfig& rendered,
                                        const std::string& trace_source, std::size_t requests);

/// Launch, readiness, workload, trace ingestion, aggregation; teardown always
/// runs exactly once. The first failing stage decides the Incomplete reason:
/// launch-failed, readiness-timeout, workload-failed, traces-missing, timeout.
/// Throws ConfigurationError when a command cannot be resolved.
Evaluation run_external(const SearchSpace& space, const Configuration& config,
                        const TargetSpec& target, const MeasurementProtocol& protocol);

class ExecEvaluator final : public Evaluator {
public:
    ExecEvaluator(std::shared_ptr<const SearchSpace> space, TargetSpec target,
                  MeasurementProtocol protocol)
        : space_(std::move(space)), target_(std::move(target)), protocol_(protocol) {}

    Evaluation evaluate(const Configuration& config, std::uint64_t config_index) override;

private:
    std::shared_ptr<const SearchSpace> space_;
    TargetSpec target_;
    MeasurementProtocol protocol_;
};

}  // namespace microtune
