#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "microtune/measurement.hpp"
#include "microtune/search_space.hpp"

namespace microtune {

using Clock = std::chrono::system_clock;
/// Wall-clock instants are kept at millisecond resolution so they survive the log.
using Timestamp = std::chrono::time_point<Clock, std::chrono::milliseconds>;

Timestamp now_timestamp();
std::string format_timestamp(Timestamp t);  // ISO-8601 UTC, e.g. 2026-10-16T08:01:02.345Z
Timestamp parse_timestamp(const std::string& text);

/// Machine-readable reasons an evaluation came back Incomplete.
namespace incomplete {
inline constexpr const char* kLaunchFailed = "launch-failed";
inline constexpr const char* kReadinessTimeout = "readiness-timeout";
inline constexpr const char* kWorkloadFailed = "workload-failed";
inline constexpr const char* kTracesMissing = "traces-missing";
inline constexpr const char* kTimeout = "timeout";
}  // namespace incomplete

/// What an evaluator reports for one configuration.
struct Evaluation {
    bool complete = false;
    std::string reason;  // set iff !complete
    std::optional<TrialStats> stats;
    std::size_t samples = 0;  // samples collected, warmup included
    double elapsed_s = 0.0;

    static Evaluation completed(TrialStats stats, std::size_t samples, double elapsed_s);
    static Evaluation incomplete(std::string reason, std::optional<TrialStats> stats,
                                 std::size_t samples, double elapsed_s);
};

struct Trial {
    std::uint64_t trial_id = 0;
    bool baseline = false;
    std::uint64_t config_index = 0;
    Configuration configuration;
    bool complete = false;
    std::string reason;
    std::optional<TrialStats> stats;
    std::size_t samples = 0;
    Timestamp started_at{};
    Timestamp finished_at{};
    double elapsed_s = 0.0;

    std::optional<double> mean() const {
        return stats ? std::optional<double>(stats->mean) : std::nullopt;
    }

    friend bool operator==(const Trial&, const Trial&) = default;
};

nlohmann::json trial_to_json(const Trial& trial);
/// Configuration values are checked against `space`.
Trial trial_from_json(const nlohmann::json& j, const SearchSpace& space);

}  // namespace microtune
