#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "microtune/engine.hpp"
#include "microtune/search_space.hpp"
#include "microtune/trial.hpp"
#include "microtune/trial_log.hpp"

namespace microtune {

struct ReportContext {
    std::string run_id;
    std::string strategy;
    std::shared_ptr<const SearchSpace> space;
};

struct BestSummary {
    std::uint64_t trial_id = 0;
    std::uint64_t config_index = 0;
    Configuration configuration;
    double mean = 0.0;
};

struct RunReport {
    ReportContext context;
    std::uint64_t baseline_config_index = 0;
    double baseline_mean = 0.0;
    std::optional<BestSummary> best;
    std::optional<double> improvement;
    /// Complete trials ascending by mean (ties by trial_id), then Incomplete
    /// trials by trial_id.
    std::vector<Trial> sorted_series;
    std::size_t complete = 0;
    std::size_t incomplete = 0;
    double total_elapsed_s = 0.0;  // baseline included
};

/// Baseline-flagged entries in `trials` are ignored. Throws ReportError when the
/// baseline is not Complete.
RunReport build_report(const ReportContext& context, std::span<const Trial> trials,
                       const Trial& baseline);

/// Rebuilds the report from a persisted log.
RunReport report_from_log(const LoadedLog& log);

/// Wall-clock timestamps are deliberately left out so that replay is exact.
nlohmann::json report_to_json(const RunReport& report);
std::string report_to_text(const RunReport& report);

struct RunSummary {
    std::string run_id;
    std::string strategy;
    std::optional<double> best_mean;
    std::optional<double> improvement;
    std::optional<TimeToTarget> to_within;
};

struct ComparisonReport {
    double q = kDefaultNearOptimalTolerance;
    std::optional<double> global_best_mean;
    RunSummary a;
    RunSummary b;
    /// 1 - elapsed_b / elapsed_a, both measured to within q of the global best.
    std::optional<double> relative_time_saving;
};

/// Global best is the better of the two runs' best means. Throws ReportError
/// when the runs do not share the space and baseline configuration.
ComparisonReport compare_runs(const RunReport& a, const RunReport& b, double q);
nlohmann::json comparison_to_json(const ComparisonReport& c);
std::string comparison_to_text(const ComparisonReport& c);

/// "csv" or "svg". Throws ReportError for anything else.
std::string export_series(const RunReport& report, std::string_view format);

}  // namespace microtune
