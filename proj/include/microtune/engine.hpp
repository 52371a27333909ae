#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stop_token>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include "microtune/evaluator.hpp"
#include "microtune/measurement.hpp"
#include "microtune/search_space.hpp"
#include "microtune/trial.hpp"

namespace microtune {

enum class StrategyKind { Grid, Random };
std::string_view to_string(StrategyKind kind);

struct Strategy {
    StrategyKind kind = StrategyKind::Grid;
    std::uint64_t seed = 0;  // Random only
};

enum class RunStatus { Pending, Running, Stopped, Exhausted, Finished };
std::string_view to_string(RunStatus status);
RunStatus run_status_from_string(std::string_view text);

/// Uniform integer in [0, bound) by rejection over a 64-bit engine; bound > 0.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

/// Lazily produced configuration indices.
class CandidateSequence {
public:
    virtual ~CandidateSequence() = default;
    virtual std::optional<std::uint64_t> next() = 0;
};

/// 0, 1, 2, ... in mixed-radix order, truncated at min(budget, cardinality).
class GridSequence final : public CandidateSequence {
public:
    GridSequence(std::uint64_t cardinality, std::uint64_t budget);
    std::optional<std::uint64_t> next() override;

private:
    std::uint64_t limit_;
    std::uint64_t next_ = 0;
};

/// `budget` distinct indices drawn uniformly without replacement.
///
/// The engine is mt19937_64 seeded with SplitMix64(seed). When budget is at least
/// half the cardinality the draw is a lazy Fisher-Yates shuffle over the
/// materialized index range; otherwise indices are drawn independently and
/// duplicates are rejected through a seen-set.
class RandomSequence final : public CandidateSequence {
public:
    /// Throws std::invalid_argument when budget > cardinality.
    RandomSequence(std::uint64_t cardinality, std::uint64_t budget, std::uint64_t seed);
    std::optional<std::uint64_t> next() override;

private:
    std::uint64_t cardinality_;
    std::uint64_t budget_;
    std::uint64_t emitted_ = 0;
    std::mt19937_64 rng_;
    bool dense_;
    std::vector<std::uint64_t> pool_;
    std::unordered_set<std::uint64_t> seen_;
};

std::vector<std::uint64_t> grid_candidates(const SearchSpace& space, std::uint64_t budget);
std::vector<std::uint64_t> random_candidates(const SearchSpace& space, std::uint64_t budget,
                                             std::uint64_t seed);

/// The Complete trial with the smallest mean, earliest trial_id on ties.
/// Baseline-flagged trials are ignored. nullptr when nothing qualifies.
const Trial* best_trial(std::span<const Trial> trials);

/// 100 * (baseline - best) / baseline. Throws std::invalid_argument if baseline <= 0.
double improvement_percent(double baseline_mean, double best_mean);

struct TimeToTarget {
    double elapsed_s = 0.0;   // cumulative over trials up to and including the hit
    std::size_t trials = 0;

    friend bool operator==(const TimeToTarget&, const TimeToTarget&) = default;
};

inline constexpr double kDefaultNearOptimalTolerance = 0.05;

/// First Complete trial (in the given order) whose mean <= global_best * (1 + q).
/// Baseline-flagged trials are skipped entirely.
std::optional<TimeToTarget> time_to_within(std::span<const Trial> trials, double global_best_mean,
                                           double q);

/// What the engine needs to know about a run; evaluator construction lives elsewhere.
struct RunPlan {
    std::shared_ptr<const SearchSpace> space;
    Strategy strategy;
    std::uint64_t budget = 0;
    Configuration baseline;
};

/// Resolves the budget: Grid defaults to the cardinality; Random requires one
/// and it must not exceed the cardinality. Throws SpecError.
std::uint64_t resolve_budget(const SearchSpace& space, const Strategy& strategy,
                             std::optional<std::uint64_t> requested);

struct RunState {
    std::string run_id;
    RunStatus status = RunStatus::Pending;
    std::uint64_t budget = 0;
    std::optional<Trial> baseline;
    std::vector<Trial> trials;  // candidates only, trial_id order
    std::optional<std::size_t> incumbent;  // position in `trials`
    std::string stop_cause;

    const Trial* incumbent_trial() const {
        return incumbent ? &trials[*incumbent] : nullptr;
    }
};

using TrialSink = std::function<void(const Trial&)>;

/// Evaluates the baseline (trial_id 0), then candidates (trial_id 1, 2, ...)
/// strictly one at a time, emitting each trial to `sink` in order. The stop
/// token is polled before every evaluation.
RunState execute_run(const RunPlan& plan, Evaluator& evaluator, std::string run_id,
                     const TrialSink& sink, std::stop_token stop = {});

}  // namespace microtune
