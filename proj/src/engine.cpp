#include "microtune/engine.hpp"

#include <chrono>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "microtune/errors.hpp"

namespace microtune {

std::string_view to_string(StrategyKind kind) {
    return kind == StrategyKind::Grid ? "grid" : "random";
}

std::string_view to_string(RunStatus status) {
    switch (status) {
    case RunStatus::Pending: return "pending";
    case RunStatus::Running: return "running";
    case RunStatus::Stopped: return "stopped";
    case RunStatus::Exhausted: return "exhausted";
    case RunStatus::Finished: return "finished";
    }
    return "?";
}

RunStatus run_status_from_string(std::string_view text) {
    for (auto s : {RunStatus::Pending, RunStatus::Running, RunStatus::Stopped,
                   RunStatus::Exhausted, RunStatus::Finished}) {
        if (to_string(s) == text)
            return s;
    }
    throw LogError("unknown run status '" + std::string(text) + "'");
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0)
        throw std::invalid_argument("uniform_below: bound must be positive");
    // Largest multiple of bound representable; draws at or above it are rejected.
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

GridSequence::GridSequence(std::uint64_t cardinality, std::uint64_t budget)
    : limit_(std::min(cardinality, budget)) {}

std::optional<std::uint64_t> GridSequence::next() {
    if (next_ >= limit_)
        return std::nullopt;
    return next_++;
}

namespace {

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

RandomSequence::RandomSequence(std::uint64_t cardinality, std::uint64_t budget,
                               std::uint64_t seed)
    : cardinality_(cardinality),
      budget_(budget),
      rng_(mix_seed(seed)),
      dense_(budget >= cardinality / 2 + cardinality % 2) {
    if (budget > cardinality)
        throw std::invalid_argument("random search budget " + std::to_string(budget) +
                                    " exceeds cardinality " + std::to_string(cardinality));
    if (dense_) {
        pool_.resize(cardinality_);
        std::iota(pool_.begin(), pool_.end(), std::uint64_t{0});
    } else {
        seen_.reserve(budget_);
    }
}

std::optional<std::uint64_t> RandomSequence::next() {
    if (emitted_ >= budget_)
        return std::nullopt;
    if (dense_) {
        const auto j = emitted_ + uniform_below(rng_, cardinality_ - emitted_);
        std::swap(pool_[emitted_], pool_[j]);
        return pool_[emitted_++];
    }
    for (;;) {
        const auto idx = uniform_below(rng_, cardinality_);
        if (seen_.insert(idx).second) {
            ++emitted_;
            return idx;
        }
    }
}

std::vector<std::uint64_t> grid_candidates(const SearchSpace& space, std::uint64_t budget) {
    GridSequence seq(space.cardinality(), budget);
    std::vector<std::uint64_t> out;
    while (auto i = seq.next())
        out.push_back(*i);
    return out;
}

std::vector<std::uint64_t> random_candidates(const SearchSpace& space, std::uint64_t budget,
                                             std::uint64_t seed) {
    RandomSequence seq(space.cardinality(), budget, seed);
    std::vector<std::uint64_t> out;
    out.reserve(budget);
    while (auto i = seq.next())
        out.push_back(*i);
    return out;
}

const Trial* best_trial(std::span<const Trial> trials) {
    const Trial* best = nullptr;
    for (const auto& t : trials) {
        if (t.baseline || !t.complete || !t.stats)
            continue;
        if (!best || t.stats->mean < best->stats->mean ||
            (t.stats->mean == best->stats->mean && t.trial_id < best->trial_id))
            best = &t;
    }
    return best;
}

double improvement_percent(double baseline_mean, double best_mean) {
    if (!(baseline_mean > 0.0))
        throw std::invalid_argument("baseline mean must be positive");
    return 100.0 * (baseline_mean - best_mean) / baseline_mean;
}

std::optional<TimeToTarget> time_to_within(std::span<const Trial> trials, double global_best_mean,
                                           double q) {
    const double threshold = global_best_mean * (1.0 + q);
    TimeToTarget acc;
    for (const auto& t : trials) {
        if (t.baseline)
            continue;
        acc.elapsed_s += t.elapsed_s;
        ++acc.trials;
        if (t.complete && t.stats && t.stats->mean <= threshold)
            return acc;
    }
    return std::nullopt;
}

std::uint64_t resolve_budget(const SearchSpace& space, const Strategy& strategy,
                             std::optional<std::uint64_t> requested) {
    if (requested && *requested == 0)
        throw SpecError("budget must be at least 1");
    if (strategy.kind == StrategyKind::Grid)
        return requested.value_or(space.cardinality());
    if (!requested)
        throw SpecError("random strategy requires an explicit budget");
    if (*requested > space.cardinality())
        throw SpecError("random budget " + std::to_string(*requested) + " exceeds cardinality " +
                        std::to_string(space.cardinality()));
    return *requested;
}

namespace {

Trial evaluate_one(Evaluator& evaluator, std::uint64_t trial_id,
                   bool baseline, std::uint64_t config_index, Configuration config) {
    Trial t;
    t.trial_id = trial_id;
    t.baseline = baseline;
    t.config_index = config_index;
    t.configuration = std::move(config);
    t.started_at = now_timestamp();
    Evaluation e = evaluator.evaluate(t.configuration, config_index);
    t.finished_at = now_timestamp();
    t.complete = e.complete;
    t.reason = e.complete ? std::string() : e.reason;
    t.stats = e.stats;
    t.samples = e.samples;
    t.elapsed_s = e.elapsed_s;
    return t;
}

}  // namespace

RunState execute_run(const RunPlan& plan, Evaluator& evaluator, std::string run_id,
                     const TrialSink& sink, std::stop_token stop) {
    if (!plan.space)
        throw std::invalid_argument("run plan has no search space");
    const SearchSpace& space = *plan.space;
    if (plan.budget == 0)
        throw std::invalid_argument("budget must be at least 1");

    RunState state;
    state.run_id = std::move(run_id);
    state.budget = plan.budget;
    state.status = RunStatus::Running;

    std::unique_ptr<CandidateSequence> candidates;
    if (plan.strategy.kind == StrategyKind::Grid)
        candidates = std::make_unique<GridSequence>(space.cardinality(), plan.budget);
    else
        candidates = std::make_unique<RandomSequence>(space.cardinality(), plan.budget,
                                                      plan.strategy.seed);

    auto emit = [&](const Trial& t) {
        if (sink)
            sink(t);
    };

    try {
        if (stop.stop_requested()) {
            state.status = RunStatus::Stopped;
            state.stop_cause = "stop requested";
            return state;
        }
        const auto baseline_index = space.index_of(plan.baseline);
        state.baseline = evaluate_one(evaluator, 0, true, baseline_index,
                                      space.normalize(plan.baseline));
        emit(*state.baseline);

        std::uint64_t next_id = 1;
        while (state.trials.size() < plan.budget) {
            if (stop.stop_requested()) {
                state.status = RunStatus::Stopped;
                state.stop_cause = "stop requested";
                return state;
            }
            auto index = candidates->next();
            if (!index) {
                state.status = RunStatus::Exhausted;
                return state;
            }
            state.trials.push_back(
                evaluate_one(evaluator, next_id++, false, *index, space.config_at(*index)));
            const Trial& t = state.trials.back();
            if (t.complete && t.stats) {
                const Trial* inc = state.incumbent_trial();
                if (!inc || t.stats->mean < inc->stats->mean)
                    state.incumbent = state.trials.size() - 1;
            }
            emit(t);
        }
        state.status = RunStatus::Finished;
    } catch (const ConfigurationError& e) {
        state.status = RunStatus::Stopped;
        state.stop_cause = e.what();
    }
    return state;
}

}  // namespace microtune
