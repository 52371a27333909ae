#pragma once

#include <cstdint>

#include "microtune/search_space.hpp"
#include "microtune/trial.hpp"

namespace microtune {

/// Applies one configuration and measures it. Implementations throw
/// ConfigurationError when they cannot run at all.
class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual Evaluation evaluate(const Configuration& config, std::uint64_t config_index) = 0;
};

}  // namespace microtune
