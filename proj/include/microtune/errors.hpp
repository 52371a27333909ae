#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace microtune {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent search-space document or configuration.
struct SpaceError : Error {
    using Error::Error;
};

struct TraceError : Error {
    using Error::Error;
};

/// Too few post-warmup samples to aggregate.
struct InsufficientSamples : Error {
    using Error::Error;
};

/// A simulated request hit a failure rule. `reason()` is the rule's reason string.
class SimulatedFailure : public Error {
public:
    explicit SimulatedFailure(std::string reason)
        : Error("simulated failure: " + reason), reason_(std::move(reason)) {}
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string reason_;
};

/// The evaluator cannot run at all (unresolvable command, bad target). Aborts the run.
struct ConfigurationError : Error {
    using Error::Error;
};

/// Invalid run spec, scenario, or target document.
struct SpecError : Error {
    using Error::Error;
};

struct LogError : Error {
    using Error::Error;
};

struct ReportError : Error {
    using Error::Error;
};

}  // namespace microtune
