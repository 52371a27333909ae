#pragma once

#include <cstddef>

#include <json.hpp>

namespace microtune {

/// Per-configuration measurement discipline.
struct MeasurementProtocol {
    std::size_t requests = 50;
    std::size_t warmup = 5;
    double timeout_s = 300.0;

    /// Throws SpecError unless requests > warmup and timeout_s > 0.
    void validate() const;
};

struct TrialStats {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;

    friend bool operator==(const TrialStats&, const TrialStats&) = default;
};

nlohmann::json protocol_to_json(const MeasurementProtocol& p);
MeasurementProtocol protocol_from_json(const nlohmann::json& j);

nlohmann::json stats_to_json(const TrialStats& s);
TrialStats stats_from_json(const nlohmann::json& j);

}  // namespace microtune
