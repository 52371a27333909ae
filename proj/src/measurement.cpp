#include "microtune/measurement.hpp"

#include <string>

#include "microtune/errors.hpp"

namespace microtune {

using nlohmann::json;

void MeasurementProtocol::validate() const {
    if (requests <= warmup)
        throw SpecError("protocol: requests (" + std::to_string(requests) +
                        ") must exceed warmup (" + std::to_string(warmup) + ")");
    if (!(timeout_s > 0.0))
        throw SpecError("protocol: timeout_s must be positive");
}

json protocol_to_json(const MeasurementProtocol& p) {
    return {{"requests", p.requests}, {"warmup", p.warmup}, {"timeout_s", p.timeout_s}};
}

MeasurementProtocol protocol_from_json(const json& j) {
    MeasurementProtocol p;
    if (j.is_null())
        return p;
    if (!j.is_object())
        throw SpecError("protocol must be an object");
    try {
        p.requests = j.value("requests", p.requests);
        p.warmup = j.value("warmup", p.warmup);
        p.timeout_s = j.value("timeout_s", p.timeout_s);
    } catch (const json::exception& e) {
        throw SpecError(std::string("protocol: ") + e.what());
    }
    p.validate();
    return p;
}

json stats_to_json(const TrialStats& s) {
    return {{"mean_s", s.mean}, {"min_s", s.min}, {"max_s", s.max}, {"count", s.count}};
}

TrialStats stats_from_json(const json& j) {
    return {j.at("mean_s").get<double>(), j.at("min_s").get<double>(),
            j.at("max_s").get<double>(), j.at("count").get<std::size_t>()};
}

}  // namespace microtune
