#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "microtune/measurement.hpp"

namespace microtune {

/// Child intervals may overhang their parent by at most this much (seconds).
inline constexpr double kSpanNestingTolerance = 1e-9;

struct Span {
    std::string span_id;
    std::optional<std::string> parent_id;  // none => root
    std::string service;
    double start_s = 0.0;  // offset from trace origin
    double duration_s = 0.0;
};

struct Trace {
    std::string trace_id;
    std::vector<Span> spans;
};

struct LatencySample {
    std::int64_t request_index = 0;
    double end_to_end = 0.0;
    std::map<std::string, double> per_service;
};

/// Throws TraceError on: empty trace, zero or several roots, dangling parent,
/// negative duration, duplicate span id, or a child outside its parent interval.
void validate_trace(const Trace& trace);

/// Root span duration.
double end_to_end_latency(const Trace& trace);

/// Sum of span durations per service, root included.
std::map<std::string, double> per_service_latency(const Trace& trace);

LatencySample to_sample(const Trace& trace, std::int64_t request_index);

/// Drops the first `protocol.warmup` samples and summarizes the rest.
/// Throws InsufficientSamples when nothing is left.
TrialStats aggregate_samples(std::span<const LatencySample> samples,
                             const MeasurementProtocol& protocol);

nlohmann::json trace_to_json(const Trace& trace);
/// Throws TraceError on schema violations (structure is validated separately).
Trace trace_from_json(const nlohmann::json& j);

struct TraceReadResult {
    std::vector<Trace> traces;   // valid traces in file order
    std::size_t rejected = 0;    // unparseable or structurally invalid lines
};

/// Reads the JSON-Lines trace format. Blank lines are skipped.
TraceReadResult read_traces(std::istream& in);

}  // namespace microtune
