#include "microtune/trace.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <unordered_map>

#include "microtune/errors.hpp"

namespace microtune {

using nlohmann::json;

namespace {

const Span& root_span(const Trace& trace) {
    const Span* root = nullptr;
    for (const auto& s : trace.spans) {
        if (s.parent_id)
            continue;
        if (root)
            throw TraceError("trace '" + trace.trace_id + "' has multiple root spans");
        root = &s;
    }
    if (!root)
        throw TraceError("trace '" + trace.trace_id + "' has no root span");
    return *root;
}

}  // namespace

void validate_trace(const Trace& trace) {
    if (trace.spans.empty())
        throw TraceError("trace '" + trace.trace_id + "' has no spans");
    root_span(trace);

    std::unordered_map<std::string_view, const Span*> by_id;
    for (const auto& s : trace.spans) {
        if (!(s.duration_s >= 0.0) || !std::isfinite(s.duration_s) || !std::isfinite(s.start_s))
            throw TraceError("span '" + s.span_id + "' has an invalid interval");
        if (!by_id.emplace(s.span_id, &s).second)
            throw TraceError("duplicate span id '" + s.span_id + "'");
    }
    for (const auto& s : trace.spans) {
        if (!s.parent_id)
            continue;
        auto it = by_id.find(*s.parent_id);
        if (it == by_id.end())
            throw TraceError("span '" + s.span_id + "' references unknown parent '" +
                             *s.parent_id + "'");
        const Span& parent = *it->second;
        const double parent_end = parent.start_s + parent.duration_s;
        if (s.start_s < parent.start_s - kSpanNestingTolerance ||
            s.start_s + s.duration_s > parent_end + kSpanNestingTolerance)
            throw TraceError("span '" + s.span_id + "' lies outside its parent interval");
    }
    // Parent links must reach the root without cycles.
    for (const auto& s : trace.spans) {
        const Span* cur = &s;
        for (std::size_t hops = 0; cur->parent_id; ++hops) {
            if (hops > trace.spans.size())
                throw TraceError("span '" + s.span_id + "' is part of a parent cycle");
            cur = by_id.at(*cur->parent_id);
        }
    }
}

double end_to_end_latency(const Trace& trace) {
    validate_trace(trace);
    return root_span(trace).duration_s;
}

std::map<std::string, double> per_service_latency(const Trace& trace) {
    validate_trace(trace);
    // Sum in span_id order so the result does not depend on list order.
    std::vector<const Span*> ordered;
    ordered.reserve(trace.spans.size());
    for (const auto& s : trace.spans)
        ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const Span* a, const Span* b) { return a->span_id < b->span_id; });
    std::map<std::string, double> out;
    for (const Span* s : ordered)
        out[s->service] += s->duration_s;
    return out;
}

LatencySample to_sample(const Trace& trace, std::int64_t request_index) {
    return {request_index, end_to_end_latency(trace), per_service_latency(trace)};
}

TrialStats aggregate_samples(std::span<const LatencySample> samples,
                             const MeasurementProtocol& protocol) {
    if (samples.size() <= protocol.warmup)
        throw InsufficientSamples("insufficient samples: " + std::to_string(samples.size()) +
                                  " with warmup " + std::to_string(protocol.warmup));
    TrialStats st;
    const auto kept = samples.subspan(protocol.warmup);
    st.min = st.max = st.mean = kept.front().end_to_end;
    st.count = 1;
    // Running mean: a constant sequence yields its value exactly.
    for (const auto& s : kept.subspan(1)) {
        ++st.count;
        st.mean += (s.end_to_end - st.mean) / static_cast<double>(st.count);
        st.min = std::min(st.min, s.end_to_end);
        st.max = std::max(st.max, s.end_to_end);
    }
    st.mean = std::clamp(st.mean, st.min, st.max);
    return st;
}

json trace_to_json(const Trace& trace) {
    json spans = json::array();
    for (const auto& s : trace.spans) {
        spans.push_back({{"span_id", s.span_id},
                         {"parent_id", s.parent_id ? json(*s.parent_id) : json(nullptr)},
                         {"service", s.service},
                         {"start_s", s.start_s},
                         {"duration_s", s.duration_s}});
    }
    return {{"trace_id", trace.trace_id}, {"spans", std::move(spans)}};
}

Trace trace_from_json(const json& j) {
    try {
        Trace t;
        const auto& id = j.at("trace_id");
        t.trace_id = id.is_string() ? id.get<std::string>() : id.dump();
        for (const auto& sj : j.at("spans")) {
            Span s;
            const auto& sid = sj.at("span_id");
            s.span_id = sid.is_string() ? sid.get<std::string>() : sid.dump();
            if (sj.contains("parent_id") && !sj["parent_id"].is_null()) {
                const auto& pid = sj["parent_id"];
                s.parent_id = pid.is_string() ? pid.get<std::string>() : pid.dump();
            }
            s.service = sj.at("service").get<std::string>();
            s.start_s = sj.at("start_s").get<double>();
            s.duration_s = sj.at("duration_s").get<double>();
            t.spans.push_back(std::move(s));
        }
        return t;
    } catch (const json::exception& e) {
        throw TraceError(std::string("malformed trace: ") + e.what());
    }
}

TraceReadResult read_traces(std::istream& in) {
    TraceReadResult out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            auto t = trace_from_json(json::parse(line));
            validate_trace(t);
            out.traces.push_back(std::move(t));
        } catch (const json::exception&) {
            ++out.rejected;
        } catch (const TraceError&) {
            ++out.rejected;
        }
    }
    return out;
}

}  // namespace microtune
