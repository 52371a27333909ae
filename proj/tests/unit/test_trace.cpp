#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "microtune/errors.hpp"
#include "microtune/trace.hpp"

using namespace microtune;

namespace {

Trace sim1_trace() {
    // zgc / 512m under SIM1: product 0.855, stages 0.3 and 0.5.
    const double ingest = 0.3 * (0.90 * 0.95);
    const double toll = 0.5 * (0.90 * 0.95);
    return Trace{"req-0",
                 {{"root", std::nullopt, "chain", 0.0, ingest + toll},
                  {"stage-0", "root", "ingest", 0.0, ingest},
                  {"stage-1", "root", "toll", ingest, toll}}};
}

Trace single(double d) {
    return Trace{"t", {{"root", std::nullopt, "svc", 0.0, d}}};
}

std::vector<LatencySample> samples_of(std::initializer_list<double> values) {
    std::vector<LatencySample> out;
    std::int64_t i = 0;
    for (double v : values)
        out.push_back({i++, v, {}});
    return out;
}

}  // namespace

TEST_CASE("end_to_end_latency examples") {
    CHECK(end_to_end_latency(sim1_trace()) == doctest::Approx(0.684).epsilon(1e-12));
    CHECK(end_to_end_latency(single(0.81)) == 0.81);

    Trace two_roots{"t", {{"a", std::nullopt, "x", 0.0, 1.0}, {"b", std::nullopt, "y", 0.0, 1.0}}};
    CHECK_THROWS_AS(end_to_end_latency(two_roots), TraceError);
    Trace no_root{"t", {{"a", "b", "x", 0.0, 1.0}, {"b", "a", "y", 0.0, 1.0}}};
    CHECK_THROWS_AS(end_to_end_latency(no_root), TraceError);
}

TEST_CASE("per_service_latency examples") {
    auto m = per_service_latency(sim1_trace());
    CHECK(m.size() == 3);
    CHECK(m.at("chain") == doctest::Approx(0.684).epsilon(1e-12));
    CHECK(m.at("ingest") == doctest::Approx(0.2565).epsilon(1e-12));
    CHECK(m.at("toll") == doctest::Approx(0.4275).epsilon(1e-12));

    auto s = per_service_latency(single(0.81));
    CHECK(s.size() == 1);
    CHECK(s.at("svc") == 0.81);

    Trace repeated{"t",
                   {{"root", std::nullopt, "front", 0.0, 0.5},
                    {"a", "root", "db", 0.0, 0.1},
                    {"b", "root", "db", 0.1, 0.2}}};
    CHECK(per_service_latency(repeated).at("db") == doctest::Approx(0.3));
}

TEST_CASE("structural validation") {
    Trace dangling{"t", {{"root", std::nullopt, "a", 0.0, 1.0}, {"c", "ghost", "b", 0.0, 0.5}}};
    CHECK_THROWS_AS(validate_trace(dangling), TraceError);

    Trace outside{"t", {{"root", std::nullopt, "a", 0.0, 1.0}, {"c", "root", "b", 0.8, 0.5}}};
    CHECK_THROWS_AS(validate_trace(outside), TraceError);

    Trace within_tolerance{
        "t", {{"root", std::nullopt, "a", 0.0, 1.0}, {"c", "root", "b", 0.5, 0.5 + 5e-10}}};
    CHECK_NOTHROW(validate_trace(within_tolerance));

    Trace duplicate{"t", {{"root", std::nullopt, "a", 0.0, 1.0}, {"root", "root", "b", 0.0, 0.5}}};
    CHECK_THROWS_AS(validate_trace(duplicate), TraceError);

    Trace negative{"t", {{"root", std::nullopt, "a", 0.0, -1.0}}};
    CHECK_THROWS_AS(validate_trace(negative), TraceError);

    Trace cycle{"t",
                {{"root", std::nullopt, "a", 0.0, 1.0},
                 {"x", "y", "b", 0.0, 0.5},
                 {"y", "x", "c", 0.0, 0.5}}};
    CHECK_THROWS_AS(validate_trace(cycle), TraceError);

    CHECK_THROWS_AS(validate_trace(Trace{"t", {}}), TraceError);
}

TEST_CASE("aggregate_samples examples") {
    MeasurementProtocol p{3, 1, 300.0};
    auto stats = aggregate_samples(samples_of({0.8, 1.0, 0.9}), p);
    CHECK(stats.mean == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(stats.min == 0.9);
    CHECK(stats.max == 1.0);
    CHECK(stats.count == 2);

    std::vector<LatencySample> constant;
    for (int i = 0; i < 50; ++i)
        constant.push_back({i, 0.81, {}});
    auto c = aggregate_samples(constant, MeasurementProtocol{});
    CHECK(c.mean == 0.81);
    CHECK(c.count == 45);

    CHECK_THROWS_AS(aggregate_samples(samples_of({0.1, 0.2, 0.3}), MeasurementProtocol{}),
                    InsufficientSamples);
    try {
        aggregate_samples(samples_of({0.1, 0.2, 0.3}), MeasurementProtocol{});
    } catch (const InsufficientSamples& e) {
        CHECK(std::string(e.what()).find("insufficient samples") != std::string::npos);
    }
}

TEST_CASE("latencies are invariant under span reordering") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dur(0.001, 0.2);
    for (int round = 0; round < 200; ++round) {
        Trace t{"t", {}};
        t.spans.push_back({"root", std::nullopt, "front", 0.0, 0.0});
        double cursor = 0.0;
        const int n = 1 + round % 7;
        for (int i = 0; i < n; ++i) {
            const double d = dur(rng);
            t.spans.push_back({"s" + std::to_string(i), "root", "svc" + std::to_string(i % 3),
                               cursor, d});
            cursor += d;
        }
        t.spans[0].duration_s = cursor;
        const auto e2e = end_to_end_latency(t);
        const auto per = per_service_latency(t);
        for (int shuffle = 0; shuffle < 5; ++shuffle) {
            std::shuffle(t.spans.begin(), t.spans.end(), rng);
            REQUIRE(end_to_end_latency(t) == e2e);
            REQUIRE(per_service_latency(t) == per);
        }
    }
}

TEST_CASE("aggregate mean lies within [min, max]") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> lat(0.01, 3.0);
    for (int round = 0; round < 500; ++round) {
        const std::size_t n = 2 + round % 60;
        std::vector<LatencySample> s;
        for (std::size_t i = 0; i < n; ++i)
            s.push_back({static_cast<std::int64_t>(i), lat(rng), {}});
        const std::size_t warmup = round % static_cast<int>(n);
        auto stats = aggregate_samples(s, MeasurementProtocol{n, warmup, 300.0});
        REQUIRE(stats.count == n - warmup);
        REQUIRE(stats.min <= stats.mean);
        REQUIRE(stats.mean <= stats.max);
    }
}

TEST_CASE("JSON Lines trace reading") {
    std::istringstream in(
        R"({"trace_id":"a","spans":[{"span_id":"r","parent_id":null,"service":"s","start_s":0,"duration_s":0.5}]})"
        "\n"
        "not json\n"
        "\n"
        R"({"trace_id":"b","spans":[{"span_id":"r","parent_id":null,"service":"s","start_s":0,"duration_s":0.5},{"span_id":"q","parent_id":null,"service":"s","start_s":0,"duration_s":0.5}]})"
        "\n"
        R"({"trace_id":"c","spans":[{"span_id":"r","parent_id":null,"service":"s","start_s":0,"duration_s":0.7}]})");
    auto result = read_traces(in);
    REQUIRE(result.traces.size() == 2);
    CHECK(result.rejected == 2);
    CHECK(result.traces[1].trace_id == "c");
    CHECK(end_to_end_latency(result.traces[1]) == 0.7);

    auto again = trace_from_json(trace_to_json(sim1_trace()));
    CHECK(end_to_end_latency(again) == end_to_end_latency(sim1_trace()));
    CHECK(per_service_latency(again) == per_service_latency(sim1_trace()));
}
