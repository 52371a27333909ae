#include <doctest.h>

#include <fstream>
#include <sstream>

#include "microtune/errors.hpp"
#include "microtune/exec_evaluator.hpp"
#include "microtune/run_spec.hpp"
#include "test_support.hpp"

using namespace microtune;
using nlohmann::json;

namespace {

std::shared_ptr<const SearchSpace> heap_space() {
    return std::make_shared<const SearchSpace>(parse_space(json::parse(R"({
      "name": "heap-only",
      "parameters": [
        {"name": "heap", "kind": "byte", "values": ["16m", "512m"], "default": "512m",
         "render": {"template": "-Xmx{value}"}},
        {"name": "cpus", "kind": "discrete", "values": [1, 2], "default": 2,
         "render": {"target": "container-flag", "template": "--cpus={value}"}},
        {"name": "arenas", "kind": "discrete", "values": [2, 4], "default": 2,
         "render": {"target": "environment-variable", "template": "MALLOC_ARENA_MAX={value}"}}
      ]})")));
}

Configuration heap(const SearchSpace& space, const char* value) {
    return space.configuration_from_json(json{{"heap", value}, {"cpus", 2}, {"arenas", 4}});
}

struct Fixture {
    testing::TempDir dir;
    std::filesystem::path state = dir / "state";
    std::filesystem::path marker = dir / "teardown.marker";

    json target(const json& overrides = json::object()) const {
        const auto stub = testing::stub_dir();
        json t{{"launch_command",
                {(stub / "stub_service.sh").string(), state.string(), "{runtime_flags}",
                 "{container_flags}"}},
               {"workload_command",
                {(stub / "stub_workload.sh").string(), "--out", "{trace_source}", "--count",
                 "{requests}", "--latency", "0.81", "{runtime_flags}"}},
               {"readiness",
                {{"probe_command", {(stub / "probe.sh").string(), (state / "ready").string()}},
                 {"timeout_s", 10.0},
                 {"interval_s", 0.05}}},
               {"trace_source", (dir / "traces.jsonl").string()},
               {"teardown_command", {(stub / "teardown.sh").string(), marker.string()}},
               {"log_file", (dir / "target.log").string()}};
        t.merge_patch(overrides);
        return t;
    }

    int teardowns() const {
        std::ifstream in(marker);
        std::string line;
        int n = 0;
        while (std::getline(in, line))
            n += line == "teardown";
        return n;
    }

    Evaluation run(const json& overrides, const char* heap_value = "512m",
                   MeasurementProtocol protocol = MeasurementProtocol{50, 5, 30.0}) const {
        auto space = heap_space();
        auto spec = parse_target(target(overrides), dir.path());
        return run_external(*space, heap(*space, heap_value), spec, protocol);
    }
};

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("healthy stub completes with mean 0.81") {
    Fixture f;
    auto ev = f.run(json::object());
    CHECK(ev.complete);
    CHECK(ev.reason.empty());
    REQUIRE(ev.stats);
    CHECK(ev.stats->mean == doctest::Approx(0.81).epsilon(1e-12));
    CHECK(ev.stats->count == 45);
    CHECK(ev.samples == 50);
    CHECK(ev.elapsed_s > 0.0);
    CHECK(f.teardowns() == 1);
    CHECK(read_file(f.state / "flags") == "-Xmx512m\n--cpus=2\n");
}

TEST_CASE("workload rejecting -Xmx16m is workload-failed") {
    Fixture f;
    auto ev = f.run(json::object(), "16m");
    CHECK_FALSE(ev.complete);
    CHECK(ev.reason == "workload-failed");
    CHECK(f.teardowns() == 1);
}

TEST_CASE("three traces for fifty requests is traces-missing") {
    Fixture f;
    auto t = f.target();
    t["workload_command"][4] = "3";
    auto space = heap_space();
    auto ev = run_external(*space, heap(*space, "512m"), parse_target(t, f.dir.path()),
                           MeasurementProtocol{50, 5, 30.0});
    CHECK_FALSE(ev.complete);
    CHECK(ev.reason == "traces-missing");
    CHECK(f.teardowns() == 1);
}

TEST_CASE("service exiting at launch is launch-failed") {
    Fixture f;
    auto t = f.target();
    t["launch_command"] = {(testing::stub_dir() / "stub_service.sh").string(), f.state.string(),
                           "--exit", "4"};
    auto space = heap_space();
    auto ev = run_external(*space, heap(*space, "512m"), parse_target(t, f.dir.path()),
                           MeasurementProtocol{50, 5, 30.0});
    CHECK_FALSE(ev.complete);
    CHECK(ev.reason == "launch-failed");
    CHECK(f.teardowns() == 1);
}

TEST_CASE("probe that never succeeds is readiness-timeout") {
    Fixture f;
    auto ev = f.run(json{{"readiness",
                          {{"probe_command",
                            {(testing::stub_dir() / "probe.sh").string(),
                             (f.dir / "never").string()}},
                           {"timeout_s", 0.5}}}});
    CHECK_FALSE(ev.complete);
    CHECK(ev.reason == "readiness-timeout");
    CHECK(f.teardowns() == 1);
}

TEST_CASE("slow workload beyond the protocol timeout is timeout") {
    Fixture f;
    auto t = f.target();
    t["workload_command"].push_back("--sleep");
    t["workload_command"].push_back("5");
    auto space = heap_space();
    auto ev = run_external(*space, heap(*space, "512m"), parse_target(t, f.dir.path()),
                           MeasurementProtocol{50, 5, 1.0});
    CHECK_FALSE(ev.complete);
    CHECK(ev.reason == "timeout");
    CHECK(ev.elapsed_s < 4.0);
    CHECK(f.teardowns() == 1);
}

TEST_CASE("fixed-delay readiness and environment rendering") {
    Fixture f;
    const auto env_dump = f.dir / "env.txt";
    auto t = f.target();
    t["readiness"] = {{"delay_s", 0.2}};
    t["environment"] = {{"EXTRA_SETTING", "on"}};
    t["teardown_command"] = {"/bin/sh", "-c",
                             "env > " + env_dump.string() + "; echo teardown >> " + f.marker.string()};
    auto space = heap_space();
    auto ev = run_external(*space, heap(*space, "512m"), parse_target(t, f.dir.path()),
                           MeasurementProtocol{20, 2, 30.0});
    CHECK(ev.complete);
    CHECK(ev.stats->mean == doctest::Approx(0.81));
    CHECK(f.teardowns() == 1);
    const auto env = read_file(env_dump);
    CHECK(env.find("MALLOC_ARENA_MAX=4") != std::string::npos);
    CHECK(env.find("EXTRA_SETTING=on") != std::string::npos);
    CHECK(env.find("MICROTUNE_REQUESTS=20") != std::string::npos);
}

TEST_CASE("teardown runs exactly once per call across repeated evaluations") {
    Fixture f;
    auto space = heap_space();
    ExecEvaluator ev(space, parse_target(f.target(), f.dir.path()), MeasurementProtocol{10, 1, 30.0});
    for (int i = 0; i < 3; ++i) {
        auto a = ev.evaluate(heap(*space, "512m"), 1);
        CHECK(a.complete);
        auto b = ev.evaluate(heap(*space, "16m"), 0);
        CHECK(b.reason == "workload-failed");
    }
    CHECK(f.teardowns() == 6);
}

TEST_CASE("unresolvable commands are configuration errors") {
    Fixture f;
    auto space = heap_space();
    auto t = f.target();
    t["launch_command"] = {"definitely-not-a-real-program-xyz"};
    CHECK_THROWS_AS(run_external(*space, heap(*space, "512m"), parse_target(t, f.dir.path()),
                                 MeasurementProtocol{}),
                    ConfigurationError);
    auto w = f.target();
    w["workload_command"] = {"./missing/workload.sh"};
    CHECK_THROWS_AS(run_external(*space, heap(*space, "512m"), parse_target(w, f.dir.path()),
                                 MeasurementProtocol{}),
                    ConfigurationError);
    CHECK(f.teardowns() == 0);
}

TEST_CASE("target parsing") {
    Fixture f;
    CHECK_THROWS_AS(parse_target(json{{"trace_source", "x"}}, f.dir.path()), SpecError);
    auto neg = f.target();
    neg["readiness"] = {{"delay_s", -1.0}};
    CHECK_THROWS_AS(parse_target(neg, f.dir.path()), SpecError);

    auto rel = f.target();
    rel["trace_source"] = "out/traces.jsonl";
    rel["workload_command"][0] = "./bin/load.sh";
    auto parsed = parse_target(rel, "/srv/app");
    CHECK(parsed.trace_source == "/srv/app/out/traces.jsonl");
    CHECK(parsed.workload_command[0] == "/srv/app/bin/load.sh");

    auto again = parse_target(target_to_json(parsed), "/elsewhere");
    CHECK(target_to_json(again) == target_to_json(parsed));
}

TEST_CASE("placeholder expansion") {
    RenderedConfig r{{"-Xmx512m", "--gc=zgc"}, {"--cpus=2"}, {}};
    auto out = expand_command({"run", "{container_flags}", "img", "{runtime_flags}",
                               "--flags={runtime_flags}", "--n={requests}", "{trace_source}"},
                              r, "/tmp/t.jsonl", 50);
    CHECK(out == std::vector<std::string>{"run", "--cpus=2", "img", "-Xmx512m", "--gc=zgc",
                                          "--flags=-Xmx512m --gc=zgc", "--n=50", "/tmp/t.jsonl"});
    RenderedConfig empty;
    CHECK(expand_command({"a", "{runtime_flags}", "b"}, empty, "", 1) ==
          std::vector<std::string>{"a", "b"});
}

TEST_CASE("external run spec drives a full run") {
    Fixture f;
    json doc{{"space", heap_space()->to_json()},
             {"strategy", {{"type", "grid"}}},
             {"protocol", {{"requests", 10}, {"warmup", 1}, {"timeout_s", 30}}},
             {"evaluator", {{"type", "external"}, {"target", f.target()}}}};
    auto spec = parse_run_spec(doc, f.dir.path());
    auto state = run_with_log(spec, "ext", f.dir / "ext.jsonl", {}, {}, false);
    CHECK(state.status == RunStatus::Finished);
    CHECK(state.trials.size() == 8);
    std::size_t failed = 0;
    for (const auto& t : state.trials)
        failed += t.reason == "workload-failed" ? 1 : 0;
    CHECK(failed == 4);
    CHECK(f.teardowns() == 9);
}
