#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "microtune/search_space.hpp"
#include "microtune/sim_evaluator.hpp"

#ifndef MICROTUNE_SOURCE_DIR
#error "MICROTUNE_SOURCE_DIR must be defined"
#endif

namespace testing {

inline std::filesystem::path source_dir() {
    return MICROTUNE_SOURCE_DIR;
}
inline std::filesystem::path data_dir() {
    return source_dir() / "data";
}
inline std::filesystem::path stub_dir() {
    return source_dir() / "tests" / "fixtures" / "stub";
}

/// Self-deleting scratch directory.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "microtune-XXXXXX").string();
        path_ = ::mkdtemp(tmpl.data());
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline nlohmann::json s2_space_doc() {
    return nlohmann::json::parse(R"({
      "name": "s2",
      "parameters": [
        {"name": "gc", "kind": "categorical", "values": ["serial", "g1", "zgc"], "default": "g1",
         "render": {"target": "runtime-flag", "template": "--gc={value}"}},
        {"name": "heap", "kind": "byte", "values": [268435456, 536870912], "default": 268435456,
         "render": {"target": "runtime-flag", "template": "-Xmx{value}"}}
      ]})");
}

inline std::shared_ptr<const microtune::SearchSpace> s2_space() {
    return std::make_shared<const microtune::SearchSpace>(microtune::parse_space(s2_space_doc()));
}

inline nlohmann::json sim1_scenario_doc() {
    return nlohmann::json::parse(R"({
      "stages": [["ingest", 0.3], ["toll", 0.5]],
      "effects": {"gc": {"serial": 1.05, "g1": 1.00, "zgc": 0.90},
                  "heap": {"268435456": 1.00, "536870912": 0.95}},
      "noise_amplitude": 0.0,
      "failures": []})");
}

inline std::shared_ptr<const microtune::Scenario> sim1_scenario(
    std::shared_ptr<const microtune::SearchSpace> space = s2_space()) {
    return std::make_shared<const microtune::Scenario>(
        microtune::Scenario::parse(sim1_scenario_doc(), std::move(space)));
}

/// Raw numbers behind a generated scenario; the brute-force oracle works from
/// these directly and never goes through the library's index decoding.
struct RawScenario {
    std::vector<std::size_t> radices;
    std::vector<double> stage_bases;
    std::vector<std::vector<double>> multipliers;  // [param][value]
    nlohmann::json space_doc;
    nlohmann::json scenario_doc;
};

/// Random space of categorical parameters with cardinality <= max_cardinality,
/// and a scenario with 1-4 stages and multipliers in [0.8, 1.2].
inline RawScenario random_scenario(std::mt19937_64& rng, std::uint64_t max_cardinality,
                                   double noise = 0.0) {
    RawScenario raw;
    std::uniform_int_distribution<int> n_params(1, 7);
    std::uniform_int_distribution<int> radix_dist(2, 5);
    std::uniform_real_distribution<double> mult(0.8, 1.2);
    std::uniform_real_distribution<double> base(0.01, 0.5);
    std::uniform_int_distribution<int> n_stages(1, 4);

    const int np = n_params(rng);
    std::uint64_t card = 1;
    for (int p = 0; p < np; ++p) {
        std::size_t r = static_cast<std::size_t>(radix_dist(rng));
        if (card * r > max_cardinality)
            break;
        card *= r;
        raw.radices.push_back(r);
    }
    if (raw.radices.empty())
        raw.radices.push_back(2);

    nlohmann::json params = nlohmann::json::array();
    nlohmann::json effects = nlohmann::json::object();
    for (std::size_t p = 0; p < raw.radices.size(); ++p) {
        const std::string name = "p" + std::to_string(p);
        nlohmann::json values = nlohmann::json::array();
        nlohmann::json table = nlohmann::json::object();
        std::vector<double> row;
        for (std::size_t v = 0; v < raw.radices[p]; ++v) {
            const std::string value = "v" + std::to_string(v);
            values.push_back(value);
            row.push_back(mult(rng));
            table[value] = row.back();
        }
        raw.multipliers.push_back(row);
        effects[name] = table;
        params.push_back({{"name", name},
                          {"kind", "categorical"},
                          {"values", values},
                          {"default", "v0"},
                          {"render", {{"template", "--" + name + "={value}"}}}});
    }
    raw.space_doc = {{"name", "random"}, {"parameters", params}};

    nlohmann::json stages = nlohmann::json::array();
    const int ns = n_stages(rng);
    for (int s = 0; s < ns; ++s) {
        raw.stage_bases.push_back(base(rng));
        stages.push_back(nlohmann::json::array({"svc" + std::to_string(s), raw.stage_bases.back()}));
    }
    raw.scenario_doc = {{"stages", stages},
                        {"effects", effects},
                        {"noise_amplitude", noise},
                        {"failures", nlohmann::json::array()}};
    return raw;
}

/// Noise-free latency of one assignment of value positions.
inline double oracle_latency(const RawScenario& raw, const std::vector<std::size_t>& positions) {
    double product = 1.0;
    for (std::size_t p = 0; p < positions.size(); ++p)
        product *= raw.multipliers[p][positions[p]];
    double total = 0.0;
    for (double b : raw.stage_bases)
        total += b * product;
    return total;
}

/// Odometer over all value positions (first parameter most significant).
template <typename F>
void for_each_assignment(const std::vector<std::size_t>& radices, F&& f) {
    std::vector<std::size_t> pos(radices.size(), 0);
    for (;;) {
        f(pos);
        std::size_t i = radices.size();
        while (i > 0) {
            --i;
            if (++pos[i] < radices[i])
                break;
            pos[i] = 0;
            if (i == 0)
                return;
        }
        if (radices.empty())
            return;
    }
}

/// All noise-free latencies in odometer order.
inline std::vector<double> oracle_latencies(const RawScenario& raw) {
    std::vector<double> out;
    for_each_assignment(raw.radices,
                        [&](const std::vector<std::size_t>& pos) { out.push_back(oracle_latency(raw, pos)); });
    return out;
}

inline double oracle_minimum(const RawScenario& raw) {
    double best = std::numeric_limits<double>::infinity();
    for (double v : oracle_latencies(raw))
        best = std::min(best, v);
    return best;
}

}  // namespace testing
