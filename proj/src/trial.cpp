#include "microtune/trial.hpp"

#include <cstdio>
#include <ctime>

#include "microtune/errors.hpp"

namespace microtune {

using nlohmann::json;

Timestamp now_timestamp() {
    return std::chrono::floor<std::chrono::milliseconds>(Clock::now());
}

std::string format_timestamp(Timestamp t) {
    const auto ms = t.time_since_epoch().count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    long frac = static_cast<long>(ms % 1000);
    if (frac < 0) {
        frac += 1000;
        --secs;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
    return buf;
}

Timestamp parse_timestamp(const std::string& text) {
    std::tm tm{};
    int ms = 0;
    char z = 0;
    int n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%c", &tm.tm_year, &tm.tm_mon,
                        &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &ms, &z);
    if (n != 8 || z != 'Z')
        throw LogError("malformed timestamp '" + text + "'");
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const std::time_t secs = timegm(&tm);
    return Timestamp(std::chrono::milliseconds(static_cast<std::int64_t>(secs) * 1000 + ms));
}

Evaluation Evaluation::completed(TrialStats stats, std::size_t samples, double elapsed_s) {
    return {true, {}, stats, samples, elapsed_s};
}

Evaluation Evaluation::incomplete(std::string reason, std::optional<TrialStats> stats,
                                  std::size_t samples, double elapsed_s) {
    return {false, std::move(reason), stats, samples, elapsed_s};
}

json trial_to_json(const Trial& t) {
    json j{{"trial_id", t.trial_id},
           {"baseline", t.baseline},
           {"config_index", t.config_index},
           {"configuration", configuration_to_json(t.configuration)},
           {"status", t.complete ? "complete" : "incomplete"},
           {"samples", t.samples},
           {"started_at", format_timestamp(t.started_at)},
           {"finished_at", format_timestamp(t.finished_at)},
           {"elapsed_s", t.elapsed_s}};
    if (!t.complete)
        j["reason"] = t.reason;
    j["stats"] = t.stats ? stats_to_json(*t.stats) : json(nullptr);
    return j;
}

Trial trial_from_json(const json& j, const SearchSpace& space) {
    try {
        Trial t;
        t.trial_id = j.at("trial_id").get<std::uint64_t>();
        t.baseline = j.value("baseline", false);
        t.config_index = j.at("config_index").get<std::uint64_t>();
        t.configuration = space.configuration_from_json(j.at("configuration"));
        const auto status = j.at("status").get<std::string>();
        if (status != "complete" && status != "incomplete")
            throw LogError("unknown trial status '" + status + "'");
        t.complete = status == "complete";
        if (!t.complete)
            t.reason = j.at("reason").get<std::string>();
        if (j.contains("stats") && !j["stats"].is_null())
            t.stats = stats_from_json(j["stats"]);
        t.samples = j.value("samples", std::size_t{0});
        t.started_at = parse_timestamp(j.at("started_at").get<std::string>());
        t.finished_at = parse_timestamp(j.at("finished_at").get<std::string>());
        t.elapsed_s = j.at("elapsed_s").get<double>();
        if (t.complete && !t.stats)
            throw LogError("complete trial without stats");
        if (space.index_of(t.configuration) != t.config_index)
            throw LogError("trial " + std::to_string(t.trial_id) +
                           ": config_index does not match configuration");
        return t;
    } catch (const json::exception& e) {
        throw LogError(std::string("malformed trial record: ") + e.what());
    } catch (const SpaceError& e) {
        throw LogError(std::string("trial configuration invalid: ") + e.what());
    }
}

}  // namespace microtune
