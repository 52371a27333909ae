#include "microtune/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "microtune/errors.hpp"

namespace microtune {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

std::string describe(const SearchSpace* space, const Configuration& config) {
    std::string out;
    for (const auto& [name, value] : config.entries()) {
        const ParameterSpec* p = space ? space->find(name) : nullptr;
        if (p && !p->enabled)
            continue;
        if (!out.empty())
            out += ' ';
        out += name + "=" + value_text(p ? p->kind : ParamKind::Categorical, value);
    }
    return out.empty() ? "(defaults)" : out;
}

json series_entry(const Trial& t, std::size_t rank) {
    json j{{"rank", rank},
           {"trial_id", t.trial_id},
           {"config_index", t.config_index},
           {"configuration", configuration_to_json(t.configuration)},
           {"status", t.complete ? "complete" : "incomplete"},
           {"mean_s", t.stats ? json(t.stats->mean) : json(nullptr)},
           {"elapsed_s", t.elapsed_s}};
    if (!t.complete)
        j["reason"] = t.reason;
    return j;
}

}  // namespace

RunReport build_report(const ReportContext& context, std::span<const Trial> trials,
                       const Trial& baseline) {
    if (!baseline.complete || !baseline.stats)
        throw ReportError("baseline trial is incomplete (" + baseline.reason +
                          "); no reference for improvement");
    RunReport r;
    r.context = context;
    r.baseline_config_index = baseline.config_index;
    r.baseline_mean = baseline.stats->mean;
    r.total_elapsed_s = baseline.elapsed_s;

    std::vector<Trial> complete;
    std::vector<Trial> incomplete;
    for (const auto& t : trials) {
        if (t.baseline)
            continue;
        r.total_elapsed_s += t.elapsed_s;
        (t.complete && t.stats ? complete : incomplete).push_back(t);
    }
    std::sort(complete.begin(), complete.end(), [](const Trial& a, const Trial& b) {
        if (a.stats->mean != b.stats->mean)
            return a.stats->mean < b.stats->mean;
        return a.trial_id < b.trial_id;
    });
    std::sort(incomplete.begin(), incomplete.end(),
              [](const Trial& a, const Trial& b) { return a.trial_id < b.trial_id; });
    r.complete = complete.size();
    r.incomplete = incomplete.size();

    if (const Trial* best = best_trial(trials)) {
        r.best = BestSummary{best->trial_id, best->config_index, best->configuration,
                             best->stats->mean};
        r.improvement = improvement_percent(r.baseline_mean, best->stats->mean);
    }
    r.sorted_series = std::move(complete);
    r.sorted_series.insert(r.sorted_series.end(), std::make_move_iterator(incomplete.begin()),
                           std::make_move_iterator(incomplete.end()));
    return r;
}

RunReport report_from_log(const LoadedLog& log) {
    const Trial* baseline = log.baseline();
    if (!baseline)
        throw ReportError("trial log has no baseline trial");
    ReportContext ctx;
    ctx.run_id = log.header.run_id;
    ctx.strategy = log.header.spec.value("strategy", json::object()).value("type", "");
    ctx.space = log.space;
    return build_report(ctx, log.trials, *baseline);
}

json report_to_json(const RunReport& r) {
    json series = json::array();
    for (std::size_t i = 0; i < r.sorted_series.size(); ++i)
        series.push_back(series_entry(r.sorted_series[i], i + 1));
    json best = nullptr;
    if (r.best) {
        best = {{"trial_id", r.best->trial_id},
                {"config_index", r.best->config_index},
                {"configuration", configuration_to_json(r.best->configuration)},
                {"mean_s", r.best->mean}};
    }
    const auto* space = r.context.space.get();
    return {{"run_id", r.context.run_id},
            {"strategy", r.context.strategy},
            {"space", space ? space->name() : ""},
            {"cardinality", space ? space->cardinality() : 0},
            {"baseline", {{"config_index", r.baseline_config_index}, {"mean_s", r.baseline_mean}}},
            {"best", std::move(best)},
            {"improvement_percent", optional_number(r.improvement)},
            {"counts", {{"complete", r.complete}, {"incomplete", r.incomplete}}},
            {"total_elapsed_s", r.total_elapsed_s},
            {"sorted_series", std::move(series)}};
}

std::string report_to_text(const RunReport& r) {
    const auto* space = r.context.space.get();
    std::string out;
    out += fmt::format("run {} ({} search over '{}', {} configurations)\n", r.context.run_id,
                       r.context.strategy, space ? space->name() : "?",
                       space ? space->cardinality() : 0);
    out += fmt::format("baseline mean: {:.6g} s (config #{})\n", r.baseline_mean,
                       r.baseline_config_index);
    if (r.best) {
        out += fmt::format("best mean: {:.6g} s (trial {}, config #{}: {})\n", r.best->mean,
                           r.best->trial_id, r.best->config_index,
                           describe(space, r.best->configuration));
        out += fmt::format("improvement: {:.4f}%\n", *r.improvement);
    } else {
        out += "best mean: none (no complete trials)\n";
        out += "improvement: none\n";
    }
    out += fmt::format("trials: {} complete, {} incomplete; total elapsed {:.3f} s\n", r.complete,
                       r.incomplete, r.total_elapsed_s);
    return out;
}

namespace {

std::vector<Trial> by_trial_id(const RunReport& r) {
    std::vector<Trial> out = r.sorted_series;
    std::sort(out.begin(), out.end(),
              [](const Trial& a, const Trial& b) { return a.trial_id < b.trial_id; });
    return out;
}

RunSummary summarize(const RunReport& r, const std::optional<double>& global_best, double q) {
    RunSummary s;
    s.run_id = r.context.run_id;
    s.strategy = r.context.strategy;
    if (r.best)
        s.best_mean = r.best->mean;
    s.improvement = r.improvement;
    if (global_best)
        s.to_within = time_to_within(by_trial_id(r), *global_best, q);
    return s;
}

json summary_to_json(const RunSummary& s) {
    json to = nullptr;
    if (s.to_within)
        to = {{"trials", s.to_within->trials}, {"elapsed_s", s.to_within->elapsed_s}};
    return {{"run_id", s.run_id},
            {"strategy", s.strategy},
            {"best_mean_s", optional_number(s.best_mean)},
            {"improvement_percent", optional_number(s.improvement)},
            {"to_within_q", std::move(to)}};
}

}  // namespace

ComparisonReport compare_runs(const RunReport& a, const RunReport& b, double q) {
    const auto* sa = a.context.space.get();
    const auto* sb = b.context.space.get();
    if (!sa || !sb || sa->name() != sb->name() || sa->cardinality() != sb->cardinality() ||
        sa->to_json() != sb->to_json())
        throw ReportError("runs do not share the same search space");
    if (a.baseline_config_index != b.baseline_config_index)
        throw ReportError("runs do not share the same baseline configuration");
    if (!(q >= 0.0))
        throw ReportError("tolerance q must be non-negative");

    ComparisonReport c;
    c.q = q;
    if (a.best && b.best)
        c.global_best_mean = std::min(a.best->mean, b.best->mean);
    else if (a.best)
        c.global_best_mean = a.best->mean;
    else if (b.best)
        c.global_best_mean = b.best->mean;
    c.a = summarize(a, c.global_best_mean, q);
    c.b = summarize(b, c.global_best_mean, q);
    if (c.a.to_within && c.b.to_within && c.a.to_within->elapsed_s > 0.0)
        c.relative_time_saving = 1.0 - c.b.to_within->elapsed_s / c.a.to_within->elapsed_s;
    return c;
}

json comparison_to_json(const ComparisonReport& c) {
    return {{"q", c.q},
            {"global_best_mean_s", optional_number(c.global_best_mean)},
            {"a", summary_to_json(c.a)},
            {"b", summary_to_json(c.b)},
            {"relative_time_saving", optional_number(c.relative_time_saving)}};
}

std::string comparison_to_text(const ComparisonReport& c) {
    std::string out;
    auto num = [](const std::optional<double>& v, const char* f) {
        return v ? fmt::format(fmt::runtime(f), *v) : std::string("none");
    };
    out += fmt::format("near-optimal tolerance q = {}\n", c.q);
    out += fmt::format("global best mean: {} s\n", num(c.global_best_mean, "{:.6g}"));
    for (const auto* s : {&c.a, &c.b}) {
        out += fmt::format("{} ({}): best {} s, improvement {}%, ", s->run_id, s->strategy,
                           num(s->best_mean, "{:.6g}"), num(s->improvement, "{:.4f}"));
        if (s->to_within)
            out += fmt::format("within q after {} trials / {:.3f} s\n", s->to_within->trials,
                               s->to_within->elapsed_s);
        else
            out += "never within q\n";
    }
    out += fmt::format("relative time saving (b vs a): {}\n",
                       c.relative_time_saving ? fmt::format("{:.2f}%", 100.0 * *c.relative_time_saving)
                                              : std::string("none"));
    return out;
}

namespace {

std::string export_csv(const RunReport& r) {
    std::string out = fmt::format("# baseline_mean_s={}\n", r.baseline_mean);
    out += "rank,config_index,mean_s,status\n";
    for (std::size_t i = 0; i < r.sorted_series.size(); ++i) {
        const auto& t = r.sorted_series[i];
        out += fmt::format("{},{},{},{}\n", i + 1, t.config_index,
                           t.stats ? fmt::format("{}", t.stats->mean) : std::string(),
                           t.complete ? "complete" : "incomplete");
    }
    return out;
}

std::string export_svg(const RunReport& r) {
    constexpr double kWidth = 800, kHeight = 420;
    constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const std::size_t n = r.sorted_series.size();

    double lo = r.baseline_mean, hi = r.baseline_mean;
    for (std::size_t i = 0; i < r.complete; ++i) {
        lo = std::min(lo, r.sorted_series[i].stats->mean);
        hi = std::max(hi, r.sorted_series[i].stats->mean);
    }
    const double span = hi > lo ? hi - lo : std::max(std::abs(hi) * 0.1, 1e-3);
    lo -= 0.05 * span;
    hi += 0.05 * span;
    if (hi == lo)
        hi = lo + 1.0;
    auto x_at = [&](double slot) { return kLeft + plot_w * slot / std::max<std::size_t>(n, 1); };
    auto y_at = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };

    std::string out;
    out += fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
        "viewBox=\"0 0 {} {}\" font-family=\"sans-serif\" font-size=\"12\">\n",
        kWidth, kHeight, kWidth, kHeight);
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += fmt::format("<text x=\"{}\" y=\"20\" font-size=\"14\">{} search, run {}: mean latency "
                       "per configuration, sorted</text>\n",
                       kLeft, r.context.strategy, r.context.run_id);

    if (r.incomplete > 0) {
        const double x0 = x_at(static_cast<double>(r.complete));
        out += fmt::format("<rect class=\"incomplete\" data-count=\"{}\" x=\"{:.2f}\" y=\"{}\" "
                           "width=\"{:.2f}\" height=\"{}\" fill=\"#d62728\" fill-opacity=\"0.25\"/>\n",
                           r.incomplete, x0, kTop, kLeft + plot_w - x0, plot_h);
    }

    out += fmt::format("<line class=\"axis\" x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" "
                       "stroke=\"black\"/>\n",
                       kLeft, kTop, kTop + plot_h);
    out += fmt::format("<line class=\"axis\" x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" "
                       "stroke=\"black\"/>\n",
                       kLeft, kTop + plot_h, kLeft + plot_w);
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4.0;
        out += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">{:.4g}</text>\n",
                           kLeft - 6, y_at(v) + 4, v);
    }
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">configurations sorted by "
                       "mean latency (n={})</text>\n",
                       kLeft + plot_w / 2, kHeight - 15, n);
    out += fmt::format("<text x=\"15\" y=\"{0}\" transform=\"rotate(-90 15 {0})\" "
                       "text-anchor=\"middle\">mean latency (s)</text>\n",
                       kTop + plot_h / 2);

    if (r.complete > 0) {
        out += "<polyline class=\"series\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < r.complete; ++i) {
            if (i)
                out += ' ';
            out += fmt::format("{:.2f},{:.2f}", x_at(i + 0.5), y_at(r.sorted_series[i].stats->mean));
        }
        out += "\"/>\n";
    }

    const double yb = y_at(r.baseline_mean);
    out += fmt::format("<line class=\"baseline\" data-value=\"{}\" x1=\"{}\" y1=\"{:.2f}\" "
                       "x2=\"{}\" y2=\"{:.2f}\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n",
                       r.baseline_mean, kLeft, yb, kLeft + plot_w, yb);
    out += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\" fill=\"#d62728\">baseline "
                       "{:.4g} s</text>\n",
                       kLeft + plot_w - 4, yb - 4, r.baseline_mean);
    out += "</svg>\n";
    return out;
}

}  // namespace

std::string export_series(const RunReport& report, std::string_view format) {
    if (format == "csv")
        return export_csv(report);
    if (format == "svg")
        return export_svg(report);
    throw ReportError("unknown export format '" + std::string(format) + "'");
}

}  // namespace microtune
