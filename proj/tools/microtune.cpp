// microtune command-line front end.
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "microtune/errors.hpp"
#include "microtune/report.hpp"
#include "microtune/run_spec.hpp"
#include "microtune/search_space.hpp"
#include "microtune/server.hpp"
#include "microtune/trial_log.hpp"

namespace fs = std::filesystem;
using namespace microtune;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out)
        throw Error("cannot write '" + out_path + "'");
    out << text;
}

int cmd_validate(const std::string& file) {
    auto space = load_space_file(file);
    std::size_t enabled = 0;
    for (const auto& p : space.parameters())
        enabled += p.enabled ? 1 : 0;
    std::cout << fmt::format("ok: space '{}' with {} parameters ({} enabled), cardinality {}\n",
                             space.name(), space.parameters().size(), enabled,
                             space.cardinality());
    return 0;
}

int cmd_cardinality(const std::string& file, const std::vector<std::string>& enable) {
    auto space = load_space_file(file);
    if (!enable.empty())
        space = space.with_enabled(enable);
    std::cout << space.cardinality() << "\n";
    return 0;
}

int cmd_run(const std::string& spec_file, std::string log, std::string run_id, bool no_sync,
            bool quiet) {
    auto spec = load_run_spec(spec_file);
    if (run_id.empty())
        run_id = generate_run_id();
    if (log.empty())
        log = (fs::path(env_or("MICROTUNE_DATA_DIR", ".")) / "runs" / (run_id + ".jsonl")).string();

    auto observer = [&](const Trial& t) {
        if (quiet)
            return;
        std::cerr << fmt::format("trial {:>5}{} config #{} {} {}\n", t.trial_id,
                                 t.baseline ? " (baseline)" : "", t.config_index,
                                 t.complete ? "complete" : "incomplete:" + t.reason,
                                 t.stats ? fmt::format("mean {:.6g} s", t.stats->mean) : "");
    };
    auto state = run_with_log(spec, run_id, log, observer, {}, !no_sync);

    std::cout << fmt::format("run {} {}; {} trials; log {}\n", run_id, to_string(state.status),
                             state.trials.size(), log);
    if (!state.stop_cause.empty())
        std::cout << "cause: " << state.stop_cause << "\n";
    if (state.baseline && state.baseline->complete) {
        ReportContext ctx{run_id, std::string(to_string(spec.plan.strategy.kind)), spec.plan.space};
        std::vector<Trial> all;
        all.push_back(*state.baseline);
        all.insert(all.end(), state.trials.begin(), state.trials.end());
        std::cout << report_to_text(build_report(ctx, all, *state.baseline));
    } else if (state.baseline) {
        std::cout << "baseline incomplete (" << state.baseline->reason << "); no improvement figure\n";
    }
    if (state.status == RunStatus::Stopped && !state.stop_cause.empty() &&
        state.stop_cause != "stop requested")
        return 2;
    return 0;
}

int cmd_report(const std::string& log_file, const std::string& format, const std::string& out) {
    auto log = load_trial_log(log_file);
    auto report = report_from_log(log);
    if (format == "text")
        write_output(report_to_text(report), out);
    else if (format == "json")
        write_output(report_to_json(report).dump(2) + "\n", out);
    else
        write_output(export_series(report, format), out);
    return 0;
}

int cmd_compare(const std::string& a, const std::string& b, double q, const std::string& format) {
    auto ra = report_from_log(load_trial_log(a));
    auto rb = report_from_log(load_trial_log(b));
    auto c = compare_runs(ra, rb, q);
    if (format == "json")
        std::cout << comparison_to_json(c).dump(2) << "\n";
    else
        std::cout << comparison_to_text(c);
    return 0;
}

int cmd_serve(std::string listen, std::string data_dir) {
    if (listen.empty())
        listen = env_or("MICROTUNE_LISTEN", "127.0.0.1:8080");
    if (data_dir.empty())
        data_dir = env_or("MICROTUNE_DATA_DIR", ".");
    auto [host, port] = parse_listen_address(listen);

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    ControlServer server(ServerOptions{data_dir, true});
    const int bound = server.start(host, port);
    spdlog::info("listening on {}:{} (data dir {})", host, bound, data_dir);
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {} received, shutting down", sig);
    server.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"microtune: grid and random search over service runtime configurations"};
    app.require_subcommand(1);

    std::string file;
    auto* validate = app.add_subcommand("validate-space", "Check a search-space file");
    validate->add_option("file", file, "Search-space JSON")->required();

    std::vector<std::string> enable;
    auto* card = app.add_subcommand("cardinality", "Print the number of configurations");
    card->add_option("file", file, "Search-space JSON")->required();
    card->add_option("--enable", enable, "Restrict the search to these parameters")
        ->delimiter(',');

    std::string log, run_id;
    bool no_sync = false, quiet = false;
    auto* run = app.add_subcommand("run", "Execute a run spec locally and write its trial log");
    run->add_option("spec", file, "Run spec JSON")->required();
    run->add_option("--log", log, "Trial log path (default $MICROTUNE_DATA_DIR/runs/<id>.jsonl)");
    run->add_option("--run-id", run_id, "Run identifier");
    run->add_flag("--no-sync", no_sync, "Skip fsync after each record");
    run->add_flag("-q,--quiet", quiet, "No per-trial progress");

    std::string format = "text", out;
    auto* report = app.add_subcommand("report", "Summarize a trial log");
    report->add_option("log", file, "Trial log")->required();
    report->add_option("--format", format, "text | json | csv | svg")
        ->check(CLI::IsMember({"text", "json", "csv", "svg"}));
    report->add_option("-o,--out", out, "Output file (default stdout)");

    std::string other;
    double q = kDefaultNearOptimalTolerance;
    std::string cmp_format = "text";
    auto* compare = app.add_subcommand("compare", "Compare two runs over the same space");
    compare->add_option("log_a", file, "Reference run (e.g. grid)")->required();
    compare->add_option("log_b", other, "Challenger run (e.g. random)")->required();
    compare->add_option("--q", q, "Near-optimal tolerance fraction");
    compare->add_option("--format", cmp_format, "text | json")
        ->check(CLI::IsMember({"text", "json"}));

    std::string listen, data_dir;
    auto* serve = app.add_subcommand("serve", "Start the HTTP/JSON control API");
    serve->add_option("--listen", listen, "host:port (default $MICROTUNE_LISTEN or 127.0.0.1:8080)");
    serve->add_option("--data-dir", data_dir, "Logs and specs root (default $MICROTUNE_DATA_DIR or .)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate)
            return cmd_validate(file);
        if (*card)
            return cmd_cardinality(file, enable);
        if (*run)
            return cmd_run(file, log, run_id, no_sync, quiet);
        if (*report)
            return cmd_report(file, format, out);
        if (*compare)
            return cmd_compare(file, other, q, cmp_format);
        if (*serve)
            return cmd_serve(listen, data_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
