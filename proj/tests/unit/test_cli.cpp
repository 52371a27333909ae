#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include "test_support.hpp"

namespace {

struct Output {
    int status = -1;
    std::string text;
};

Output run_cli(const std::string& args) {
    const std::string cmd = std::string(MICROTUNE_CLI_PATH) + " " + args + " 2>&1";
    Output out;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0)
        out.text.append(buf, n);
    const int raw = ::pclose(pipe);
    out.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return out;
}

std::string data(const std::string& rel) {
    return (testing::data_dir() / rel).string();
}

}  // namespace

TEST_CASE("cardinality command") {
    auto full = run_cli("cardinality " + data("spaces/reference_jvm_container.json"));
    CHECK(full.status == 0);
    CHECK(full.text == "177147\n");
    auto heap = run_cli("cardinality --enable heap " + data("spaces/s2.json"));
    CHECK(heap.text == "2\n");
    auto both = run_cli("cardinality --enable gc,heap " + data("spaces/s2.json"));
    CHECK(both.text == "6\n");
}

TEST_CASE("validate-space names the offending parameter") {
    testing::TempDir dir;
    const auto bad = dir / "bad.json";
    std::ofstream(bad) << R"({"parameters":[{"name":"gc","kind":"categorical","values":["serial","g1"],"default":"cms","render":{"template":"--gc={value}"}}]})";
    auto out = run_cli("validate-space " + bad.string());
    CHECK(out.status == 1);
    CHECK(out.text.find("gc") != std::string::npos);
    CHECK(out.text.find("default not in values") != std::string::npos);

    auto ok = run_cli("validate-space " + data("spaces/s2.json"));
    CHECK(ok.status == 0);
    CHECK(ok.text.find("cardinality 6") != std::string::npos);
}

TEST_CASE("run then report") {
    testing::TempDir dir;
    const auto log = (dir / "grid.jsonl").string();
    auto run = run_cli("run -q --no-sync --run-id g1 --log " + log + " " + data("runs/sim1_grid.json"));
    CHECK(run.status == 0);
    CHECK(run.text.find("finished") != std::string::npos);

    auto text = run_cli("report " + log);
    CHECK(text.status == 0);
    CHECK(text.text.find("best mean: 0.684 s") != std::string::npos);
    CHECK(text.text.find("improvement: 14.5000%") != std::string::npos);

    auto csv = run_cli("report --format csv " + log);
    CHECK(csv.text.rfind("# baseline_mean_s=0.8\nrank,config_index,mean_s,status\n1,5,", 0) == 0);

    const auto svg_path = (dir / "plot.svg").string();
    CHECK(run_cli("report --format svg -o " + svg_path + " " + log).status == 0);
    std::ifstream svg(svg_path);
    std::string svg_text((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
    CHECK(svg_text.find("class=\"baseline\"") != std::string::npos);

    const auto rlog = (dir / "random.jsonl").string();
    CHECK(run_cli("run -q --no-sync --run-id r1 --log " + rlog + " " + data("runs/sim1_random.json")).status == 0);
    auto cmp = run_cli("compare --format json " + log + " " + rlog);
    CHECK(cmp.status == 0);
    auto j = nlohmann::json::parse(cmp.text);
    CHECK(j["global_best_mean_s"].get<double>() == doctest::Approx(0.684));
}

TEST_CASE("errors exit nonzero") {
    CHECK(run_cli("report /nonexistent/log.jsonl").status == 1);
    CHECK(run_cli("frobnicate").status != 0);
    CHECK(run_cli("report --format png x").status != 0);
}
