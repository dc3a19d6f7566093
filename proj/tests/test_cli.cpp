#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "agentforest/cli.hpp"
#include "agentforest/core.hpp"
#include "stub_server.hpp"

using namespace agentforest;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"agentforest"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("agentforest-cli-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_tasks(const fs::path& dir, int count = 5) {
    const auto path = dir / "tasks.jsonl";
    std::ofstream out(path);
    for (int i = 0; i < count; ++i)
        out << R"({"id":"t)" << i
            << R"(","prompt":"Pick the letter B.","kind":"categorical",)"
            << R"("options":["A","B","C","D"],"gold":"B"})" << "\n";
    return path;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("int list parsing") {
    CHECK(parse_int_list("1,10,20") == std::vector<int>{1, 10, 20});
    CHECK(parse_int_list("7") == std::vector<int>{7});
    CHECK_THROWS_AS(parse_int_list(""), config_error);
}

TEST_CASE("default curve sizes clip to n and always include n") {
    CHECK(default_curve_sizes(40) == std::vector<int>{1, 10, 20, 30, 40});
    CHECK(default_curve_sizes(25) == std::vector<int>{1, 10, 20, 25});
    CHECK(default_curve_sizes(1) == std::vector<int>{1});
}

TEST_CASE("curve csv round-trips through its own parser") {
    std::vector<CurvePoint> points;
    for (int m : {1, 10, 40}) {
        CurvePoint p;
        p.m = m;
        p.mean_accuracy = 0.1 * m / 40.0 + 0.5;
        p.std_error = 0.01;
        p.n_runs = 10;
        points.push_back(p);
    }
    const auto parsed = parse_curve_csv(curve_csv(points));
    REQUIRE(parsed.size() == points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        CHECK(parsed[i].m == points[i].m);
        CHECK(parsed[i].mean_accuracy == doctest::Approx(points[i].mean_accuracy));
        CHECK(parsed[i].std_error == doctest::Approx(points[i].std_error));
        CHECK(parsed[i].n_runs == points[i].n_runs);
    }
    CHECK_THROWS_AS(parse_curve_csv("nope"), config_error);
}

TEST_CASE("run writes one record per run and task plus a summary") {
    const auto dir = fresh_dir("run-basic");
    const auto tasks = write_tasks(dir, 5);
    const auto out = dir / "out";
    const int rc = run_cli({"run", "--tasks", tasks.string(), "--out", out.string(),
                            "--backend", "sim", "--sim-p-correct", "0.7", "--sim-k-wrong", "3",
                            "--n", "40", "--runs", "10", "--seed", "5"});
    CHECK(rc == kExitOk);

    const auto records = load_records_jsonl((out / "records.jsonl").string());
    CHECK(records.size() == 50);
    for (const auto& r : records) {
        CHECK(r.per_sample.size() == 40);
        CHECK(r.vote_curve.size() == 40);
        CHECK(r.correct_at_full.has_value());
    }
    const auto summary = parse_curve_csv(slurp(out / "summary.csv"));
    CHECK(summary.size() == 5);  // 1,10,20,30,40
    CHECK(summary.back().m == 40);
    CHECK(summary.back().mean_accuracy > summary.front().mean_accuracy);
    CHECK(fs::exists(out / "meta.json"));
}

TEST_CASE("identical flags reproduce records byte for byte") {
    const auto dir = fresh_dir("run-determinism");
    const auto tasks = write_tasks(dir, 3);
    const std::vector<std::string> common{"run",  "--tasks", tasks.string(), "--backend", "sim",
                                          "--sim-p-correct", "0.5", "--sim-k-wrong", "3",
                                          "--n", "10", "--runs", "3", "--seed", "21"};
    auto args1 = common;
    args1.push_back("--out");
    args1.push_back((dir / "out1").string());
    auto args2 = common;
    args2.push_back("--out");
    args2.push_back((dir / "out2").string());
    REQUIRE(run_cli(args1) == kExitOk);
    REQUIRE(run_cli(args2) == kExitOk);
    CHECK(slurp(dir / "out1" / "records.jsonl") == slurp(dir / "out2" / "records.jsonl"));
    CHECK(slurp(dir / "out1" / "summary.csv") == slurp(dir / "out2" / "summary.csv"));
}

TEST_CASE("missing API key for an http backend exits with the backend code") {
    const auto dir = fresh_dir("run-nokey");
    const auto tasks = write_tasks(dir, 1);
    unsetenv("AF_CLI_MISSING_KEY");
    const int rc = run_cli({"run", "--tasks", tasks.string(), "--out", (dir / "out").string(),
                            "--backend", "openai", "--base-url", "http://127.0.0.1:9",
                            "--api-key-env", "AF_CLI_MISSING_KEY", "--n", "2", "--runs", "1"});
    CHECK(rc == kExitBackend);
}

TEST_CASE("config errors exit with code 2") {
    const auto dir = fresh_dir("run-config");
    const auto tasks = write_tasks(dir, 1);
    // unknown flag
    CHECK(run_cli({"run", "--tasks", tasks.string(), "--out", (dir / "o").string(),
                   "--no-such-flag"}) == kExitConfig);
    // missing task file
    CHECK(run_cli({"run", "--tasks", (dir / "absent.jsonl").string(), "--out",
                   (dir / "o").string()}) == kExitConfig);
    // curve size out of range
    CHECK(run_cli({"run", "--tasks", tasks.string(), "--out", (dir / "o").string(), "--n", "5",
                   "--curve-sizes", "1,50"}) == kExitConfig);
    // malformed task line
    const auto bad = dir / "bad.jsonl";
    std::ofstream(bad) << "{not json}\n";
    CHECK(run_cli({"run", "--tasks", bad.string(), "--out", (dir / "o").string()}) ==
          kExitConfig);
}

TEST_CASE("malformed records name the offending line") {
    const auto dir = fresh_dir("analyze-bad");
    const auto bad = dir / "records.jsonl";
    std::ofstream(bad) << R"({"run_id":"a"})" << "\n" << "{broken\n";
    CHECK_THROWS_WITH_AS(load_records_jsonl(bad.string()), doctest::Contains(":1:"),
                         config_error);
    CHECK(run_cli({"analyze", "--records", bad.string(), "--out", (dir / "o").string()}) ==
          kExitConfig);
}

TEST_CASE("partial task failures exit with code 4 and keep good records") {
    const auto dir = fresh_dir("run-partial");
    // second task is categorical without a gold answer: the simulator rejects
    // it while the first task succeeds
    const auto path = dir / "tasks.jsonl";
    std::ofstream(path) << R"({"id":"ok","prompt":"p","kind":"categorical",)"
                        << R"("options":["A","B"],"gold":"A"})" << "\n"
                        << R"({"id":"broken","prompt":"p","kind":"categorical",)"
                        << R"("options":["A","B"]})" << "\n";
    const int rc = run_cli({"run", "--tasks", path.string(), "--out", (dir / "out").string(),
                            "--backend", "sim", "--n", "3", "--runs", "2"});
    CHECK(rc == kExitPartial);
    const auto records = load_records_jsonl((dir / "out" / "records.jsonl").string());
    CHECK(records.size() == 2);  // one per run for the healthy task
}

TEST_CASE("analyze emits curve, anova, gain and token reports") {
    const auto dir = fresh_dir("analyze-basic");
    const auto tasks = write_tasks(dir, 4);
    const auto out = dir / "out";
    REQUIRE(run_cli({"run", "--tasks", tasks.string(), "--out", out.string(), "--backend",
                     "sim", "--sim-p-correct", "0.6", "--sim-k-wrong", "3", "--n", "40",
                     "--runs", "10", "--seed", "3"}) == kExitOk);

    const auto adir = dir / "analysis";
    REQUIRE(run_cli({"analyze", "--records", (out / "records.jsonl").string(), "--out",
                     adir.string(), "--curve-sizes", "1,10,20,30,40", "--token-report"}) ==
            kExitOk);

    const auto curve = parse_curve_csv(slurp(adir / "curve.csv"));
    CHECK(curve.size() == 5);
    CHECK(curve.front().n_runs == 10);

    const auto anova = slurp(adir / "anova.txt");
    CHECK(anova.find("F = ") != std::string::npos);
    CHECK(anova.find("p = ") != std::string::npos);

    const auto gain = slurp(adir / "gain.txt");
    CHECK(gain.find("relative_gain") != std::string::npos);

    const auto tokens = slurp(adir / "tokens.csv");
    CHECK(tokens.find("method,task,mean_tokens,stddev") == 0);
    CHECK(tokens.find("vanilla,t0,") != std::string::npos);

    // simulated tokens are whitespace counts by construction:
    // prompt "Pick the letter B." = 4 tokens, reply "The answer is (X)." = 4
    std::stringstream ss(tokens);
    std::string line;
    std::getline(ss, line);
    std::getline(ss, line);
    CHECK(line.find(",8,") != std::string::npos);
}

TEST_CASE("perfect agents leave anova undefined") {
    const auto dir = fresh_dir("analyze-perfect");
    const auto tasks = write_tasks(dir, 2);
    const auto out = dir / "out";
    REQUIRE(run_cli({"run", "--tasks", tasks.string(), "--out", out.string(), "--backend",
                     "sim", "--sim-p-correct", "1.0", "--n", "20", "--runs", "5"}) == kExitOk);
    const auto adir = dir / "analysis";
    REQUIRE(run_cli({"analyze", "--records", (out / "records.jsonl").string(), "--out",
                     adir.string()}) == kExitOk);
    const auto anova = slurp(adir / "anova.txt");
    CHECK(anova.find("F undefined") != std::string::npos);
    const auto curve = parse_curve_csv(slurp(adir / "curve.csv"));
    for (const auto& p : curve) CHECK(p.mean_accuracy == 1.0);
}

TEST_CASE("synth emits a task file and sidecar per cell") {
    const auto dir = fresh_dir("synth-cells");
    const int rc = run_cli({"synth", "--I", "5,10", "--S", "2", "--K", "4", "--episodes", "6",
                            "--seed", "9", "--out", dir.string()});
    CHECK(rc == kExitOk);
    for (const char* stem : {"I5_S2_K4", "I10_S2_K4"}) {
        const auto tasks = load_tasks_jsonl((dir / ("tasks_" + std::string(stem) + ".jsonl")).string());
        CHECK(tasks.size() == 6);
        for (const auto& t : tasks) {
            CHECK(t.kind == AnswerKind::categorical);
            CHECK(t.option_labels.size() == 4);
            CHECK(t.gold.has_value());
        }
        const auto side = slurp(dir / ("sidecar_" + std::string(stem) + ".json"));
        CHECK(side.find("boundaries") != std::string::npos);
        CHECK(side.find("interval_probs") != std::string::npos);
    }
}

TEST_CASE("chained synth sweeps emit a gain table") {
    const auto dir = fresh_dir("synth-chain");
    const int rc = run_cli({"synth", "--I", "5", "--S", "2", "--K", "4", "--episodes", "4",
                            "--seed", "2", "--out", dir.string(), "--chain", "--n", "10",
                            "--runs", "4", "--temperature", "0", "--sim-base-skill", "2.0"});
    CHECK(rc == kExitOk);
    const auto gain = slurp(dir / "gain.csv");
    CHECK(gain.find("I,S,K,p_single,p_multi,eta,se_eta") == 0);
    CHECK(gain.find("\n5,2,4,") != std::string::npos);
}

TEST_CASE("hierarchical runs drive the sidecar cell end to end") {
    const auto dir = fresh_dir("cli-hier");
    REQUIRE(run_cli({"synth", "--I", "10", "--S", "2", "--K", "8", "--episodes", "5", "--seed",
                     "4", "--out", dir.string()}) == kExitOk);
    const auto out = dir / "out";
    const int rc = run_cli({"run", "--tasks", (dir / "tasks_I10_S2_K8.jsonl").string(),
                            "--sidecar", (dir / "sidecar_I10_S2_K8.json").string(), "--out",
                            out.string(), "--backend", "sim", "--sim-mode", "synthetic",
                            "--sim-base-skill", "2.0", "--sim-I", "10", "--sim-S", "2",
                            "--method", "hierarchical", "--stages", "2,8", "--n", "5", "--runs",
                            "2", "--temperature", "0", "--curve-sizes", "1,5"});
    CHECK(rc == kExitOk);
    const auto records = load_records_jsonl((out / "records.jsonl").string());
    CHECK(records.size() == 10);
}

TEST_CASE("stepwise runs accept sidecar-generated plans") {
    const auto dir = fresh_dir("cli-stepwise");
    REQUIRE(run_cli({"synth", "--I", "5", "--S", "3", "--K", "2", "--episodes", "4", "--seed",
                     "6", "--out", dir.string()}) == kExitOk);
    const auto out = dir / "out";
    const int rc = run_cli({"run", "--tasks", (dir / "tasks_I5_S3_K2.jsonl").string(),
                            "--sidecar", (dir / "sidecar_I5_S3_K2.json").string(), "--out",
                            out.string(), "--backend", "sim", "--sim-mode", "stepwise",
                            "--sim-step-p", "0.9", "--method", "stepwise", "--n", "5", "--runs",
                            "2", "--curve-sizes", "1,5"});
    CHECK(rc == kExitOk);
    const auto records = load_records_jsonl((out / "records.jsonl").string());
    CHECK(records.size() == 8);
}

TEST_CASE("config files fill in defaults that flags override") {
    const auto dir = fresh_dir("cli-config");
    const auto tasks = write_tasks(dir, 1);
    const auto cfg = dir / "agentforest.ini";
    std::ofstream(cfg) << "[run]\nn=7\nruns=2\nbackend=sim\nsim-p-correct=1.0\n";
    const auto out = dir / "out";
    REQUIRE(run_cli({"--config", cfg.string(), "run", "--tasks", tasks.string(), "--out",
                     out.string(), "--runs", "3", "--curve-sizes", "1,7"}) == kExitOk);
    const auto records = load_records_jsonl((out / "records.jsonl").string());
    CHECK(records.size() == 3);               // flag beat the config file
    CHECK(records[0].per_sample.size() == 7);  // config supplied n
}

TEST_CASE("replay through the CLI is byte-stable across reruns") {
    const auto dir = fresh_dir("cli-replay");
    const auto tasks = write_tasks(dir, 2);
    const auto cache = dir / "cache";
    const std::vector<std::string> common{
        "run", "--tasks", tasks.string(), "--backend", "replay", "--replay-inner", "sim",
        "--cache-dir", cache.string(), "--sim-p-correct", "0.5", "--sim-k-wrong", "3",
        "--n", "6", "--runs", "2", "--seed", "13", "--curve-sizes", "1,6"};
    auto args1 = common;
    args1.push_back("--out");
    args1.push_back((dir / "out1").string());
    auto args2 = common;
    args2.push_back("--out");
    args2.push_back((dir / "out2").string());
    REQUIRE(run_cli(args1) == kExitOk);
    REQUIRE(run_cli(args2) == kExitOk);
    CHECK(slurp(dir / "out1" / "records.jsonl") == slurp(dir / "out2" / "records.jsonl"));
    CHECK(fs::exists(cache));
}
