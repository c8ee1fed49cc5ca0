// Drives the built binary end to end through a shell, checking exit codes,
// report files and stderr texts.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
    int exit_code = -1;
    std::string stdout_text;
    std::string stderr_text;
};

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() /
                     ("xmamba_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const fs::path out = work_dir() / "stdout.txt";
    const fs::path err = work_dir() / "stderr.txt";
    const std::string cmd = env_prefix + std::string(XMAMBA_CLI_PATH) + " " + args + " > " +
                            out.string() + " 2> " + err.string();
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WEXITSTATUS(raw);
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p);
        std::ostringstream oss;
        oss << f.rdbuf();
        return oss.str();
    };
    r.stdout_text = slurp(out);
    r.stderr_text = slurp(err);
    return r;
}

fs::path write_file(const std::string& name, const std::string& content) {
    const fs::path p = work_dir() / name;
    std::ofstream f(p);
    f << content;
    return p;
}

// 64x64 image, 2x2 grid: fast enough to run many times
std::string tiny_config_text() {
    return R"({
      "image": {"height": 64, "width": 64},
      "channels": {"c3": 2, "c4": 3, "c5": 4},
      "block": {"target_grid": [2, 2], "local_window": [1, 1],
                "state_dim": 3, "hidden": 8, "n_single": 1},
      "seed": 11
    })";
}

json report_from(const fs::path& p) {
    std::ifstream f(p);
    json j;
    f >> j;
    return j;
}

}  // namespace

TEST(Cli, DemoWritesReportAndIsDeterministic) {
    const fs::path cfg = write_file("tiny.json", tiny_config_text());
    const fs::path rep1 = work_dir() / "demo1.json";
    const fs::path rep2 = work_dir() / "demo2.json";
    ASSERT_EQ(run_cli("demo --config " + cfg.string() + " --out " + rep1.string()).exit_code,
              0);
    ASSERT_EQ(run_cli("demo --config " + cfg.string() + " --out " + rep2.string()).exit_code,
              0);
    const json r1 = report_from(rep1), r2 = report_from(rep2);
    EXPECT_EQ(r1.at("determinism_hash"), r2.at("determinism_hash"));
    EXPECT_TRUE(r1.at("all_finite").get<bool>());

    const fs::path rep3 = work_dir() / "demo3.json";
    ASSERT_EQ(run_cli("demo --config " + cfg.string() + " --seed 999 --out " +
                      rep3.string())
                  .exit_code,
              0);
    EXPECT_NE(report_from(rep3).at("determinism_hash"), r1.at("determinism_hash"));
}

TEST(Cli, CheckPassesAndPrintsSuiteLines) {
    const RunResult r = run_cli("check");
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_NE(r.stdout_text.find("PASS tensors"), std::string::npos);
    EXPECT_NE(r.stdout_text.find("PASS scanpaths"), std::string::npos);
    EXPECT_EQ(r.stdout_text.find("FAIL"), std::string::npos);
}

TEST(Cli, CheckFilterRunsSubset) {
    const fs::path rep = work_dir() / "check_ssm.json";
    const RunResult r = run_cli("check --filter ssm --out " + rep.string());
    EXPECT_EQ(r.exit_code, 0);
    const json j = report_from(rep);
    ASSERT_EQ(j.at("suites").size(), 1u);
    EXPECT_EQ(j.at("suites")[0].at("name"), "ssm");
}

TEST(Cli, ConfigErrorNamesFieldAndExitsTwo) {
    const fs::path cfg = write_file("bad.json", R"({"block": {"n_single": -3}})");
    const RunResult r = run_cli("demo --config " + cfg.string());
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.stderr_text.find("config error"), std::string::npos);
    EXPECT_NE(r.stderr_text.find("block"), std::string::npos);
}

TEST(Cli, UnknownConfigKeyRejected) {
    const fs::path cfg = write_file("typo.json", R"({"blok": {}})");
    const RunResult r = run_cli("check --config " + cfg.string());
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.stderr_text.find("blok"), std::string::npos);
}

TEST(Cli, OffsetsFixtureAndErrorPaths) {
    std::ostringstream fixture;
    for (int i = 0; i < 10; ++i) {
        fixture << R"({"image_id": "a", "modality": "rgb", "x": )" << 25 * i
                << R"(, "y": 0, "w": 6, "h": 6, "class": "t"})" << "\n";
        fixture << R"({"image_id": "a", "modality": "ir", "x": )"
                << 25 * i + (i < 5 ? 3 : 0) << R"(, "y": 0, "w": 6, "h": 6, "class": "t"})"
                << "\n";
    }
    const fs::path input = write_file("offsets.jsonl", fixture.str());
    const fs::path rep = work_dir() / "offsets.json";
    const RunResult r = run_cli("offsets --input " + input.string() + " --out " +
                                rep.string());
    ASSERT_EQ(r.exit_code, 0);
    const json j = report_from(rep);
    EXPECT_EQ(j.at("matched"), 10);
    EXPECT_DOUBLE_EQ(j.at("misaligned_fraction").get<double>(), 0.5);

    // malformed line 3 must be named
    const fs::path bad = write_file("bad.jsonl",
                                    R"({"image_id":"a","modality":"rgb","x":0,"y":0,"w":5,"h":5,"class":"t"}
{"image_id":"a","modality":"ir","x":0,"y":0,"w":5,"h":5,"class":"t"}
{oops
)");
    const RunResult rb = run_cli("offsets --input " + bad.string());
    EXPECT_NE(rb.exit_code, 0);
    EXPECT_NE(rb.stderr_text.find("line 3"), std::string::npos);
}

TEST(Cli, EnvVarOverridesOutputDirectoryOnly) {
    const fs::path cfg = write_file("tiny2.json", tiny_config_text());
    const fs::path env_dir = work_dir() / "env_out";
    fs::create_directories(env_dir);
    const RunResult r = run_cli("bench --config " + cfg.string() + " --out bench.json",
                                "XMAMBA_OUT_DIR=" + env_dir.string() + " ");
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_TRUE(fs::exists(env_dir / "bench.json"));
}

TEST(Cli, BenchScalesLinearly) {
    const fs::path rep1 = work_dir() / "bench64.json";
    const fs::path rep2 = work_dir() / "bench128.json";
    ASSERT_EQ(run_cli("bench --tokens 64 --out " + rep1.string()).exit_code, 0);
    ASSERT_EQ(run_cli("bench --tokens 128 --out " + rep2.string()).exit_code, 0);
    const json a = report_from(rep1), b = report_from(rep2);
    EXPECT_EQ(b.at("counts").at("mamba_total").get<long long>(),
              2 * a.at("counts").at("mamba_total").get<long long>());
}

TEST(Cli, DemoParamsRoundTrip) {
    const fs::path cfg = write_file("tiny3.json", tiny_config_text());
    const fs::path params = work_dir() / "params.json";
    const fs::path rep1 = work_dir() / "demo_save.json";
    const fs::path rep2 = work_dir() / "demo_load.json";
    ASSERT_EQ(run_cli("demo --config " + cfg.string() + " --save-params " +
                      params.string() + " --out " + rep1.string())
                  .exit_code,
              0);
    ASSERT_EQ(run_cli("demo --config " + cfg.string() + " --load-params " +
                      params.string() + " --out " + rep2.string())
                  .exit_code,
              0);
    EXPECT_EQ(report_from(rep1).at("determinism_hash"),
              report_from(rep2).at("determinism_hash"));
}
