// CLI harness: synthetic end-to-end demos, invariant suites, analytic FLOP
// accounting and annotation-offset audits, all emitting JSON reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "xmamba/xmamba.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_path;
};

xmamba::harness::RunConfig load_config(const CommonArgs& args) {
    xmamba::harness::RunConfig cfg = xmamba::harness::default_run_config();
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in) {
            throw xmamba::ConfigError("cannot open config file: " + args.config_path);
        }
        json j;
        try {
            in >> j;
        } catch (const json::parse_error& e) {
            throw xmamba::ConfigError(std::string("config parse error: ") + e.what());
        }
        cfg = xmamba::harness::run_config_from_json(j);
    }
    if (args.seed) cfg.seed = *args.seed;
    return cfg;
}

// XMAMBA_OUT_DIR overrides only the directory reports land in.
fs::path resolve_out_path(const xmamba::harness::RunConfig& cfg, const std::string& out) {
    fs::path dir = cfg.out_dir;
    if (const char* env = std::getenv("XMAMBA_OUT_DIR")) dir = env;
    if (out.empty()) return {};
    fs::path p(out);
    if (p.is_absolute()) return p;
    return dir / p;
}

void emit_report(const json& report, const xmamba::harness::RunConfig& cfg,
                 const std::string& out) {
    const fs::path path = resolve_out_path(cfg, out);
    if (path.empty()) {
        std::cout << report.dump(2) << "\n";
        return;
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw xmamba::ConfigError("cannot write report to " + path.string());
    f << report.dump(2) << "\n";
    std::cout << "report written to " << path.string() << "\n";
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--out", args.out_path,
                    "report file (relative paths land in the output directory)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-modal state-space harness"};
    app.require_subcommand(1);

    CommonArgs demo_args, check_args, bench_args, offsets_args;
    xmamba::harness::DemoOptions demo_opts;
    std::string check_filter;
    std::int64_t bench_tokens = 0;
    std::string offsets_input;

    CLI::App* demo = app.add_subcommand("demo", "run the synthetic end-to-end pipeline");
    add_common(demo, demo_args);
    demo->add_option("--save-params", demo_opts.save_params_path,
                     "write the parameter bundle used by this run");
    demo->add_option("--load-params", demo_opts.load_params_path,
                     "load a previously saved parameter bundle");
    demo->add_option("--pyramid-in", demo_opts.pyramid_in_path,
                     "replay the fusion neck on pyramid tensors from file");

    CLI::App* check = app.add_subcommand("check", "run the module invariant suites");
    add_common(check, check_args);
    check->add_option("--filter", check_filter, "run only suites whose name contains this");

    CLI::App* bench = app.add_subcommand("bench", "analytic multiply-add accounting");
    add_common(bench, bench_args);
    bench->add_option("--tokens", bench_tokens, "token count L (default: the config grid)");

    CLI::App* offsets = app.add_subcommand("offsets", "annotation offset statistics");
    add_common(offsets, offsets_args);
    offsets->add_option("--input", offsets_input, "line-delimited JSON annotation file")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (demo->parsed()) {
            const auto cfg = load_config(demo_args);
            emit_report(xmamba::harness::run_demo(cfg, demo_opts), cfg, demo_args.out_path);
        } else if (check->parsed()) {
            const auto cfg = load_config(check_args);
            const auto outcome = xmamba::harness::run_check(cfg, check_filter);
            for (const auto& suite : outcome.report.at("suites")) {
                std::cout << (suite.at("passed").get<bool>() ? "PASS " : "FAIL ")
                          << suite.at("name").get<std::string>() << " ("
                          << suite.at("checks").get<int>() << " checks)\n";
            }
            emit_report(outcome.report, cfg, check_args.out_path);
            return outcome.all_passed ? 0 : 1;
        } else if (bench->parsed()) {
            const auto cfg = load_config(bench_args);
            emit_report(xmamba::harness::run_bench(cfg, bench_tokens), cfg,
                        bench_args.out_path);
        } else if (offsets->parsed()) {
            const auto cfg = load_config(offsets_args);
            std::ifstream in(offsets_input);
            if (!in) throw xmamba::ParseError("cannot open input file: " + offsets_input);
            emit_report(xmamba::harness::run_offsets(cfg, in, offsets_input), cfg,
                        offsets_args.out_path);
        }
    } catch (const xmamba::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
