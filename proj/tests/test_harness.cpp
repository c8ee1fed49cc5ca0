#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "xmamba/harness.hpp"

using namespace xmamba;
using harness::RunConfig;
using nlohmann::json;

namespace {

// small geometry so demo runs are fast: 64x64 image, 2x2 token grid
RunConfig tiny_config() {
    RunConfig cfg = harness::default_run_config();
    cfg.image_h = 64;
    cfg.image_w = 64;
    cfg.channels.c3 = 2;
    cfg.channels.c4 = 3;
    cfg.channels.c5 = 4;
    cfg.block.channels = 4;
    cfg.block.hidden = 8;
    cfg.block.state_dim = 3;
    cfg.block.n_single = 1;
    cfg.block.grid_h = 2;
    cfg.block.grid_w = 2;
    cfg.block.window_h = 1;
    cfg.block.window_w = 1;
    return cfg;
}

}  // namespace

TEST(RunConfig, DefaultsEncodeBestFoundHyperparameters) {
    const RunConfig cfg = harness::default_run_config();
    EXPECT_EQ(cfg.block.grid_h, 8);
    EXPECT_EQ(cfg.block.grid_w, 8);
    EXPECT_EQ(cfg.block.window_h, 2);
    EXPECT_EQ(cfg.block.window_w, 2);
    EXPECT_EQ(cfg.block.n_single, 3);
    EXPECT_EQ(cfg.image_h, 640);
    EXPECT_EQ(cfg.image_w, 640);
    EXPECT_NO_THROW(harness::validate(cfg));
}

TEST(RunConfig, RoundTripThroughJson) {
    const RunConfig cfg = tiny_config();
    const RunConfig back = harness::run_config_from_json(harness::run_config_to_json(cfg));
    EXPECT_EQ(back.image_h, cfg.image_h);
    EXPECT_EQ(back.block.grid_h, cfg.block.grid_h);
    EXPECT_EQ(back.block.window_w, cfg.block.window_w);
    EXPECT_EQ(back.channels.c5, cfg.channels.c5);
    EXPECT_EQ(back.seed, cfg.seed);
}

TEST(RunConfig, PartialJsonMergesOverDefaults) {
    const RunConfig cfg = harness::run_config_from_json(json{{"seed", 7}});
    EXPECT_EQ(cfg.seed, 7u);
    EXPECT_EQ(cfg.block.n_single, 3);
}

TEST(RunConfig, ErrorsNameTheFieldPath) {
    try {
        harness::run_config_from_json(json{{"block", {{"n_single", -2}}}});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("block"), std::string::npos);
    }

    try {
        harness::run_config_from_json(json{{"image", {{"height", 100}}}});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("image"), std::string::npos);
    }

    try {
        harness::run_config_from_json(json{{"block", {{"target_gird", {8, 8}}}}});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("block.target_gird"), std::string::npos);
    }

    try {
        harness::run_config_from_json(json{{"offsets", {{"mode", "fuzzy"}}}});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("offsets.mode"), std::string::npos);
    }
}

TEST(RunConfig, WindowGridInteractionValidated) {
    json j{{"block", {{"target_grid", {8, 8}}, {"local_window", {4, 4}}}}};
    EXPECT_THROW(harness::run_config_from_json(j), ConfigError);
}

TEST(Demo, ShapesNormsAndDeterminism) {
    const RunConfig cfg = tiny_config();
    const json r1 = harness::run_demo(cfg);
    const json r2 = harness::run_demo(cfg);
    EXPECT_EQ(r1.at("shapes").at("s3").get<std::vector<int>>(),
              (std::vector<int>{8, 8, 2}));
    EXPECT_EQ(r1.at("shapes").at("s5").get<std::vector<int>>(),
              (std::vector<int>{2, 2, 4}));
    EXPECT_EQ(r1.at("shapes").at("p3").get<std::vector<int>>(),
              (std::vector<int>{8, 8, 2}));
    EXPECT_TRUE(r1.at("all_finite").get<bool>());
    EXPECT_EQ(r1.at("determinism_hash"), r2.at("determinism_hash"));

    RunConfig other = cfg;
    other.seed = cfg.seed + 1;
    const json r3 = harness::run_demo(other);
    EXPECT_NE(r1.at("determinism_hash"), r3.at("determinism_hash"));
}

TEST(Demo, ReportIsSchemaStable) {
    const json r = harness::run_demo(tiny_config());
    for (const char* key : {"command", "seed", "image", "pyramid_source", "shapes", "norms",
                            "all_finite", "determinism_hash", "config"}) {
        EXPECT_TRUE(r.contains(key)) << key;
    }
}

TEST(Demo, ParamsSaveLoadReproducesRun) {
    const RunConfig cfg = tiny_config();
    const std::string path = ::testing::TempDir() + "xmamba_params.json";

    harness::DemoOptions save_opts;
    save_opts.save_params_path = path;
    const json saved = harness::run_demo(cfg, save_opts);

    harness::DemoOptions load_opts;
    load_opts.load_params_path = path;
    const json loaded = harness::run_demo(cfg, load_opts);
    EXPECT_EQ(saved.at("determinism_hash"), loaded.at("determinism_hash"));
}

TEST(Demo, PyramidFileReplay) {
    const RunConfig cfg = tiny_config();
    SeededRng rng(cfg.seed);
    const harness::DemoBundle bundle = harness::make_demo_bundle(cfg, rng);

    SeededRng drng(405);
    fusion::PyramidSet pyr;
    pyr.s3_rgb = random_feature_map(8, 8, cfg.channels.c3, drng);
    pyr.s3_ir = random_feature_map(8, 8, cfg.channels.c3, drng);
    pyr.s4_rgb = random_feature_map(4, 4, cfg.channels.c4, drng);
    pyr.s4_ir = random_feature_map(4, 4, cfg.channels.c4, drng);
    pyr.s5_rgb = random_feature_map(2, 2, cfg.channels.c5, drng);
    pyr.s5_ir = random_feature_map(2, 2, cfg.channels.c5, drng);
    pyr.f5_rgb = random_feature_map(2, 2, cfg.channels.c5, drng);
    pyr.f5_ir = random_feature_map(2, 2, cfg.channels.c5, drng);

    const std::string pyr_path = ::testing::TempDir() + "xmamba_pyramid.json";
    {
        std::ofstream out(pyr_path);
        out << serialize::pyramid_to_json(pyr).dump();
    }
    const std::string params_path = ::testing::TempDir() + "xmamba_params2.json";
    {
        std::ofstream out(params_path);
        out << harness::demo_bundle_to_json(bundle).dump();
    }

    harness::DemoOptions opts;
    opts.pyramid_in_path = pyr_path;
    opts.load_params_path = params_path;
    const json report = harness::run_demo(cfg, opts);
    EXPECT_EQ(report.at("pyramid_source"), "file");

    // the replay must agree with calling the neck directly
    const fusion::NeckOutput direct =
        fusion::neck_pipeline(pyr, bundle.neck, cfg.channels);
    EXPECT_NEAR(report.at("norms").at("p3").get<double>(), l2_norm(direct.p3), 1e-12);
    EXPECT_NEAR(report.at("norms").at("p5").get<double>(), l2_norm(direct.p5), 1e-12);
}

TEST(Serialize, InteractionParamsRoundTripBitExact) {
    RunConfig cfg = tiny_config();
    SeededRng rng(17);
    const blocks::InteractionParams params =
        blocks::make_interaction_params(cfg.block, rng);
    const json j = serialize::interaction_params_to_json(params);
    const blocks::InteractionParams back =
        serialize::interaction_params_from_json(j, cfg.block);

    SeededRng drng(18);
    const FeatureMap f1 = random_feature_map(8, 8, cfg.block.channels, drng);
    const FeatureMap f2 = random_feature_map(8, 8, cfg.block.channels, drng);
    const auto [y1, y2] = blocks::mamba_interaction(f1, f2, params, cfg.block);
    const auto [z1, z2] = blocks::mamba_interaction(f1, f2, back, cfg.block);
    EXPECT_EQ(y1.data, z1.data);
    EXPECT_EQ(y2.data, z2.data);
}

TEST(Serialize, MissingTensorNamed) {
    RunConfig cfg = tiny_config();
    try {
        serialize::interaction_params_from_json(json::array(), cfg.block);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("missing tensor"), std::string::npos);
    }
}

TEST(Check, AllSuitesPassUnderDefaults) {
    const harness::CheckOutcome out = harness::run_check(harness::default_run_config());
    EXPECT_TRUE(out.all_passed);
    EXPECT_EQ(out.report.at("suites").size(), 7u);
    for (const json& s : out.report.at("suites")) {
        EXPECT_TRUE(s.at("passed").get<bool>()) << s.at("name");
    }
}

TEST(Check, CorruptedScanPlanTripsBijectivitySuite) {
    selfcheck::Hooks hooks;
    hooks.scan_plan_mutator = [](scan::ScanPlan& plan) {
        if (plan.order.size() >= 2) std::swap(plan.order[0], plan.order[1]);
    };
    const harness::CheckOutcome out =
        harness::run_check(harness::default_run_config(), "scanpaths", hooks);
    EXPECT_FALSE(out.all_passed);
}

TEST(Check, FilterSelectsSuites) {
    const harness::CheckOutcome out =
        harness::run_check(harness::default_run_config(), "ssm");
    ASSERT_EQ(out.report.at("suites").size(), 1u);
    EXPECT_EQ(out.report.at("suites")[0].at("name"), "ssm");
    EXPECT_TRUE(out.all_passed);
}

namespace {

std::string fixture_35_percent() {
    // 20 objects in one image: 13 aligned, 7 shifted by >= 1 px (35%)
    std::ostringstream oss;
    auto line = [&oss](const std::string& modality, int id, double x, double y) {
        oss << R"({"image_id": "img0", "modality": ")" << modality << R"(", "object_id": )"
            << id << R"(, "x": )" << x << R"(, "y": )" << y
            << R"(, "w": 6, "h": 6, "class": "car"})" << "\n";
    };
    for (int i = 0; i < 20; ++i) {
        const double x = 20.0 * i, y = 10.0 * i;
        line("rgb", i, x, y);
        line("ir", i, i < 7 ? x + 2.0 : x, y);
    }
    return oss.str();
}

}  // namespace

TEST(Offsets, ZeroOffsetFixture) {
    std::ostringstream oss;
    for (int i = 0; i < 6; ++i) {
        oss << R"({"image_id": 1, "modality": "rgb", "x": )" << 30 * i
            << R"(, "y": 0, "w": 5, "h": 5, "class": 0})" << "\n";
        oss << R"({"image_id": 1, "modality": "ir", "x": )" << 30 * i
            << R"(, "y": 0, "w": 5, "h": 5, "class": 0})" << "\n";
    }
    std::istringstream in(oss.str());
    const json r = harness::run_offsets(harness::default_run_config(), in);
    EXPECT_EQ(r.at("matched"), 6);
    EXPECT_DOUBLE_EQ(r.at("misaligned_fraction").get<double>(), 0.0);
}

TEST(Offsets, ThirtyFivePercentFixture) {
    std::istringstream in(fixture_35_percent());
    const json r = harness::run_offsets(harness::default_run_config(), in);
    EXPECT_EQ(r.at("matched"), 20);
    EXPECT_DOUBLE_EQ(r.at("misaligned_fraction").get<double>(), 0.35);
}

TEST(Offsets, MalformedLineNamesLineNumber) {
    std::string text = fixture_35_percent();
    // corrupt line 7
    std::istringstream count(text);
    std::string rebuilt, line;
    int no = 0;
    while (std::getline(count, line)) {
        ++no;
        rebuilt += (no == 7) ? "{not json" : line;
        rebuilt += "\n";
    }
    std::istringstream in(rebuilt);
    try {
        harness::run_offsets(harness::default_run_config(), in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 7"), std::string::npos);
    }
}

TEST(Offsets, MissingFieldNamesLine) {
    std::istringstream in(R"({"image_id": 1, "modality": "rgb", "x": 0, "y": 0, "w": 5, "h": 5, "class": 0}
{"image_id": 1, "modality": "ir", "x": 0, "y": 0, "w": 5, "class": 0}
)");
    try {
        harness::run_offsets(harness::default_run_config(), in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("line 2"), std::string::npos);
        EXPECT_NE(what.find("'h'"), std::string::npos);
    }
}

TEST(Offsets, EmptyInputWarnsAndEmitsEmptyReport) {
    std::istringstream in("");
    const json r = harness::run_offsets(harness::default_run_config(), in);
    EXPECT_EQ(r.at("matched"), 0);
    EXPECT_FALSE(r.at("warnings").empty());
}

TEST(Offsets, InvalidBoxesReportedPerRecord) {
    std::istringstream in(R"({"image_id": 1, "modality": "rgb", "x": 0, "y": 0, "w": 5, "h": 5, "class": 0}
{"image_id": 1, "modality": "ir", "x": 0, "y": 0, "w": 0, "h": 5, "class": 0}
)");
    const json r = harness::run_offsets(harness::default_run_config(), in);
    ASSERT_EQ(r.at("annotations").at("invalid").size(), 1u);
    EXPECT_EQ(r.at("annotations").at("invalid")[0].at("line"), 2);
}

TEST(Bench, ReportMatchesFlopModel) {
    const RunConfig cfg = harness::default_run_config();
    const json r = harness::run_bench(cfg);
    EXPECT_EQ(r.at("token_len"), 64);
    const json r2 = harness::run_bench(cfg, 128);
    EXPECT_EQ(r2.at("counts").at("mamba_total").get<std::int64_t>(),
              2 * r.at("counts").at("mamba_total").get<std::int64_t>());
    EXPECT_LT(r.at("counts").at("mamba_total").get<std::int64_t>(),
              r.at("counts").at("attention_total").get<std::int64_t>());
}
