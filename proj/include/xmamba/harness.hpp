#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmamba/blocks.hpp"
#include "xmamba/errors.hpp"
#include "xmamba/flops.hpp"
#include "xmamba/fusion.hpp"
#include "xmamba/offsets.hpp"
#include "xmamba/selfcheck.hpp"
#include "xmamba/serialize.hpp"
#include "xmamba/ssm.hpp"
#include "xmamba/tensor.hpp"

namespace xmamba::harness {

using nlohmann::json;

// Run configuration: one JSON file covering the whole pipeline. Unknown
// keys are rejected and every complaint names the offending field path.

struct OffsetOptions {
    offsets::IntersectionMode mode = offsets::IntersectionMode::clamped;
    offsets::MagnitudeMetric magnitude = offsets::MagnitudeMetric::chebyshev;
    double gate_px = 20.0;
    std::vector<double> levels{8.0, 16.0, 32.0};
    std::string modality_a = "rgb";
    std::string modality_b = "ir";
};

struct RunConfig {
    int image_h = 640;
    int image_w = 640;
    fusion::FusionConfig channels;  // c3/c4/c5 plan + branch count
    blocks::BlockConfig block;      // grid 8x8, window 2x2, n_single 3
    OffsetOptions offsets;
    std::uint64_t seed = 2024;
    std::string out_dir = ".";
};

inline RunConfig default_run_config() {
    RunConfig cfg;
    cfg.block.channels = cfg.channels.c5;
    cfg.block.hidden = 2 * cfg.channels.c5;
    return cfg;
}

inline void validate(const RunConfig& cfg) {
    if (cfg.image_h < 32 || cfg.image_w < 32 || cfg.image_h % 32 != 0 ||
        cfg.image_w % 32 != 0) {
        throw ConfigError("image: dims must be positive multiples of 32, got " +
                          std::to_string(cfg.image_h) + "x" + std::to_string(cfg.image_w));
    }
    try {
        fusion::validate(cfg.channels);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("channels: ") + e.what());
    }
    try {
        blocks::validate(cfg.block);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("block: ") + e.what());
    }
    if (cfg.block.channels != cfg.channels.c5) {
        throw ConfigError("block: channel count must equal channels.c5");
    }
    if (cfg.image_h / 32 < cfg.block.grid_h || cfg.image_w / 32 < cfg.block.grid_w) {
        throw ConfigError("image: scale-5 map (dims/32) smaller than block.target_grid");
    }
    if (!(cfg.offsets.gate_px > 0.0)) {
        throw ConfigError("offsets.gate_px: must be positive");
    }
    for (double lv : cfg.offsets.levels) {
        if (!(lv > 0.0)) throw ConfigError("offsets.levels: block sizes must be positive");
    }
}

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                           const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) known = known || it.key() == k;
        if (!known) {
            throw ConfigError(path.empty() ? it.key() + ": unknown field"
                                           : path + "." + it.key() + ": unknown field");
        }
    }
}

inline const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

template <typename T>
inline T get_number(const json& obj, const char* key, T fallback, const std::string& path) {
    const json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_number()) throw ConfigError(path + "." + key + ": expected a number");
    return v->get<T>();
}

inline bool get_bool(const json& obj, const char* key, bool fallback,
                     const std::string& path) {
    const json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) throw ConfigError(path + "." + key + ": expected a boolean");
    return v->get<bool>();
}

inline std::string get_string(const json& obj, const char* key, std::string fallback,
                              const std::string& path) {
    const json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_string()) throw ConfigError(path + "." + key + ": expected a string");
    return v->get<std::string>();
}

inline std::pair<int, int> get_pair(const json& obj, const char* key,
                                    std::pair<int, int> fallback, const std::string& path) {
    const json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_array() || v->size() != 2) {
        throw ConfigError(path + "." + key + ": expected a two-element array");
    }
    return {(*v)[0].get<int>(), (*v)[1].get<int>()};
}

}  // namespace detail

inline RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be an object");
    detail::reject_unknown(j, {"image", "channels", "block", "fusion", "offsets", "seed",
                               "out_dir"},
                           "");
    RunConfig cfg = default_run_config();

    if (const json* img = detail::find(j, "image")) {
        detail::reject_unknown(*img, {"height", "width"}, "image");
        cfg.image_h = detail::get_number<int>(*img, "height", cfg.image_h, "image");
        cfg.image_w = detail::get_number<int>(*img, "width", cfg.image_w, "image");
    }
    if (const json* ch = detail::find(j, "channels")) {
        detail::reject_unknown(*ch, {"c3", "c4", "c5"}, "channels");
        cfg.channels.c3 = detail::get_number<int>(*ch, "c3", cfg.channels.c3, "channels");
        cfg.channels.c4 = detail::get_number<int>(*ch, "c4", cfg.channels.c4, "channels");
        cfg.channels.c5 = detail::get_number<int>(*ch, "c5", cfg.channels.c5, "channels");
        cfg.block.channels = cfg.channels.c5;
        cfg.block.hidden = 2 * cfg.channels.c5;
    }
    if (const json* bl = detail::find(j, "block")) {
        detail::reject_unknown(*bl,
                               {"target_grid", "state_dim", "hidden", "dropout", "n_single",
                                "local_window", "selective", "share_direction_params"},
                               "block");
        const auto grid = detail::get_pair(*bl, "target_grid",
                                           {cfg.block.grid_h, cfg.block.grid_w}, "block");
        cfg.block.grid_h = grid.first;
        cfg.block.grid_w = grid.second;
        cfg.block.state_dim =
            detail::get_number<int>(*bl, "state_dim", cfg.block.state_dim, "block");
        cfg.block.hidden = detail::get_number<int>(*bl, "hidden", cfg.block.hidden, "block");
        cfg.block.dropout_p =
            detail::get_number<double>(*bl, "dropout", cfg.block.dropout_p, "block");
        cfg.block.n_single =
            detail::get_number<int>(*bl, "n_single", cfg.block.n_single, "block");
        const auto win = detail::get_pair(*bl, "local_window",
                                          {cfg.block.window_h, cfg.block.window_w}, "block");
        cfg.block.window_h = win.first;
        cfg.block.window_w = win.second;
        cfg.block.selective = detail::get_bool(*bl, "selective", cfg.block.selective, "block");
        cfg.block.share_direction_params = detail::get_bool(
            *bl, "share_direction_params", cfg.block.share_direction_params, "block");
    }
    if (const json* fu = detail::find(j, "fusion")) {
        detail::reject_unknown(*fu, {"branches"}, "fusion");
        cfg.channels.branch_count =
            detail::get_number<int>(*fu, "branches", cfg.channels.branch_count, "fusion");
    }
    if (const json* of = detail::find(j, "offsets")) {
        detail::reject_unknown(
            *of, {"mode", "magnitude", "gate_px", "levels", "modality_a", "modality_b"},
            "offsets");
        const std::string mode = detail::get_string(*of, "mode", "clamped", "offsets");
        if (mode == "clamped") {
            cfg.offsets.mode = offsets::IntersectionMode::clamped;
        } else if (mode == "literal") {
            cfg.offsets.mode = offsets::IntersectionMode::literal;
        } else {
            throw ConfigError("offsets.mode: expected 'clamped' or 'literal'");
        }
        const std::string metric = detail::get_string(*of, "magnitude", "chebyshev", "offsets");
        if (metric == "chebyshev") {
            cfg.offsets.magnitude = offsets::MagnitudeMetric::chebyshev;
        } else if (metric == "euclidean") {
            cfg.offsets.magnitude = offsets::MagnitudeMetric::euclidean;
        } else {
            throw ConfigError("offsets.magnitude: expected 'chebyshev' or 'euclidean'");
        }
        cfg.offsets.gate_px =
            detail::get_number<double>(*of, "gate_px", cfg.offsets.gate_px, "offsets");
        if (const json* lv = detail::find(*of, "levels")) {
            if (!lv->is_array() || lv->empty()) {
                throw ConfigError("offsets.levels: expected a non-empty array");
            }
            cfg.offsets.levels = lv->get<std::vector<double>>();
        }
        cfg.offsets.modality_a =
            detail::get_string(*of, "modality_a", cfg.offsets.modality_a, "offsets");
        cfg.offsets.modality_b =
            detail::get_string(*of, "modality_b", cfg.offsets.modality_b, "offsets");
    }
    if (const json* sd = detail::find(j, "seed")) {
        if (!sd->is_number_unsigned() && !sd->is_number_integer()) {
            throw ConfigError("seed: expected an integer");
        }
        cfg.seed = sd->get<std::uint64_t>();
    }
    cfg.out_dir = detail::get_string(j, "out_dir", cfg.out_dir, "");

    validate(cfg);
    return cfg;
}

inline json run_config_to_json(const RunConfig& cfg) {
    return json{
        {"image", {{"height", cfg.image_h}, {"width", cfg.image_w}}},
        {"channels",
         {{"c3", cfg.channels.c3}, {"c4", cfg.channels.c4}, {"c5", cfg.channels.c5}}},
        {"block",
         {{"target_grid", {cfg.block.grid_h, cfg.block.grid_w}},
          {"state_dim", cfg.block.state_dim},
          {"hidden", cfg.block.hidden},
          {"dropout", cfg.block.dropout_p},
          {"n_single", cfg.block.n_single},
          {"local_window", {cfg.block.window_h, cfg.block.window_w}},
          {"selective", cfg.block.selective},
          {"share_direction_params", cfg.block.share_direction_params}}},
        {"fusion", {{"branches", cfg.channels.branch_count}}},
        {"offsets",
         {{"mode", cfg.offsets.mode == offsets::IntersectionMode::clamped ? "clamped"
                                                                          : "literal"},
          {"magnitude", cfg.offsets.magnitude == offsets::MagnitudeMetric::chebyshev
                            ? "chebyshev"
                            : "euclidean"},
          {"gate_px", cfg.offsets.gate_px},
          {"levels", cfg.offsets.levels},
          {"modality_a", cfg.offsets.modality_a},
          {"modality_b", cfg.offsets.modality_b}}},
        {"seed", cfg.seed},
        {"out_dir", cfg.out_dir}};
}

// --- determinism hashing -----------------------------------------------------

// FNV-1a over the IEEE-754 bit patterns, byte-extracted numerically so the
// hash is endianness-stable.
inline std::uint64_t hash_doubles(std::uint64_t h, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(d));
        std::memcpy(&bits, &d, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 0x100000001B3ull;
        }
    }
    return h;
}

inline std::string hash_to_hex(std::uint64_t h) {
    std::ostringstream oss;
    oss << std::hex << std::setw(16) << std::setfill('0') << h;
    return oss.str();
}

// --- demo ---------------------------------------------------------------------

struct DemoOptions {
    std::string load_params_path;  // reuse a saved parameter bundle
    std::string save_params_path;  // write the bundle used by this run
    std::string pyramid_in_path;   // replay the neck on pyramid tensors from file
};

struct DemoBundle {
    blocks::InteractionParams interaction;
    fusion::StubWeights stub_rgb, stub_ir;
    fusion::NeckWeights neck;
};

inline DemoBundle make_demo_bundle(const RunConfig& cfg, SeededRng& rng) {
    DemoBundle b;
    SeededRng r_int = rng.split(10);
    SeededRng r_stub_rgb = rng.split(11);
    SeededRng r_stub_ir = rng.split(12);
    SeededRng r_neck = rng.split(13);
    b.interaction = blocks::make_interaction_params(cfg.block, r_int);
    b.stub_rgb = fusion::make_stub_weights(3, cfg.channels, r_stub_rgb);
    b.stub_ir = fusion::make_stub_weights(3, cfg.channels, r_stub_ir);
    b.neck = fusion::make_neck_weights(cfg.channels, r_neck);
    return b;
}

inline json demo_bundle_to_json(const DemoBundle& b) {
    return json{{"format", "xmamba-params-v1"},
                {"interaction", serialize::interaction_params_to_json(b.interaction)},
                {"stub_rgb", serialize::stub_weights_to_json(b.stub_rgb)},
                {"stub_ir", serialize::stub_weights_to_json(b.stub_ir)},
                {"neck", serialize::neck_weights_to_json(b.neck)}};
}

inline DemoBundle demo_bundle_from_json(const json& j, const RunConfig& cfg) {
    if (!j.is_object() || j.value("format", "") != "xmamba-params-v1") {
        throw ParseError("params: expected format 'xmamba-params-v1'");
    }
    DemoBundle b;
    b.interaction = serialize::interaction_params_from_json(j.at("interaction"), cfg.block);
    b.stub_rgb = serialize::stub_weights_from_json(j.at("stub_rgb"));
    b.stub_ir = serialize::stub_weights_from_json(j.at("stub_ir"));
    b.neck = serialize::neck_weights_from_json(j.at("neck"), cfg.channels.branch_count);
    return b;
}

inline json shape_of(const FeatureMap& m) {
    return json::array({m.height, m.width, m.channels});
}

inline json run_demo(const RunConfig& cfg, const DemoOptions& opts = {}) {
    validate(cfg);
    SeededRng rng(cfg.seed);

    fusion::PyramidSet pyr;
    std::string pyramid_source = "synthetic";

    DemoBundle bundle;
    if (!opts.load_params_path.empty()) {
        std::ifstream in(opts.load_params_path);
        if (!in) throw ParseError("params: cannot open " + opts.load_params_path);
        json j;
        in >> j;
        bundle = demo_bundle_from_json(j, cfg);
    } else {
        bundle = make_demo_bundle(cfg, rng);
    }
    if (!opts.save_params_path.empty()) {
        std::ofstream out(opts.save_params_path);
        if (!out) throw ParseError("params: cannot open " + opts.save_params_path +
                                   " for writing");
        out << demo_bundle_to_json(bundle).dump();
    }

    if (!opts.pyramid_in_path.empty()) {
        std::ifstream in(opts.pyramid_in_path);
        if (!in) throw ParseError("pyramid: cannot open " + opts.pyramid_in_path);
        json j;
        in >> j;
        pyr = serialize::pyramid_from_json(j);
        pyramid_source = "file";
    } else {
        SeededRng img_rng = rng.split(20);
        const FeatureMap img_rgb =
            random_feature_map(cfg.image_h, cfg.image_w, 3, img_rng, 0.0, 1.0);
        const FeatureMap img_ir =
            random_feature_map(cfg.image_h, cfg.image_w, 3, img_rng, 0.0, 1.0);
        const fusion::BackbonePyramid rgb = fusion::backbone_stub(img_rgb, bundle.stub_rgb);
        const fusion::BackbonePyramid ir = fusion::backbone_stub(img_ir, bundle.stub_ir);
        pyr.s3_rgb = rgb.s3;
        pyr.s4_rgb = rgb.s4;
        pyr.s5_rgb = rgb.s5;
        pyr.s3_ir = ir.s3;
        pyr.s4_ir = ir.s4;
        pyr.s5_ir = ir.s5;
        const auto [f5_rgb, f5_ir] =
            blocks::mamba_interaction(rgb.s5, ir.s5, bundle.interaction, cfg.block);
        pyr.f5_rgb = f5_rgb;
        pyr.f5_ir = f5_ir;
    }

    const fusion::NeckOutput neck = fusion::neck_pipeline(pyr, bundle.neck, cfg.channels);

    std::uint64_t h = 0xCBF29CE484222325ull;
    h = hash_doubles(h, pyr.f5_rgb.data);
    h = hash_doubles(h, pyr.f5_ir.data);
    h = hash_doubles(h, neck.p3.data);
    h = hash_doubles(h, neck.p4.data);
    h = hash_doubles(h, neck.p5.data);

    const bool finite = all_finite(pyr.f5_rgb) && all_finite(pyr.f5_ir) &&
                        all_finite(neck.p3) && all_finite(neck.p4) && all_finite(neck.p5);

    return json{{"command", "demo"},
                {"seed", cfg.seed},
                {"image", {cfg.image_h, cfg.image_w}},
                {"pyramid_source", pyramid_source},
                {"shapes",
                 {{"s3", shape_of(pyr.s3_rgb)},
                  {"s4", shape_of(pyr.s4_rgb)},
                  {"s5", shape_of(pyr.s5_rgb)},
                  {"f5_rgb", shape_of(pyr.f5_rgb)},
                  {"f5_ir", shape_of(pyr.f5_ir)},
                  {"p3", shape_of(neck.p3)},
                  {"p4", shape_of(neck.p4)},
                  {"p5", shape_of(neck.p5)}}},
                {"norms",
                 {{"f5_rgb", l2_norm(pyr.f5_rgb)},
                  {"f5_ir", l2_norm(pyr.f5_ir)},
                  {"p3", l2_norm(neck.p3)},
                  {"p4", l2_norm(neck.p4)},
                  {"p5", l2_norm(neck.p5)}}},
                {"all_finite", finite},
                {"determinism_hash", hash_to_hex(h)},
                {"config", run_config_to_json(cfg)}};
}

// --- check ---------------------------------------------------------------------

struct CheckOutcome {
    json report;
    bool all_passed = true;
};

inline CheckOutcome run_check(const RunConfig& cfg, const std::string& filter = "",
                              const selfcheck::Hooks& hooks = {}) {
    validate(cfg);
    const std::vector<selfcheck::SuiteResult> results =
        selfcheck::run_all(cfg.seed, filter, hooks);
    CheckOutcome out;
    json suites = json::array();
    for (const selfcheck::SuiteResult& r : results) {
        suites.push_back(json{{"name", r.name},
                              {"passed", r.passed},
                              {"checks", r.checks},
                              {"failures", r.failures}});
        out.all_passed = out.all_passed && r.passed;
    }
    out.report = json{{"command", "check"},
                      {"seed", cfg.seed},
                      {"filter", filter},
                      {"suites", suites},
                      {"all_passed", out.all_passed}};
    return out;
}

// --- offsets -------------------------------------------------------------------

struct AnnotationRecord {
    std::string image_id;
    std::string modality;
    std::string object_id;
    offsets::Box box;
    std::string category;
    int line = 0;
};

// Line-delimited JSON, one object per line:
//   {"image_id": ..., "modality": ..., "x": ..., "y": ..., "w": ..., "h": ...,
//    "class": ..., "object_id"?: ...}
inline std::vector<AnnotationRecord> parse_annotations_jsonl(std::istream& in) {
    std::vector<AnnotationRecord> records;
    std::string line;
    int line_no = 0;
    auto as_string = [](const json& v) {
        return v.is_string() ? v.get<std::string>() : v.dump();
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected a JSON object");
        }
        for (const char* key : {"image_id", "modality", "x", "y", "w", "h", "class"}) {
            if (!j.contains(key)) {
                throw ParseError("line " + std::to_string(line_no) + ": missing field '" +
                                 key + "'");
            }
        }
        AnnotationRecord r;
        r.line = line_no;
        r.image_id = as_string(j.at("image_id"));
        r.modality = as_string(j.at("modality"));
        r.category = as_string(j.at("class"));
        if (j.contains("object_id")) r.object_id = as_string(j.at("object_id"));
        try {
            r.box.x = j.at("x").get<double>();
            r.box.y = j.at("y").get<double>();
            r.box.w = j.at("w").get<double>();
            r.box.h = j.at("h").get<double>();
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        records.push_back(std::move(r));
    }
    return records;
}

inline json run_offsets(const RunConfig& cfg, std::istream& in,
                        const std::string& source_name = "<stream>") {
    const std::vector<AnnotationRecord> all = parse_annotations_jsonl(in);

    json warnings = json::array();
    if (all.empty()) warnings.push_back("empty input: no annotation lines found");

    // split per image and modality, excluding malformed boxes per record
    std::map<std::string, std::pair<std::vector<offsets::Box>, std::vector<offsets::Box>>>
        by_image;
    json invalid = json::array();
    long long count_a = 0, count_b = 0;
    for (const AnnotationRecord& r : all) {
        if (!(r.box.w > 0.0) || !(r.box.h > 0.0)) {
            invalid.push_back(json{{"line", r.line}, {"reason", "non-positive box size"}});
            continue;
        }
        if (r.modality == cfg.offsets.modality_a) {
            by_image[r.image_id].first.push_back(r.box);
            ++count_a;
        } else if (r.modality == cfg.offsets.modality_b) {
            by_image[r.image_id].second.push_back(r.box);
            ++count_b;
        } else {
            throw ParseError("line " + std::to_string(r.line) + ": unknown modality '" +
                             r.modality + "' (expected '" + cfg.offsets.modality_a +
                             "' or '" + cfg.offsets.modality_b + "')");
        }
    }

    std::vector<offsets::OffsetRecord> matched;
    long long unmatched_a = 0, unmatched_b = 0;
    for (const auto& [image_id, lists] : by_image) {
        const offsets::MatchResult res =
            offsets::match_annotations(lists.first, lists.second, cfg.offsets.gate_px);
        matched.insert(matched.end(), res.records.begin(), res.records.end());
        unmatched_a += static_cast<long long>(res.unmatched_a.size());
        unmatched_b += static_cast<long long>(res.unmatched_b.size());
    }

    const offsets::OffsetHistogram hist =
        offsets::offset_stats(matched, cfg.offsets.magnitude);

    json edges = json::array();
    for (double e : hist.edges) {
        if (std::isinf(e)) {
            edges.push_back("inf");
        } else {
            edges.push_back(e);
        }
    }
    json fractions = json::array();
    for (long long c : hist.counts) {
        fractions.push_back(hist.total > 0
                                ? static_cast<double>(c) / static_cast<double>(hist.total)
                                : 0.0);
    }

    std::vector<double> mean_retention(cfg.offsets.levels.size(), 0.0);
    for (const offsets::OffsetRecord& r : matched) {
        const std::vector<double> frac =
            offsets::retention_by_level(r.dx, r.dy, cfg.offsets.levels);
        for (std::size_t i = 0; i < frac.size(); ++i) mean_retention[i] += frac[i];
    }
    if (!matched.empty()) {
        for (double& v : mean_retention) v /= static_cast<double>(matched.size());
    }

    return json{
        {"command", "offsets"},
        {"input", source_name},
        {"images", by_image.size()},
        {"annotations",
         {{"total", all.size()},
          {"modality_a", count_a},
          {"modality_b", count_b},
          {"invalid", invalid}}},
        {"matched", matched.size()},
        {"unmatched_a", unmatched_a},
        {"unmatched_b", unmatched_b},
        {"histogram",
         {{"edges", edges}, {"counts", hist.counts}, {"fractions", fractions}}},
        {"misaligned_fraction", hist.misaligned_fraction},
        {"within_1_to_5_fraction", hist.within_1_to_5_fraction},
        {"retention",
         {{"levels", cfg.offsets.levels}, {"mean_retention", mean_retention}}},
        {"intersection_mode",
         cfg.offsets.mode == offsets::IntersectionMode::clamped ? "clamped" : "literal"},
        {"magnitude_metric",
         cfg.offsets.magnitude == offsets::MagnitudeMetric::chebyshev ? "chebyshev"
                                                                      : "euclidean"},
        {"gate_px", cfg.offsets.gate_px},
        {"warnings", warnings}};
}

// --- bench ----------------------------------------------------------------------

inline flops::FlopConfig make_flop_config(const RunConfig& cfg, std::int64_t token_len = 0) {
    flops::FlopConfig fc;
    fc.token_len = token_len > 0 ? token_len : cfg.block.token_count();
    fc.state_dim = cfg.block.state_dim;
    fc.channels = cfg.block.channels;
    fc.hidden = cfg.block.hidden;
    fc.n_single = cfg.block.n_single;
    return fc;
}

inline json run_bench(const RunConfig& cfg, std::int64_t token_len = 0) {
    validate(cfg);
    const flops::FlopReport r = flops::flop_estimate(make_flop_config(cfg, token_len));
    return json{{"command", "bench"},
                {"token_len", r.config.token_len},
                {"state_dim", r.config.state_dim},
                {"channels", r.config.channels},
                {"hidden", r.config.hidden},
                {"n_single", r.config.n_single},
                {"counts",
                 {{"s6_per_direction", r.s6_per_direction},
                  {"mlp_per_block", r.mlp_per_block},
                  {"single_block", r.single_block},
                  {"cross_block", r.cross_block},
                  {"mamba_total", r.mamba_total},
                  {"attention_per_block", r.attention_per_block},
                  {"cross_attention", r.cross_attention},
                  {"attention_total", r.attention_total},
                  {"attention_quadratic", r.attention_quadratic}}},
                {"attention_to_mamba_ratio", r.attention_to_mamba_ratio}};
}

}  // namespace xmamba::harness
