#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmamba/blocks.hpp"
#include "xmamba/errors.hpp"
#include "xmamba/fusion.hpp"
#include "xmamba/scan.hpp"
#include "xmamba/ssm.hpp"
#include "xmamba/tensor.hpp"

namespace xmamba::serialize {

using nlohmann::json;

// Flat tensor layout used everywhere a parameter or feature leaves the
// process: a list of {"name", "shape", "data"} entries, data row-major.
// Bundles are rebuilt by pulling expected names from the list.

inline json tensor_entry(const std::string& name, std::vector<int> shape,
                         const std::vector<double>& data) {
    std::size_t expect = 1;
    for (int s : shape) expect *= static_cast<std::size_t>(s);
    if (expect != data.size()) {
        throw ValidationError("serialize: shape/data mismatch for " + name);
    }
    return json{{"name", name}, {"shape", shape}, {"data", data}};
}

class FlatReader {
  public:
    explicit FlatReader(const json& entries) {
        if (!entries.is_array()) throw ParseError("params: expected a flat entry array");
        for (const json& e : entries) {
            if (!e.contains("name") || !e.contains("shape") || !e.contains("data")) {
                throw ParseError("params: entry missing name/shape/data");
            }
            entries_[e.at("name").get<std::string>()] = &e;
        }
    }

    std::vector<double> get(const std::string& name, const std::vector<int>& shape) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ParseError("params: missing tensor '" + name + "'");
        const json& e = *it->second;
        const std::vector<int> got = e.at("shape").get<std::vector<int>>();
        if (got != shape) {
            throw ParseError("params: tensor '" + name + "' has unexpected shape");
        }
        return e.at("data").get<std::vector<double>>();
    }

    std::vector<int> shape_of(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ParseError("params: missing tensor '" + name + "'");
        return it->second->at("shape").get<std::vector<int>>();
    }

    bool has(const std::string& name) const { return entries_.count(name) > 0; }

  private:
    std::map<std::string, const json*> entries_;
};

// --- scan plans -------------------------------------------------------------

inline json to_json(const scan::ScanPlan& p) {
    json j{{"grid_h", p.grid_h},
           {"grid_w", p.grid_w},
           {"direction", scan::direction_name(p.direction)},
           {"order", p.order},
           {"inverse", p.inverse}};
    if (scan::is_local(p.direction)) j["window"] = {p.window_h, p.window_w};
    return j;
}

// --- ssm params -------------------------------------------------------------

inline void append_ssm_params(json& out, const std::string& prefix,
                              const ssm::SsmParams& p) {
    const int n = p.state_dim, c = p.channels;
    out.push_back(tensor_entry(prefix + ".a", {n}, p.a));
    out.push_back(tensor_entry(prefix + ".b_proj", {n, c}, p.b_proj.a));
    out.push_back(tensor_entry(prefix + ".c_proj", {n, c}, p.c_proj.a));
    out.push_back(tensor_entry(prefix + ".delta_proj", {c}, p.delta_proj));
    out.push_back(tensor_entry(prefix + ".delta_bias", {1}, {p.delta_bias}));
    out.push_back(tensor_entry(prefix + ".d", {c}, p.d));
    out.push_back(tensor_entry(prefix + ".fixed_delta", {1}, {p.fixed_delta}));
    out.push_back(tensor_entry(prefix + ".fixed_b", {n}, p.fixed_b));
    out.push_back(tensor_entry(prefix + ".fixed_c", {n}, p.fixed_c));
}

inline ssm::SsmParams read_ssm_params(const FlatReader& r, const std::string& prefix,
                                      int state_dim, int channels) {
    ssm::SsmParams p;
    p.state_dim = state_dim;
    p.channels = channels;
    p.a = r.get(prefix + ".a", {state_dim});
    p.b_proj = Mat(state_dim, channels);
    p.b_proj.a = r.get(prefix + ".b_proj", {state_dim, channels});
    p.c_proj = Mat(state_dim, channels);
    p.c_proj.a = r.get(prefix + ".c_proj", {state_dim, channels});
    p.delta_proj = r.get(prefix + ".delta_proj", {channels});
    p.delta_bias = r.get(prefix + ".delta_bias", {1})[0];
    p.d = r.get(prefix + ".d", {channels});
    p.fixed_delta = r.get(prefix + ".fixed_delta", {1})[0];
    p.fixed_b = r.get(prefix + ".fixed_b", {state_dim});
    p.fixed_c = r.get(prefix + ".fixed_c", {state_dim});
    return p;
}

// --- block params -----------------------------------------------------------

inline void append_single_block(json& out, const std::string& prefix,
                                const blocks::SingleBlockParams& p) {
    out.push_back(tensor_entry(prefix + ".mlp.w1", {p.mlp.w1.rows, p.mlp.w1.cols}, p.mlp.w1.a));
    out.push_back(tensor_entry(prefix + ".mlp.b1", {static_cast<int>(p.mlp.b1.size())}, p.mlp.b1));
    out.push_back(tensor_entry(prefix + ".mlp.w2", {p.mlp.w2.rows, p.mlp.w2.cols}, p.mlp.w2.a));
    out.push_back(tensor_entry(prefix + ".mlp.b2", {static_cast<int>(p.mlp.b2.size())}, p.mlp.b2));
    out.push_back(tensor_entry(prefix + ".pos_embedding",
                               {p.pos_embedding.length, p.pos_embedding.channels},
                               p.pos_embedding.data));
    for (std::size_t i = 0; i < p.directions.size(); ++i) {
        append_ssm_params(out, prefix + ".dir" + std::to_string(i), p.directions[i]);
    }
}

inline blocks::SingleBlockParams read_single_block(const FlatReader& r,
                                                   const std::string& prefix,
                                                   const blocks::BlockConfig& cfg) {
    blocks::SingleBlockParams p;
    p.mlp.w1 = Mat(cfg.hidden, cfg.channels);
    p.mlp.w1.a = r.get(prefix + ".mlp.w1", {cfg.hidden, cfg.channels});
    p.mlp.b1 = r.get(prefix + ".mlp.b1", {cfg.hidden});
    p.mlp.w2 = Mat(cfg.channels, cfg.hidden);
    p.mlp.w2.a = r.get(prefix + ".mlp.w2", {cfg.channels, cfg.hidden});
    p.mlp.b2 = r.get(prefix + ".mlp.b2", {cfg.channels});
    p.pos_embedding = TokenSequence(cfg.token_count(), cfg.channels);
    p.pos_embedding.data =
        r.get(prefix + ".pos_embedding", {cfg.token_count(), cfg.channels});
    const int n_dir = cfg.share_direction_params ? 1 : 4;
    for (int i = 0; i < n_dir; ++i) {
        p.directions.push_back(read_ssm_params(r, prefix + ".dir" + std::to_string(i),
                                               cfg.state_dim, cfg.channels));
    }
    return p;
}

inline json interaction_params_to_json(const blocks::InteractionParams& p) {
    json out = json::array();
    for (std::size_t i = 0; i < p.single_a.size(); ++i) {
        append_single_block(out, "single_a." + std::to_string(i), p.single_a[i]);
    }
    for (std::size_t i = 0; i < p.single_b.size(); ++i) {
        append_single_block(out, "single_b." + std::to_string(i), p.single_b[i]);
    }
    for (std::size_t i = 0; i < p.cross.directions.size(); ++i) {
        append_ssm_params(out, "cross.dir" + std::to_string(i), p.cross.directions[i]);
    }
    return out;
}

inline blocks::InteractionParams interaction_params_from_json(
    const json& j, const blocks::BlockConfig& cfg) {
    const FlatReader r(j);
    blocks::InteractionParams p;
    for (int i = 0; i < cfg.n_single; ++i) {
        p.single_a.push_back(read_single_block(r, "single_a." + std::to_string(i), cfg));
        p.single_b.push_back(read_single_block(r, "single_b." + std::to_string(i), cfg));
    }
    const int n_dir = cfg.share_direction_params ? 1 : 6;
    for (int i = 0; i < n_dir; ++i) {
        p.cross.directions.push_back(read_ssm_params(r, "cross.dir" + std::to_string(i),
                                                     cfg.state_dim, cfg.channels));
    }
    return p;
}

// --- feature maps and pyramids ------------------------------------------------

inline json feature_map_entry(const std::string& name, const FeatureMap& m) {
    return tensor_entry(name, {m.height, m.width, m.channels}, m.data);
}

inline FeatureMap read_feature_map(const FlatReader& r, const std::string& name) {
    const std::vector<int> shape = r.shape_of(name);
    if (shape.size() != 3) throw ParseError("params: tensor '" + name + "' is not rank-3");
    FeatureMap m(shape[0], shape[1], shape[2]);
    m.data = r.get(name, shape);
    return m;
}

inline json pyramid_to_json(const fusion::PyramidSet& p) {
    json out = json::array();
    out.push_back(feature_map_entry("s3_rgb", p.s3_rgb));
    out.push_back(feature_map_entry("s4_rgb", p.s4_rgb));
    out.push_back(feature_map_entry("s5_rgb", p.s5_rgb));
    out.push_back(feature_map_entry("s3_ir", p.s3_ir));
    out.push_back(feature_map_entry("s4_ir", p.s4_ir));
    out.push_back(feature_map_entry("s5_ir", p.s5_ir));
    out.push_back(feature_map_entry("f5_rgb", p.f5_rgb));
    out.push_back(feature_map_entry("f5_ir", p.f5_ir));
    return out;
}

inline fusion::PyramidSet pyramid_from_json(const json& j) {
    const FlatReader r(j);
    fusion::PyramidSet p;
    p.s3_rgb = read_feature_map(r, "s3_rgb");
    p.s4_rgb = read_feature_map(r, "s4_rgb");
    p.s5_rgb = read_feature_map(r, "s5_rgb");
    p.s3_ir = read_feature_map(r, "s3_ir");
    p.s4_ir = read_feature_map(r, "s4_ir");
    p.s5_ir = read_feature_map(r, "s5_ir");
    p.f5_rgb = read_feature_map(r, "f5_rgb");
    p.f5_ir = read_feature_map(r, "f5_ir");
    return p;
}

// --- conv weights -------------------------------------------------------------

inline json kernel_entry(const std::string& name, const ConvKernel& k) {
    return tensor_entry(name, {k.kh, k.kw, k.c_in, k.c_out}, k.data);
}

inline ConvKernel read_kernel(const FlatReader& r, const std::string& name) {
    const std::vector<int> shape = r.shape_of(name);
    if (shape.size() != 4) throw ParseError("params: tensor '" + name + "' is not rank-4");
    ConvKernel k(shape[0], shape[1], shape[2], shape[3]);
    k.data = r.get(name, shape);
    return k;
}

inline void append_ogf_weights(json& out, const std::string& prefix,
                               const fusion::OgfWeights& w) {
    for (std::size_t i = 0; i < w.branches.size(); ++i) {
        out.push_back(kernel_entry(prefix + ".branch" + std::to_string(i), w.branches[i]));
    }
    out.push_back(kernel_entry(prefix + ".rep", w.rep));
}

inline fusion::OgfWeights read_ogf_weights(const FlatReader& r, const std::string& prefix,
                                           int branches) {
    fusion::OgfWeights w;
    for (int i = 0; i < branches; ++i) {
        w.branches.push_back(read_kernel(r, prefix + ".branch" + std::to_string(i)));
    }
    w.rep = read_kernel(r, prefix + ".rep");
    return w;
}

inline json neck_weights_to_json(const fusion::NeckWeights& w) {
    json out = json::array();
    out.push_back(kernel_entry("neck.pair_fuse", w.pair_fuse));
    append_ogf_weights(out, "neck.ogf4", w.ogf4);
    append_ogf_weights(out, "neck.ogf3", w.ogf3);
    out.push_back(kernel_entry("neck.down34", w.down34));
    out.push_back(kernel_entry("neck.pan4", w.pan4));
    out.push_back(kernel_entry("neck.down45", w.down45));
    out.push_back(kernel_entry("neck.pan5", w.pan5));
    return out;
}

inline fusion::NeckWeights neck_weights_from_json(const json& j, int branches) {
    const FlatReader r(j);
    fusion::NeckWeights w;
    w.pair_fuse = read_kernel(r, "neck.pair_fuse");
    w.ogf4 = read_ogf_weights(r, "neck.ogf4", branches);
    w.ogf3 = read_ogf_weights(r, "neck.ogf3", branches);
    w.down34 = read_kernel(r, "neck.down34");
    w.pan4 = read_kernel(r, "neck.pan4");
    w.down45 = read_kernel(r, "neck.down45");
    w.pan5 = read_kernel(r, "neck.pan5");
    return w;
}

inline json stub_weights_to_json(const fusion::StubWeights& w) {
    json out = json::array();
    out.push_back(kernel_entry("stub.s1", w.s1));
    out.push_back(kernel_entry("stub.s2", w.s2));
    out.push_back(kernel_entry("stub.s3", w.s3));
    out.push_back(kernel_entry("stub.s4", w.s4));
    out.push_back(kernel_entry("stub.s5", w.s5));
    return out;
}

inline fusion::StubWeights stub_weights_from_json(const json& j) {
    const FlatReader r(j);
    fusion::StubWeights w;
    w.s1 = read_kernel(r, "stub.s1");
    w.s2 = read_kernel(r, "stub.s2");
    w.s3 = read_kernel(r, "stub.s3");
    w.s4 = read_kernel(r, "stub.s4");
    w.s5 = read_kernel(r, "stub.s5");
    return w;
}

}  // namespace xmamba::serialize
