#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xmamba/errors.hpp"
#include "xmamba/scan.hpp"
#include "xmamba/ssm.hpp"
#include "xmamba/tensor.hpp"

namespace xmamba::blocks {

// Composition layer. A single block pools the incoming map to the token
// grid, runs the MLP + dropout mapping, adds a positional embedding, scans
// the grid in four global directions through per-direction S6 kernels,
// merges the reverse-scanned results and adds the pooled map back as a
// shortcut. The cross block interacts two modalities through six scan
// directions (four global + two local), running the CS6 kernel twice per
// direction with swapped driver/skip roles.

struct BlockConfig {
    int grid_h = 8;
    int grid_w = 8;
    int channels = 32;
    int hidden = 64;  // MLP width, 2x channels by default
    int state_dim = 8;
    double dropout_p = 0.1;
    int n_single = 3;
    int window_h = 2;
    int window_w = 2;
    bool selective = true;
    bool share_direction_params = false;

    int token_count() const { return grid_h * grid_w; }
    ssm::ScanMode mode() const {
        return selective ? ssm::ScanMode::selective : ssm::ScanMode::time_invariant;
    }
};

inline void validate(const BlockConfig& cfg) {
    if (cfg.grid_h < 1 || cfg.grid_w < 1 || cfg.channels < 1 || cfg.hidden < 1 ||
        cfg.state_dim < 1) {
        throw ParameterError("blocks: grid, channel, hidden and state dims must be positive");
    }
    if (cfg.n_single < 0) throw ParameterError("blocks: n_single must be >= 0");
    if (cfg.dropout_p < 0.0 || cfg.dropout_p >= 1.0) {
        throw ParameterError("blocks: dropout_p must lie in [0, 1)");
    }
    scan::validate_window(cfg.grid_h, cfg.grid_w, cfg.window_h, cfg.window_w);
}

struct MlpWeights {
    Mat w1;                  // hidden x C
    std::vector<double> b1;  // hidden
    Mat w2;                  // C x hidden
    std::vector<double> b2;  // C
};

struct SingleBlockParams {
    MlpWeights mlp;
    TokenSequence pos_embedding;              // L x C
    std::vector<ssm::SsmParams> directions;   // 4, or 1 when shared
};

struct CrossBlockParams {
    std::vector<ssm::SsmParams> directions;   // 6, or 1 when shared
};

struct InteractionParams {
    std::vector<SingleBlockParams> single_a;  // n_single blocks, first modality
    std::vector<SingleBlockParams> single_b;  // n_single blocks, second modality
    CrossBlockParams cross;
};

inline MlpWeights make_mlp_weights(const BlockConfig& cfg, SeededRng& rng) {
    MlpWeights w;
    const double s1 = 1.0 / std::sqrt(static_cast<double>(cfg.channels));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    w.w1 = random_mat(cfg.hidden, cfg.channels, rng, -s1, s1);
    w.b1.assign(cfg.hidden, 0.0);
    w.w2 = random_mat(cfg.channels, cfg.hidden, rng, -s2, s2);
    w.b2.assign(cfg.channels, 0.0);
    return w;
}

inline SingleBlockParams make_single_block_params(const BlockConfig& cfg, SeededRng& rng) {
    SingleBlockParams p;
    p.mlp = make_mlp_weights(cfg, rng);
    p.pos_embedding = TokenSequence(cfg.token_count(), cfg.channels);
    for (double& v : p.pos_embedding.data) v = rng.uniform(-0.02, 0.02);
    const int n_dir = cfg.share_direction_params ? 1 : 4;
    for (int i = 0; i < n_dir; ++i) {
        p.directions.push_back(ssm::make_ssm_params(cfg.state_dim, cfg.channels, rng));
    }
    return p;
}

inline CrossBlockParams make_cross_block_params(const BlockConfig& cfg, SeededRng& rng) {
    CrossBlockParams p;
    const int n_dir = cfg.share_direction_params ? 1 : 6;
    for (int i = 0; i < n_dir; ++i) {
        p.directions.push_back(ssm::make_ssm_params(cfg.state_dim, cfg.channels, rng));
    }
    return p;
}

inline InteractionParams make_interaction_params(const BlockConfig& cfg, SeededRng& rng) {
    InteractionParams p;
    for (int i = 0; i < cfg.n_single; ++i) {
        p.single_a.push_back(make_single_block_params(cfg, rng));
        p.single_b.push_back(make_single_block_params(cfg, rng));
    }
    p.cross = make_cross_block_params(cfg, rng);
    return p;
}

inline const ssm::SsmParams& direction_params(const std::vector<ssm::SsmParams>& dirs,
                                              int i) {
    return dirs.size() == 1 ? dirs[0] : dirs.at(static_cast<std::size_t>(i));
}

// F_in = avg pool + max pool onto the token grid; shapes below the grid are
// rejected rather than padded.
inline FeatureMap pool_embed(const FeatureMap& s_in, const BlockConfig& cfg) {
    if (s_in.height < cfg.grid_h || s_in.width < cfg.grid_w) {
        throw GeometryError("pool_embed: input " + std::to_string(s_in.height) + "x" +
                            std::to_string(s_in.width) + " smaller than token grid");
    }
    const FeatureMap avg = adaptive_pool(s_in, cfg.grid_h, cfg.grid_w, PoolMode::avg);
    const FeatureMap mx = adaptive_pool(s_in, cfg.grid_h, cfg.grid_w, PoolMode::max);
    return add(avg, mx);
}

// F_m = Drop(W2 . Silu(W1 . F_in + b1) + b2)
inline FeatureMap mlp_drop(const FeatureMap& f_in, const MlpWeights& w,
                           const BlockConfig& cfg, SeededRng* rng, bool training) {
    if (w.w1.cols != f_in.channels) {
        throw DimensionError("mlp_drop: first map expects " + std::to_string(w.w1.cols) +
                             " channels, input has " + std::to_string(f_in.channels));
    }
    TokenSequence tokens = flatten_tokens(f_in);
    TokenSequence hidden = silu(linear_map(tokens, w.w1, w.b1));
    TokenSequence mapped = linear_map(hidden, w.w2, w.b2);
    if (training) {
        if (rng == nullptr) throw ParameterError("mlp_drop: training mode needs an rng");
        mapped = dropout(mapped, cfg.dropout_p, *rng, true);
    }
    return to_grid(mapped, f_in.height, f_in.width);
}

namespace detail {

// Intermediates captured by the single-block forward pass so the MLP
// gradient can be chained without re-deriving the wiring.
struct SingleBlockTrace {
    FeatureMap pooled;             // F_in
    TokenSequence pooled_tokens;
    TokenSequence pre_act;         // W1 x + b1
    TokenSequence hidden;          // silu(pre_act)
    TokenSequence embedded;        // mlp output + positional embedding
    std::vector<scan::ScanPlan> plans;
    std::vector<TokenSequence> scanned;  // x_i per direction
};

inline FeatureMap single_block_forward(const FeatureMap& s_in,
                                       const SingleBlockParams& params,
                                       const BlockConfig& cfg, SeededRng* rng,
                                       bool training, SingleBlockTrace* trace) {
    validate(cfg);
    const FeatureMap pooled = pool_embed(s_in, cfg);

    TokenSequence tokens = flatten_tokens(pooled);
    TokenSequence pre_act = linear_map(tokens, params.mlp.w1, params.mlp.b1);
    TokenSequence hidden = silu(pre_act);
    TokenSequence mapped = linear_map(hidden, params.mlp.w2, params.mlp.b2);
    if (training) {
        if (rng == nullptr) throw ParameterError("single_mamba_block: training needs an rng");
        mapped = dropout(mapped, cfg.dropout_p, *rng, true);
    }
    if (!params.pos_embedding.same_shape(mapped)) {
        throw DimensionError("single_mamba_block: positional embedding shape mismatch");
    }
    TokenSequence embedded = add(mapped, params.pos_embedding);
    const FeatureMap token_grid = to_grid(embedded, cfg.grid_h, cfg.grid_w);

    std::vector<FeatureMap> merged_inputs;
    std::vector<scan::ScanPlan> plans;
    std::vector<TokenSequence> scanned;
    const auto dirs = scan::global_directions();
    for (int i = 0; i < 4; ++i) {
        scan::ScanPlan plan = scan::build_scan_plan(cfg.grid_h, cfg.grid_w, dirs[i]);
        TokenSequence x_i = scan::apply_scan(token_grid, plan);
        TokenSequence y_i = ssm::s6_scan(x_i, direction_params(params.directions, i),
                                         cfg.mode());
        merged_inputs.push_back(scan::reverse_scan(y_i, plan));
        plans.push_back(std::move(plan));
        scanned.push_back(std::move(x_i));
    }
    FeatureMap merged = scan::merge_directions(merged_inputs);
    FeatureMap out = add(merged, pooled);  // shortcut keeps the pooled feature intact

    if (trace != nullptr) {
        trace->pooled = pooled;
        trace->pooled_tokens = std::move(tokens);
        trace->pre_act = std::move(pre_act);
        trace->hidden = std::move(hidden);
        trace->embedded = std::move(embedded);
        trace->plans = std::move(plans);
        trace->scanned = std::move(scanned);
    }
    return out;
}

}  // namespace detail

inline FeatureMap single_mamba_block(const FeatureMap& s_in, const SingleBlockParams& params,
                                     const BlockConfig& cfg, SeededRng* rng = nullptr,
                                     bool training = false) {
    return detail::single_block_forward(s_in, params, cfg, rng, training, nullptr);
}

// Six-direction cross interaction. Y1 is the first modality's output: its
// tokens ride the skip path while the second modality drives the hidden
// state, and vice versa for Y2. Both role-swapped runs inside a direction
// share that direction's parameters.
inline std::pair<FeatureMap, FeatureMap> cross_mamba_block(const FeatureMap& f1,
                                                           const FeatureMap& f2,
                                                           const CrossBlockParams& params,
                                                           const BlockConfig& cfg) {
    if (!f1.same_shape(f2)) {
        throw DimensionError("cross_mamba_block: modality shapes differ");
    }
    scan::validate_window(f1.height, f1.width, cfg.window_h, cfg.window_w);

    std::vector<FeatureMap> grids1, grids2;
    const auto dirs = scan::global_and_local_directions();
    for (int i = 0; i < 6; ++i) {
        const scan::ScanPlan plan = scan::build_scan_plan(
            f1.height, f1.width, dirs[i],
            scan::is_local(dirs[i]) ? cfg.window_h : 0,
            scan::is_local(dirs[i]) ? cfg.window_w : 0);
        const TokenSequence x1 = scan::apply_scan(f1, plan);
        const TokenSequence x2 = scan::apply_scan(f2, plan);
        const ssm::SsmParams& p = direction_params(params.directions, i);
        const TokenSequence y1 = ssm::cs6_scan(x2, x1, p, cfg.mode());
        const TokenSequence y2 = ssm::cs6_scan(x1, x2, p, cfg.mode());
        grids1.push_back(scan::reverse_scan(y1, plan));
        grids2.push_back(scan::reverse_scan(y2, plan));
    }
    return {scan::merge_directions(grids1), scan::merge_directions(grids2)};
}

// n stacked single blocks per modality, then one cross interaction.
inline std::pair<FeatureMap, FeatureMap> mamba_interaction(
    const FeatureMap& f_a, const FeatureMap& f_b, const InteractionParams& params,
    const BlockConfig& cfg, SeededRng* rng = nullptr, bool training = false) {
    if (!f_a.same_shape(f_b)) {
        throw DimensionError("mamba_interaction: modality shapes differ");
    }
    if (static_cast<int>(params.single_a.size()) != cfg.n_single ||
        static_cast<int>(params.single_b.size()) != cfg.n_single) {
        throw DimensionError("mamba_interaction: expected " + std::to_string(cfg.n_single) +
                             " single-block parameter sets per modality");
    }
    FeatureMap a = f_a, b = f_b;
    for (int i = 0; i < cfg.n_single; ++i) {
        a = single_mamba_block(a, params.single_a[i], cfg, rng, training);
        b = single_mamba_block(b, params.single_b[i], cfg, rng, training);
    }
    return cross_mamba_block(a, b, params.cross, cfg);
}

// --- MLP weight gradients through the full single block ---------------------

struct MlpGradients {
    Mat dw1;
    std::vector<double> db1;
    Mat dw2;
    std::vector<double> db2;
};

inline double silu_grad(double z) {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

// d(loss)/d(MLP weights) for loss = <upstream, single_mamba_block(s_in)>,
// eval mode. Chains the scan adjoints (apply_scan and reverse_scan are each
// other's adjoints) through the per-direction S6 backward pass.
inline MlpGradients single_block_mlp_gradients(const FeatureMap& s_in,
                                               const SingleBlockParams& params,
                                               const BlockConfig& cfg,
                                               const FeatureMap& upstream) {
    detail::SingleBlockTrace trace;
    const FeatureMap out =
        detail::single_block_forward(s_in, params, cfg, nullptr, false, &trace);
    if (!upstream.same_shape(out)) {
        throw DimensionError("single_block_mlp_gradients: upstream shape mismatch");
    }

    // merged scan output and shortcut both receive upstream; only the scan
    // branch depends on the MLP
    TokenSequence d_embedded(trace.embedded.length, trace.embedded.channels);
    for (int i = 0; i < 4; ++i) {
        const TokenSequence d_y = scan::apply_scan(upstream, trace.plans[i]);
        const ssm::SsmGradients sg = ssm::s6_backward(
            trace.scanned[i], direction_params(params.directions, i), cfg.mode(), d_y);
        const FeatureMap d_x_grid = scan::reverse_scan(sg.dx, trace.plans[i]);
        for (std::size_t k = 0; k < d_embedded.data.size(); ++k) {
            d_embedded.data[k] += d_x_grid.data[k];
        }
    }

    const int len = d_embedded.length;
    const int ch = cfg.channels, hid = cfg.hidden;
    MlpGradients g;
    g.dw1 = Mat(hid, ch);
    g.db1.assign(hid, 0.0);
    g.dw2 = Mat(ch, hid);
    g.db2.assign(ch, 0.0);

    for (int t = 0; t < len; ++t) {
        // positional embedding add and eval-mode dropout are identities
        for (int r = 0; r < ch; ++r) {
            const double gm = d_embedded.at(t, r);
            g.db2[r] += gm;
            for (int c = 0; c < hid; ++c) g.dw2.at(r, c) += gm * trace.hidden.at(t, c);
        }
        for (int c = 0; c < hid; ++c) {
            double dh = 0.0;
            for (int r = 0; r < ch; ++r) dh += params.mlp.w2.at(r, c) * d_embedded.at(t, r);
            const double dz = dh * silu_grad(trace.pre_act.at(t, c));
            g.db1[c] += dz;
            for (int r = 0; r < ch; ++r) {
                g.dw1.at(c, r) += dz * trace.pooled_tokens.at(t, r);
            }
        }
    }
    return g;
}

}  // namespace xmamba::blocks
