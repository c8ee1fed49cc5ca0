#pragma once

#include <cstdint>

#include "xmamba/errors.hpp"

namespace xmamba::flops {

// Analytic multiply-add counts derived from the declared op shapes; no
// timers. One MAC = one scalar multiply (+ accumulate). Elementwise
// transcendentals, pooling and the permutation moves are excluded on both
// sides of the comparison.

// Per direction and sequence: delta/B/C projections (C + 2NC), the
// discretization products (2N), the state update (2NC), readout (NC) and
// skip (C) per token.
inline std::int64_t s6_scan_macs(std::int64_t len, std::int64_t state_dim,
                                 std::int64_t channels) {
    if (len < 1 || state_dim < 1 || channels < 1) {
        throw ParameterError("flops: dims must be positive");
    }
    return len * (5 * state_dim * channels + 2 * state_dim + 2 * channels);
}

inline std::int64_t mlp_macs(std::int64_t len, std::int64_t channels, std::int64_t hidden) {
    return 2 * len * channels * hidden;
}

// Q/K/V/output projections (4LC^2) plus the two L x L attention products
// (2L^2C); identical count for self- and cross-attention at matched dims.
inline std::int64_t attention_block_macs(std::int64_t len, std::int64_t channels) {
    return 4 * len * channels * channels + 2 * len * len * channels;
}

inline std::int64_t attention_quadratic_macs(std::int64_t len, std::int64_t channels) {
    return 2 * len * len * channels;
}

struct FlopConfig {
    std::int64_t token_len = 64;
    std::int64_t state_dim = 8;
    std::int64_t channels = 32;
    std::int64_t hidden = 64;
    std::int64_t n_single = 3;
};

struct FlopReport {
    FlopConfig config;

    // mamba interaction path
    std::int64_t s6_per_direction = 0;
    std::int64_t mlp_per_block = 0;
    std::int64_t single_block = 0;   // mlp + 4 directions
    std::int64_t cross_block = 0;    // 6 directions x 2 role-swapped runs
    std::int64_t mamba_total = 0;    // 2 modalities x n_single singles + cross

    // attention counting model at matched dims
    std::int64_t attention_per_block = 0;  // mlp + self-attention
    std::int64_t cross_attention = 0;      // 2 cross-attention blocks
    std::int64_t attention_total = 0;
    std::int64_t attention_quadratic = 0;  // all L^2-proportional MACs

    double attention_to_mamba_ratio = 0.0;
};

inline FlopReport flop_estimate(const FlopConfig& cfg) {
    if (cfg.token_len < 1 || cfg.n_single < 0) {
        throw ParameterError("flops: token_len must be >= 1 and n_single >= 0");
    }
    FlopReport r;
    r.config = cfg;
    r.s6_per_direction = s6_scan_macs(cfg.token_len, cfg.state_dim, cfg.channels);
    r.mlp_per_block = mlp_macs(cfg.token_len, cfg.channels, cfg.hidden);
    r.single_block = r.mlp_per_block + 4 * r.s6_per_direction;
    r.cross_block = 12 * r.s6_per_direction;
    r.mamba_total = 2 * cfg.n_single * r.single_block + r.cross_block;

    const std::int64_t attn = attention_block_macs(cfg.token_len, cfg.channels);
    r.attention_per_block = r.mlp_per_block + attn;
    r.cross_attention = 2 * attn;
    r.attention_total = 2 * cfg.n_single * r.attention_per_block + r.cross_attention;
    r.attention_quadratic = (2 * cfg.n_single + 2) *
                            attention_quadratic_macs(cfg.token_len, cfg.channels);

    r.attention_to_mamba_ratio =
        static_cast<double>(r.attention_total) / static_cast<double>(r.mamba_total);
    return r;
}

}  // namespace xmamba::flops
