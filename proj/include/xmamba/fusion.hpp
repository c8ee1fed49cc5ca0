#pragma once

#include <string>
#include <vector>

#include "xmamba/errors.hpp"
#include "xmamba/tensor.hpp"

namespace xmamba::fusion {

// Offset-guided fusion. One high-level guided map and the two low-level
// modality maps are channel-concatenated and pushed through N parallel
// branches, out = sum_i (ConvBlock_i(x) + RepBlock(ConvBlock_i(x))).
// ConvBlock = 3x3 conv + SiLU at the scale's channel count, RepBlock = a
// shared 1x1 channel-reconstruction conv. The low-level maps are never
// warped or resampled against each other; offset mitigation comes from the
// guidance input alone.

struct FusionConfig {
    int branch_count = 2;
    int c3 = 8;
    int c4 = 16;
    int c5 = 32;
};

inline void validate(const FusionConfig& cfg) {
    if (cfg.branch_count < 1) throw ParameterError("fusion: branch_count must be >= 1");
    if (cfg.c3 < 1 || cfg.c4 < 1 || cfg.c5 < 1) {
        throw ParameterError("fusion: channel plan entries must be positive");
    }
}

struct OgfWeights {
    std::vector<ConvKernel> branches;  // N kernels, 3x3, c_in_total -> c_out
    ConvKernel rep;                    // 1x1, c_out -> c_out, shared across branches
};

inline OgfWeights make_ogf_weights(int c_in, int c_out, int branches, SeededRng& rng) {
    OgfWeights w;
    const double s = 1.0 / std::sqrt(9.0 * c_in);
    for (int i = 0; i < branches; ++i) {
        w.branches.push_back(random_kernel(3, 3, c_in, c_out, rng, s));
    }
    w.rep = random_kernel(1, 1, c_out, c_out, rng, 1.0 / std::sqrt(static_cast<double>(c_out)));
    return w;
}

inline FeatureMap conv_block(const FeatureMap& x, const ConvKernel& k) {
    return silu(conv2d(x, k, /*stride=*/1, /*padding=*/1));
}

inline FeatureMap down_block(const FeatureMap& x, const ConvKernel& k) {
    return silu(conv2d(x, k, /*stride=*/2, /*padding=*/1));
}

inline FeatureMap ogf_unit(const FeatureMap& f_high, const FeatureMap& s_low_rgb,
                           const FeatureMap& s_low_ir, const OgfWeights& w,
                           const FusionConfig& cfg) {
    validate(cfg);
    if (f_high.height != s_low_rgb.height || f_high.width != s_low_rgb.width ||
        f_high.height != s_low_ir.height || f_high.width != s_low_ir.width) {
        throw GeometryError("ogf_unit: inputs must share spatial dims after alignment");
    }
    if (static_cast<int>(w.branches.size()) != cfg.branch_count) {
        throw DimensionError("ogf_unit: expected " + std::to_string(cfg.branch_count) +
                             " branch kernels, got " + std::to_string(w.branches.size()));
    }
    for (const ConvKernel& k : w.branches) {
        if (k.c_out != w.branches[0].c_out) {
            throw DimensionError("ogf_unit: branch kernels disagree on output channels");
        }
    }
    const FeatureMap x = concat_channels({&f_high, &s_low_rgb, &s_low_ir});
    FeatureMap out(f_high.height, f_high.width, w.branches[0].c_out);
    for (const ConvKernel& k : w.branches) {
        const FeatureMap cb = conv_block(x, k);
        const FeatureMap rb = conv2d(cb, w.rep, 1, 0);
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            out.data[i] += cb.data[i] + rb.data[i];
        }
    }
    return out;
}

// Three scales per modality plus the interacted high-level pair. The
// interacted maps live on the token grid and are realigned to the coarsest
// scale inside the neck.
struct PyramidSet {
    FeatureMap s3_rgb, s4_rgb, s5_rgb;
    FeatureMap s3_ir, s4_ir, s5_ir;
    FeatureMap f5_rgb, f5_ir;
};

inline void validate(const PyramidSet& p) {
    auto check_pair = [](const FeatureMap& a, const FeatureMap& b, const char* name) {
        if (!a.same_shape(b)) {
            throw GeometryError(std::string("pyramid: rgb/ir shapes differ at ") + name);
        }
    };
    check_pair(p.s3_rgb, p.s3_ir, "s3");
    check_pair(p.s4_rgb, p.s4_ir, "s4");
    check_pair(p.s5_rgb, p.s5_ir, "s5");
    check_pair(p.f5_rgb, p.f5_ir, "f5");
    if (p.s3_rgb.height != 2 * p.s4_rgb.height || p.s3_rgb.width != 2 * p.s4_rgb.width ||
        p.s4_rgb.height != 2 * p.s5_rgb.height || p.s4_rgb.width != 2 * p.s5_rgb.width) {
        throw GeometryError("pyramid: scales must halve spatial dims");
    }
}

struct NeckWeights {
    ConvKernel pair_fuse;  // 3x3, 2*c5 -> c5
    OgfWeights ogf4;       // 3x3 branches, c5 + 2*c4 -> c4
    OgfWeights ogf3;       // 3x3 branches, c4 + 2*c3 -> c3
    ConvKernel down34;     // 3x3 stride 2, c3 -> c4
    ConvKernel pan4;       // 3x3, 2*c4 -> c4
    ConvKernel down45;     // 3x3 stride 2, c4 -> c5
    ConvKernel pan5;       // 3x3, 2*c5 -> c5
};

inline NeckWeights make_neck_weights(const FusionConfig& cfg, SeededRng& rng) {
    NeckWeights w;
    auto scale = [](int c_in) { return 1.0 / std::sqrt(9.0 * c_in); };
    w.pair_fuse = random_kernel(3, 3, 2 * cfg.c5, cfg.c5, rng, scale(2 * cfg.c5));
    w.ogf4 = make_ogf_weights(cfg.c5 + 2 * cfg.c4, cfg.c4, cfg.branch_count, rng);
    w.ogf3 = make_ogf_weights(cfg.c4 + 2 * cfg.c3, cfg.c3, cfg.branch_count, rng);
    w.down34 = random_kernel(3, 3, cfg.c3, cfg.c4, rng, scale(cfg.c3));
    w.pan4 = random_kernel(3, 3, 2 * cfg.c4, cfg.c4, rng, scale(2 * cfg.c4));
    w.down45 = random_kernel(3, 3, cfg.c4, cfg.c5, rng, scale(cfg.c4));
    w.pan5 = random_kernel(3, 3, 2 * cfg.c5, cfg.c5, rng, scale(2 * cfg.c5));
    return w;
}

struct NeckOutput {
    FeatureMap p3, p4, p5;
    FeatureMap f5_fused;
};

// Top-down then bottom-up dataflow:
//   f5_fused = ConvBlock(concat(resize(f5_rgb), resize(f5_ir)))  at scale 5
//   p4' = ogf(up2x(f5_fused), s4_rgb, s4_ir)
//   p3  = ogf(up2x(p4'), s3_rgb, s3_ir)
//   p4  = ConvBlock(concat(down(p3), p4'))
//   p5  = ConvBlock(concat(down(p4), f5_fused))
inline NeckOutput neck_pipeline(const PyramidSet& pyr, const NeckWeights& w,
                                const FusionConfig& cfg) {
    validate(cfg);
    validate(pyr);

    const int h5 = pyr.s5_rgb.height, w5 = pyr.s5_rgb.width;
    const FeatureMap g_rgb = resize_nearest(pyr.f5_rgb, h5, w5);
    const FeatureMap g_ir = resize_nearest(pyr.f5_ir, h5, w5);
    const FeatureMap f5_fused = conv_block(concat_channels({&g_rgb, &g_ir}), w.pair_fuse);

    const FeatureMap u4 = upsample_nearest2x(f5_fused);
    const FeatureMap p4_td = ogf_unit(u4, pyr.s4_rgb, pyr.s4_ir, w.ogf4, cfg);

    const FeatureMap u3 = upsample_nearest2x(p4_td);
    const FeatureMap p3 = ogf_unit(u3, pyr.s3_rgb, pyr.s3_ir, w.ogf3, cfg);

    const FeatureMap d4 = down_block(p3, w.down34);
    const FeatureMap p4 = conv_block(concat_channels({&d4, &p4_td}), w.pan4);

    const FeatureMap d5 = down_block(p4, w.down45);
    const FeatureMap p5 = conv_block(concat_channels({&d5, &f5_fused}), w.pan5);

    NeckOutput out;
    out.p3 = p3;
    out.p4 = p4;
    out.p5 = p5;
    out.f5_fused = f5_fused;
    return out;
}

// Stand-in for the backbone: a chain of seeded stride-2 convolutions taking
// an image to the three pyramid scales (1/8, 1/16, 1/32).
struct StubWeights {
    ConvKernel s1, s2, s3, s4, s5;
};

inline StubWeights make_stub_weights(int image_channels, const FusionConfig& cfg,
                                     SeededRng& rng) {
    StubWeights w;
    auto scale = [](int c_in) { return 1.0 / std::sqrt(9.0 * c_in); };
    w.s1 = random_kernel(3, 3, image_channels, cfg.c3, rng, scale(image_channels));
    w.s2 = random_kernel(3, 3, cfg.c3, cfg.c3, rng, scale(cfg.c3));
    w.s3 = random_kernel(3, 3, cfg.c3, cfg.c3, rng, scale(cfg.c3));
    w.s4 = random_kernel(3, 3, cfg.c3, cfg.c4, rng, scale(cfg.c3));
    w.s5 = random_kernel(3, 3, cfg.c4, cfg.c5, rng, scale(cfg.c4));
    return w;
}

struct BackbonePyramid {
    FeatureMap s3, s4, s5;
};

inline BackbonePyramid backbone_stub(const FeatureMap& image, const StubWeights& w) {
    if (image.height % 32 != 0 || image.width % 32 != 0) {
        throw GeometryError("backbone_stub: image dims must be divisible by 32");
    }
    const FeatureMap x1 = down_block(image, w.s1);  // 1/2
    const FeatureMap x2 = down_block(x1, w.s2);     // 1/4
    BackbonePyramid pyr;
    pyr.s3 = down_block(x2, w.s3);                  // 1/8
    pyr.s4 = down_block(pyr.s3, w.s4);              // 1/16
    pyr.s5 = down_block(pyr.s4, w.s5);              // 1/32
    return pyr;
}

}  // namespace xmamba::fusion
