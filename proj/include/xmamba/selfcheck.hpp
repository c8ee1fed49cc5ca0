#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "xmamba/blocks.hpp"
#include "xmamba/flops.hpp"
#include "xmamba/fusion.hpp"
#include "xmamba/offsets.hpp"
#include "xmamba/scan.hpp"
#include "xmamba/ssm.hpp"
#include "xmamba/tensor.hpp"

namespace xmamba::selfcheck {

// Runtime invariant suites, one per module, runnable from the CLI. Each
// suite re-verifies the module's declared invariants on seeded random
// instances and reports machine-readable results.

struct SuiteResult {
    std::string name;
    bool passed = true;
    int checks = 0;
    std::vector<std::string> failures;
};

// Test hooks. The scan-plan mutator is applied to every plan the scanpaths
// suite builds, so tests can verify the suite catches corrupted plans.
struct Hooks {
    std::function<void(scan::ScanPlan&)> scan_plan_mutator;
};

namespace detail {

struct Ctx {
    SuiteResult result;

    void check(bool cond, const std::string& what) {
        ++result.checks;
        if (!cond) {
            result.passed = false;
            result.failures.push_back(what);
        }
    }
};

}  // namespace detail

inline SuiteResult tensors_suite(std::uint64_t seed) {
    detail::Ctx ctx;
    ctx.result.name = "tensors";
    SeededRng rng(seed);

    // conv2d against a direct six-loop evaluation
    {
        const FeatureMap in = random_feature_map(10, 12, 3, rng);
        const ConvKernel k = random_kernel(3, 3, 3, 2, rng, 0.5);
        const FeatureMap got = conv2d(in, k, 1, 1);
        bool equal = got.height == 10 && got.width == 12 && got.channels == 2;
        for (int oy = 0; equal && oy < 10; ++oy) {
            for (int ox = 0; equal && ox < 12; ++ox) {
                for (int co = 0; co < 2; ++co) {
                    double acc = 0.0;
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx)
                            for (int ci = 0; ci < 3; ++ci) {
                                const int y = oy + ky - 1, x = ox + kx - 1;
                                if (y < 0 || y >= 10 || x < 0 || x >= 12) continue;
                                acc += in.at(y, x, ci) * k.at(ky, kx, ci, co);
                            }
                    if (got.at(oy, ox, co) != acc) {
                        equal = false;
                        break;
                    }
                }
            }
        }
        ctx.check(equal, "conv2d disagrees with direct loop evaluation");
    }

    // average pooling times window area recovers window sums on divisible geometry
    {
        const FeatureMap in = random_feature_map(8, 8, 2, rng);
        const FeatureMap pooled = adaptive_pool(in, 4, 4, PoolMode::avg);
        bool ok = true;
        for (int i = 0; ok && i < 4; ++i)
            for (int j = 0; ok && j < 4; ++j)
                for (int c = 0; c < 2; ++c) {
                    double sum = 0.0;
                    for (int y = 2 * i; y < 2 * i + 2; ++y)
                        for (int x = 2 * j; x < 2 * j + 2; ++x) sum += in.at(y, x, c);
                    if (std::abs(pooled.at(i, j, c) * 4.0 - sum) > 1e-12) {
                        ok = false;
                        break;
                    }
                }
        ctx.check(ok, "avg pool x window area != window sums");
    }

    // identical seed reproduces streams and dropout masks bit-exactly
    {
        SeededRng a(seed + 7), b(seed + 7);
        bool same = true;
        for (int i = 0; i < 64; ++i) same = same && a.next_u64() == b.next_u64();
        ctx.check(same, "SeededRng stream not reproducible");

        SeededRng r1(seed + 9), r2(seed + 9);
        const TokenSequence x = random_tokens(16, 4, rng);
        const TokenSequence d1 = dropout(x, 0.5, r1, true);
        const TokenSequence d2 = dropout(x, 0.5, r2, true);
        ctx.check(d1.data == d2.data, "dropout mask not seed-deterministic");
    }

    // finiteness through the elementwise ops
    {
        const FeatureMap in = random_feature_map(6, 6, 3, rng, -30.0, 30.0);
        ctx.check(all_finite(silu(in)), "silu produced non-finite values");
    }
    return ctx.result;
}

inline SuiteResult scanpaths_suite(std::uint64_t seed, const Hooks& hooks = {}) {
    detail::Ctx ctx;
    ctx.result.name = "scanpaths";
    SeededRng rng(seed);

    const int grid_h = 6, grid_w = 9;
    const auto dirs = scan::global_and_local_directions();
    for (const scan::Direction dir : dirs) {
        scan::ScanPlan plan = scan::build_scan_plan(
            grid_h, grid_w, dir, scan::is_local(dir) ? 2 : 0, scan::is_local(dir) ? 3 : 0);
        if (hooks.scan_plan_mutator) hooks.scan_plan_mutator(plan);

        // bijectivity: sorting order yields 0..H*W-1 without repeats
        std::vector<int> sorted = plan.order;
        std::sort(sorted.begin(), sorted.end());
        bool bijective = static_cast<int>(sorted.size()) == grid_h * grid_w;
        for (int i = 0; bijective && i < static_cast<int>(sorted.size()); ++i) {
            bijective = sorted[i] == i;
        }
        ctx.check(bijective, std::string("plan not a bijection: ") +
                                 scan::direction_name(dir));

        bool inverse_ok = true;
        for (int t = 0; t < static_cast<int>(plan.order.size()); ++t) {
            if (plan.inverse[plan.order[t]] != t) {
                inverse_ok = false;
                break;
            }
        }
        ctx.check(inverse_ok, std::string("inverse[order[i]] != i: ") +
                                  scan::direction_name(dir));

        const FeatureMap grid = random_feature_map(grid_h, grid_w, 3, rng);
        const FeatureMap back = scan::reverse_scan(scan::apply_scan(grid, plan), plan);
        ctx.check(back.data == grid.data, std::string("round trip not exact: ") +
                                              scan::direction_name(dir));
    }

    // locality: consecutive in-window steps stay within Chebyshev w-1
    {
        scan::ScanPlan plan = scan::build_scan_plan(8, 8, scan::Direction::local_fwd, 2, 2);
        if (hooks.scan_plan_mutator) hooks.scan_plan_mutator(plan);
        bool bounded = true;
        const int win = 4;  // tokens per 2x2 window
        for (int t = 0; t + 1 < static_cast<int>(plan.order.size()); ++t) {
            if ((t + 1) % win == 0) continue;  // window boundary
            const int g0 = plan.order[t], g1 = plan.order[t + 1];
            const int dy = std::abs(g0 / 8 - g1 / 8), dx = std::abs(g0 % 8 - g1 % 8);
            if (std::max(dy, dx) > 1) {
                bounded = false;
                break;
            }
        }
        ctx.check(bounded, "local scan exceeded in-window Chebyshev bound");
    }

    ctx.check(scan::global_directions().size() == 4, "single path direction count != 4");
    ctx.check(scan::global_and_local_directions().size() == 6,
              "cross path direction count != 6");
    return ctx.result;
}

inline SuiteResult ssm_suite(std::uint64_t seed) {
    detail::Ctx ctx;
    ctx.result.name = "ssm";
    SeededRng rng(seed);

    const int n = 6, c = 3, len = 24;
    ssm::SsmParams params = ssm::make_ssm_params(n, c, rng);
    const TokenSequence x = random_tokens(len, c, rng);

    // discretization stability: every Abar entry in (0, 1)
    {
        const ssm::Projections proj = ssm::selective_project(x, params);
        const ssm::DiscreteSsmParams disc = ssm::zoh_discretize(params, proj);
        bool stable = true;
        for (double v : disc.a_bar.a) stable = stable && v > 0.0 && v < 1.0;
        ctx.check(stable, "Abar left (0, 1) for delta > 0, A < 0");

        // Bbar == delta * B under the first-order hold
        bool bbar_ok = true;
        for (int t = 0; t < len; ++t)
            for (int j = 0; j < n; ++j)
                bbar_ok = bbar_ok &&
                          disc.b_bar.at(t, j) == proj.delta[t] * proj.b.at(t, j);
        ctx.check(bbar_ok, "Bbar != delta * B");
    }

    // state boundedness under |Abar| < 1
    {
        const ssm::Projections proj = ssm::selective_project(x, params);
        const ssm::DiscreteSsmParams disc = ssm::zoh_discretize(params, proj);
        double max_abar = 0.0, max_drive = 0.0;
        for (double v : disc.a_bar.a) max_abar = std::max(max_abar, std::abs(v));
        for (int t = 0; t < len; ++t)
            for (int ch = 0; ch < c; ++ch)
                for (int j = 0; j < n; ++j)
                    max_drive = std::max(max_drive,
                                         std::abs(disc.b_bar.at(t, j) * x.at(t, ch)));
        const double bound = max_drive / (1.0 - max_abar);
        std::vector<double> h(static_cast<std::size_t>(c) * n, 0.0);
        bool bounded = true;
        for (int t = 0; t < len && bounded; ++t)
            for (int ch = 0; ch < c; ++ch)
                for (int j = 0; j < n; ++j) {
                    double& hv = h[static_cast<std::size_t>(ch) * n + j];
                    hv = disc.a_bar.at(t, j) * hv + disc.b_bar.at(t, j) * x.at(t, ch);
                    if (std::abs(hv) > bound + 1e-9) bounded = false;
                }
        ctx.check(bounded, "hidden state exceeded geometric bound");
    }

    // time-invariant linearity within 1e-12; cs6(x, x) == s6(x)
    {
        params.fixed_delta = 0.3;
        for (int j = 0; j < n; ++j) {
            params.fixed_b[j] = rng.uniform(-1.0, 1.0);
            params.fixed_c[j] = rng.uniform(-1.0, 1.0);
        }
        const TokenSequence z = random_tokens(len, c, rng);
        const double alpha = 1.7, beta = -0.4;
        TokenSequence mix(len, c);
        for (std::size_t i = 0; i < mix.data.size(); ++i) {
            mix.data[i] = alpha * x.data[i] + beta * z.data[i];
        }
        const TokenSequence lhs = ssm::s6_scan(mix, params, ssm::ScanMode::time_invariant);
        const TokenSequence yx = ssm::s6_scan(x, params, ssm::ScanMode::time_invariant);
        const TokenSequence yz = ssm::s6_scan(z, params, ssm::ScanMode::time_invariant);
        double max_err = 0.0;
        for (std::size_t i = 0; i < lhs.data.size(); ++i) {
            max_err = std::max(max_err,
                               std::abs(lhs.data[i] - (alpha * yx.data[i] + beta * yz.data[i])));
        }
        ctx.check(max_err < 1e-12, "time-invariant scan not linear within 1e-12");

        const TokenSequence ys = ssm::s6_scan(x, params, ssm::ScanMode::selective);
        const TokenSequence yc = ssm::cs6_scan(x, x, params, ssm::ScanMode::selective);
        ctx.check(ys.data == yc.data, "cs6(x, x) != s6(x)");
    }

    // forward MAC count is linear in L
    ctx.check(flops::s6_scan_macs(2 * len, n, c) == 2 * flops::s6_scan_macs(len, n, c),
              "S6 MAC count not linear in L");
    return ctx.result;
}

inline SuiteResult blocks_suite(std::uint64_t seed) {
    detail::Ctx ctx;
    ctx.result.name = "blocks";
    SeededRng rng(seed);

    blocks::BlockConfig cfg;
    cfg.channels = 4;
    cfg.hidden = 8;
    cfg.state_dim = 4;
    cfg.n_single = 1;

    // shape preservation and determinism
    {
        SeededRng pa(seed + 1), pb(seed + 1);
        const blocks::InteractionParams params_a = blocks::make_interaction_params(cfg, pa);
        const blocks::InteractionParams params_b = blocks::make_interaction_params(cfg, pb);
        const FeatureMap f1 = random_feature_map(16, 16, cfg.channels, rng);
        const FeatureMap f2 = random_feature_map(16, 16, cfg.channels, rng);
        const auto [y1a, y2a] = blocks::mamba_interaction(f1, f2, params_a, cfg);
        const auto [y1b, y2b] = blocks::mamba_interaction(f1, f2, params_b, cfg);
        ctx.check(y1a.height == cfg.grid_h && y1a.width == cfg.grid_w &&
                      y1a.channels == cfg.channels,
                  "interaction output left the token grid shape");
        ctx.check(y1a.data == y1b.data && y2a.data == y2b.data,
                  "same seed did not reproduce interaction bit-exactly");
        ctx.check(all_finite(y1a) && all_finite(y2a), "interaction output not finite");

        // modal-role asymmetry on distinct inputs
        double sep = 0.0;
        for (std::size_t i = 0; i < y1a.data.size(); ++i) {
            sep = std::max(sep, std::abs(y1a.data[i] - y2a.data[i]));
        }
        ctx.check(sep > 1e-9, "cross outputs identical for distinct inputs");
    }

    // constant input, time-invariant: rotation symmetry always; exact
    // constancy when the readout path is zero
    {
        blocks::BlockConfig ti_cfg = cfg;
        ti_cfg.selective = false;
        SeededRng pr(seed + 2);
        blocks::SingleBlockParams params = blocks::make_single_block_params(ti_cfg, pr);
        for (double& v : params.pos_embedding.data) v = 0.0;
        const FeatureMap constant(12, 12, ti_cfg.channels, 0.7);

        const FeatureMap out = blocks::single_mamba_block(constant, params, ti_cfg);
        bool rot_sym = true;
        const int hw = ti_cfg.grid_h * ti_cfg.grid_w;
        for (int g = 0; g < hw && rot_sym; ++g) {
            for (int ch = 0; ch < ti_cfg.channels; ++ch) {
                const double a = out.data[static_cast<std::size_t>(g) * ti_cfg.channels + ch];
                const double b =
                    out.data[static_cast<std::size_t>(hw - 1 - g) * ti_cfg.channels + ch];
                if (std::abs(a - b) > 1e-9) {
                    rot_sym = false;
                    break;
                }
            }
        }
        ctx.check(rot_sym, "constant TI input lost 180-degree symmetry");

        for (auto& dp : params.directions) std::fill(dp.fixed_c.begin(), dp.fixed_c.end(), 0.0);
        const FeatureMap out0 = blocks::single_mamba_block(constant, params, ti_cfg);
        bool flat = true;
        for (int ch = 0; ch < ti_cfg.channels && flat; ++ch) {
            const double ref = out0.at(0, 0, ch);
            for (int g = 0; g < hw; ++g) {
                if (out0.data[static_cast<std::size_t>(g) * ti_cfg.channels + ch] != ref) {
                    flat = false;
                    break;
                }
            }
        }
        ctx.check(flat, "constant TI input with zero readout not constant");
    }
    return ctx.result;
}

inline SuiteResult fusion_suite(std::uint64_t seed) {
    detail::Ctx ctx;
    ctx.result.name = "fusion";
    SeededRng rng(seed);

    fusion::FusionConfig cfg;
    cfg.c3 = 3;
    cfg.c4 = 4;
    cfg.c5 = 6;
    SeededRng wrng = rng.split(1);
    const fusion::NeckWeights weights = fusion::make_neck_weights(cfg, wrng);

    fusion::PyramidSet pyr;
    pyr.s3_rgb = random_feature_map(16, 16, cfg.c3, rng);
    pyr.s3_ir = random_feature_map(16, 16, cfg.c3, rng);
    pyr.s4_rgb = random_feature_map(8, 8, cfg.c4, rng);
    pyr.s4_ir = random_feature_map(8, 8, cfg.c4, rng);
    pyr.s5_rgb = random_feature_map(4, 4, cfg.c5, rng);
    pyr.s5_ir = random_feature_map(4, 4, cfg.c5, rng);
    pyr.f5_rgb = random_feature_map(4, 4, cfg.c5, rng);
    pyr.f5_ir = random_feature_map(4, 4, cfg.c5, rng);

    const fusion::NeckOutput base = fusion::neck_pipeline(pyr, weights, cfg);
    ctx.check(base.p3.height == 16 && base.p4.height == 8 && base.p5.height == 4,
              "pyramid output scales wrong");
    ctx.check(all_finite(base.p3) && all_finite(base.p4) && all_finite(base.p5),
              "pyramid outputs not finite");

    // guidance reaches the finest scale
    {
        fusion::PyramidSet bumped = pyr;
        bumped.f5_rgb.at(1, 1, 0) += 0.25;
        const fusion::NeckOutput out = fusion::neck_pipeline(bumped, weights, cfg);
        double diff = 0.0;
        for (std::size_t i = 0; i < out.p3.data.size(); ++i) {
            diff = std::max(diff, std::abs(out.p3.data[i] - base.p3.data[i]));
        }
        ctx.check(diff > 0.0, "perturbing the interacted pair did not reach P3");
    }

    // both low-level modalities matter
    {
        fusion::PyramidSet zeroed = pyr;
        std::fill(zeroed.s3_ir.data.begin(), zeroed.s3_ir.data.end(), 0.0);
        const fusion::NeckOutput out = fusion::neck_pipeline(zeroed, weights, cfg);
        double diff = 0.0;
        for (std::size_t i = 0; i < out.p3.data.size(); ++i) {
            diff = std::max(diff, std::abs(out.p3.data[i] - base.p3.data[i]));
        }
        ctx.check(diff > 0.0, "zeroing the infrared low level did not change P3");
    }
    return ctx.result;
}

inline SuiteResult offsets_suite(std::uint64_t seed) {
    detail::Ctx ctx;
    ctx.result.name = "offsets";
    SeededRng rng(seed);

    // clamped retention monotone in |dx| and in block size
    {
        bool monotone = true;
        double prev = 1e300;
        for (int dx = 0; dx <= 16; ++dx) {
            const double a = offsets::intersection_area(8.0, 8.0, dx, 0.0);
            if (a > prev + 1e-12) monotone = false;
            prev = a;
        }
        ctx.check(monotone, "clamped area not monotone in |dx|");

        const std::vector<double> levels{8.0, 16.0, 32.0};
        const std::vector<double> frac = offsets::retention_by_level(4.0, 4.0, levels);
        ctx.check(frac[0] <= frac[1] && frac[1] <= frac[2],
                  "retention not monotone in block size");
    }

    // histogram is a partition of all magnitudes
    {
        std::vector<offsets::OffsetRecord> recs;
        for (int i = 0; i < 200; ++i) {
            offsets::OffsetRecord r;
            r.dx = rng.uniform(-20.0, 20.0);
            r.dy = rng.uniform(-20.0, 20.0);
            recs.push_back(r);
        }
        const offsets::OffsetHistogram h = offsets::offset_stats(recs);
        long long sum = 0;
        for (long long c : h.counts) sum += c;
        ctx.check(sum == h.total && h.total == 200, "histogram counts not a partition");
        ctx.check(h.misaligned_fraction >= 0.0 && h.misaligned_fraction <= 1.0,
                  "misaligned fraction out of range");
    }

    // list-swap symmetry up to a sign flip
    {
        std::vector<offsets::Box> a, b;
        for (int i = 0; i < 12; ++i) {
            offsets::Box box;
            box.x = rng.uniform(0.0, 200.0);
            box.y = rng.uniform(0.0, 200.0);
            box.w = rng.uniform(4.0, 12.0);
            box.h = rng.uniform(4.0, 12.0);
            a.push_back(box);
            offsets::Box shifted = box;
            shifted.x += rng.uniform(-3.0, 3.0);
            shifted.y += rng.uniform(-3.0, 3.0);
            b.push_back(shifted);
        }
        const offsets::MatchResult ab = offsets::match_annotations(a, b, 20.0);
        const offsets::MatchResult ba = offsets::match_annotations(b, a, 20.0);
        bool sym = ab.records.size() == ba.records.size();
        for (std::size_t i = 0; sym && i < ab.records.size(); ++i) {
            bool found = false;
            for (const offsets::OffsetRecord& r : ba.records) {
                if (r.index_a == ab.records[i].index_b &&
                    r.index_b == ab.records[i].index_a) {
                    found = std::abs(r.dx + ab.records[i].dx) < 1e-12 &&
                            std::abs(r.dy + ab.records[i].dy) < 1e-12;
                    break;
                }
            }
            sym = found;
        }
        ctx.check(sym, "matching not symmetric under list swap");
    }
    return ctx.result;
}

inline SuiteResult flops_suite(std::uint64_t seed) {
    detail::Ctx ctx;
    ctx.result.name = "flops";
    (void)seed;

    flops::FlopConfig cfg;
    const flops::FlopReport r1 = flops::flop_estimate(cfg);
    flops::FlopConfig cfg2 = cfg;
    cfg2.token_len *= 2;
    const flops::FlopReport r2 = flops::flop_estimate(cfg2);

    ctx.check(r2.mamba_total == 2 * r1.mamba_total, "mamba total not linear in L");
    ctx.check(r2.attention_quadratic == 4 * r1.attention_quadratic,
              "attention quadratic term did not quadruple");
    ctx.check(r1.mamba_total ==
                  2 * cfg.n_single * r1.single_block + r1.cross_block,
              "mamba total != component sum");
    ctx.check(r1.attention_total ==
                  2 * cfg.n_single * r1.attention_per_block + r1.cross_attention,
              "attention total != component sum");
    ctx.check(r1.mamba_total > 0 && r1.attention_total > 0, "counts must be positive");
    ctx.check(r1.mamba_total < r1.attention_total,
              "mamba interaction should cost less than matched attention");
    return ctx.result;
}

inline std::vector<SuiteResult> run_all(std::uint64_t seed, const std::string& filter = "",
                                        const Hooks& hooks = {}) {
    std::vector<SuiteResult> results;
    auto want = [&filter](const char* name) {
        return filter.empty() || std::string(name).find(filter) != std::string::npos;
    };
    if (want("tensors")) results.push_back(tensors_suite(seed));
    if (want("scanpaths")) results.push_back(scanpaths_suite(seed, hooks));
    if (want("ssm")) results.push_back(ssm_suite(seed));
    if (want("blocks")) results.push_back(blocks_suite(seed));
    if (want("fusion")) results.push_back(fusion_suite(seed));
    if (want("offsets")) results.push_back(offsets_suite(seed));
    if (want("flops")) results.push_back(flops_suite(seed));
    return results;
}

}  // namespace xmamba::selfcheck
