#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "xmamba/errors.hpp"
#include "xmamba/rng.hpp"

namespace xmamba {

// Dense rank-3 map, row-major (h, w, c). All arithmetic is in 64-bit reals;
// desk-scale verification needs the headroom, speed does not matter here.
struct FeatureMap {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    double& at(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * width + j) * channels + k];
    }
    double at(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * width + j) * channels + k];
    }
    std::size_t size() const { return data.size(); }
    bool same_shape(const FeatureMap& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// Rank-2 token sequence, row-major (t, c).
struct TokenSequence {
    int length = 0;
    int channels = 0;
    std::vector<double> data;

    TokenSequence() = default;
    TokenSequence(int len, int c, double fill = 0.0)
        : length(len), channels(c), data(static_cast<std::size_t>(len) * c, fill) {}

    double& at(int t, int c) { return data[static_cast<std::size_t>(t) * channels + c]; }
    double at(int t, int c) const { return data[static_cast<std::size_t>(t) * channels + c]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const TokenSequence& o) const {
        return length == o.length && channels == o.channels;
    }
};

// Small dense matrix, row-major; projection weights and the like.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0)
        : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

// Rank-4 convolution weights, row-major (kh, kw, c_in, c_out).
struct ConvKernel {
    int kh = 0;
    int kw = 0;
    int c_in = 0;
    int c_out = 0;
    std::vector<double> data;

    ConvKernel() = default;
    ConvKernel(int kh_, int kw_, int ci, int co, double fill = 0.0)
        : kh(kh_), kw(kw_), c_in(ci), c_out(co),
          data(static_cast<std::size_t>(kh_) * kw_ * ci * co, fill) {}

    double& at(int i, int j, int ci, int co) {
        return data[((static_cast<std::size_t>(i) * kw + j) * c_in + ci) * c_out + co];
    }
    double at(int i, int j, int ci, int co) const {
        return data[((static_cast<std::size_t>(i) * kw + j) * c_in + ci) * c_out + co];
    }
};

// --- scalar activations ------------------------------------------------

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double silu(double x) { return x * sigmoid(x); }

// log(1 + e^x), computed from the stable branch.
inline double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

inline FeatureMap silu(FeatureMap x) {
    for (double& v : x.data) v = silu(v);
    return x;
}

inline TokenSequence silu(TokenSequence x) {
    for (double& v : x.data) v = silu(v);
    return x;
}

// --- convolution and pooling -------------------------------------------

// Cross-correlation (no kernel flip), zero padding. Output spatial size is
// floor((H + 2*pad - kh)/stride) + 1. Accumulation order per output cell is
// (ky, kx, c_in), ascending; bit-exact comparisons rely on it.
inline FeatureMap conv2d(const FeatureMap& input, const ConvKernel& kernel,
                         int stride, int padding) {
    if (kernel.c_in != input.channels) {
        throw DimensionError("conv2d: kernel c_in " + std::to_string(kernel.c_in) +
                             " != input channels " + std::to_string(input.channels));
    }
    if (kernel.kh % 2 == 0 || kernel.kw % 2 == 0) {
        throw ParameterError("conv2d: kernel dims must be odd");
    }
    if (stride < 1 || padding < 0) {
        throw ParameterError("conv2d: stride must be >= 1 and padding >= 0");
    }
    const int out_h = (input.height + 2 * padding - kernel.kh) / stride + 1;
    const int out_w = (input.width + 2 * padding - kernel.kw) / stride + 1;
    if (input.height + 2 * padding - kernel.kh < 0 ||
        input.width + 2 * padding - kernel.kw < 0 || out_h <= 0 || out_w <= 0) {
        throw GeometryError("conv2d: non-positive output size");
    }

    FeatureMap out(out_h, out_w, kernel.c_out);
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            for (int co = 0; co < kernel.c_out; ++co) {
                double acc = 0.0;
                for (int ky = 0; ky < kernel.kh; ++ky) {
                    const int y = oy * stride + ky - padding;
                    if (y < 0 || y >= input.height) continue;
                    for (int kx = 0; kx < kernel.kw; ++kx) {
                        const int x = ox * stride + kx - padding;
                        if (x < 0 || x >= input.width) continue;
                        for (int ci = 0; ci < input.channels; ++ci) {
                            acc += input.at(y, x, ci) * kernel.at(ky, kx, ci, co);
                        }
                    }
                }
                out.at(oy, ox, co) = acc;
            }
        }
    }
    return out;
}

enum class PoolMode { avg, max };

// Floor-based window partition: output cell (i, j) aggregates the input
// window [floor(i*H/th), floor((i+1)*H/th)) x [floor(j*W/tw), floor((j+1)*W/tw)).
inline FeatureMap adaptive_pool(const FeatureMap& input, int target_h, int target_w,
                                PoolMode mode) {
    if (target_h < 1 || target_w < 1) {
        throw GeometryError("adaptive_pool: target dims must be positive");
    }
    if (target_h > input.height || target_w > input.width) {
        throw GeometryError("adaptive_pool: target " + std::to_string(target_h) + "x" +
                            std::to_string(target_w) + " exceeds input " +
                            std::to_string(input.height) + "x" + std::to_string(input.width));
    }
    FeatureMap out(target_h, target_w, input.channels);
    for (int i = 0; i < target_h; ++i) {
        const int y0 = static_cast<int>(static_cast<long long>(i) * input.height / target_h);
        const int y1 = static_cast<int>(static_cast<long long>(i + 1) * input.height / target_h);
        for (int j = 0; j < target_w; ++j) {
            const int x0 = static_cast<int>(static_cast<long long>(j) * input.width / target_w);
            const int x1 = static_cast<int>(static_cast<long long>(j + 1) * input.width / target_w);
            for (int c = 0; c < input.channels; ++c) {
                if (mode == PoolMode::avg) {
                    double sum = 0.0;
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x) sum += input.at(y, x, c);
                    out.at(i, j, c) = sum / (static_cast<double>(y1 - y0) * (x1 - x0));
                } else {
                    double m = input.at(y0, x0, c);
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x) m = std::max(m, input.at(y, x, c));
                    out.at(i, j, c) = m;
                }
            }
        }
    }
    return out;
}

// --- dropout -------------------------------------------------------------

// Training mode zeroes entries with probability p and scales survivors by
// 1/(1-p); eval mode is the identity and consumes no randomness.
inline TokenSequence dropout(const TokenSequence& x, double p, SeededRng& rng,
                             bool training) {
    if (p < 0.0 || p >= 1.0) {
        throw ParameterError("dropout: p must lie in [0, 1), got " + std::to_string(p));
    }
    if (!training || p == 0.0) return x;
    TokenSequence out = x;
    const double scale = 1.0 / (1.0 - p);
    for (double& v : out.data) {
        v = (rng.next_double() < p) ? 0.0 : v * scale;
    }
    return out;
}

// --- layout moves --------------------------------------------------------

// (h, w, c) row-major grid viewed as (h*w, c) tokens; same memory order.
inline TokenSequence flatten_tokens(const FeatureMap& grid) {
    TokenSequence seq(grid.height * grid.width, grid.channels);
    seq.data = grid.data;
    return seq;
}

inline FeatureMap to_grid(const TokenSequence& seq, int h, int w) {
    if (seq.length != h * w) {
        throw GeometryError("to_grid: sequence length " + std::to_string(seq.length) +
                            " != " + std::to_string(h) + "*" + std::to_string(w));
    }
    FeatureMap grid(h, w, seq.channels);
    grid.data = seq.data;
    return grid;
}

inline FeatureMap concat_channels(const std::vector<const FeatureMap*>& maps) {
    if (maps.empty()) throw DimensionError("concat_channels: empty input");
    const int h = maps[0]->height, w = maps[0]->width;
    int c_total = 0;
    for (const FeatureMap* m : maps) {
        if (m->height != h || m->width != w) {
            throw GeometryError("concat_channels: spatial shape mismatch");
        }
        c_total += m->channels;
    }
    FeatureMap out(h, w, c_total);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            int c0 = 0;
            for (const FeatureMap* m : maps) {
                for (int c = 0; c < m->channels; ++c) out.at(i, j, c0 + c) = m->at(i, j, c);
                c0 += m->channels;
            }
        }
    }
    return out;
}

// Nearest-neighbor resize; source index floor(dst*in/out). The x2 case
// reduces to index halving, which keeps FPN ladder steps exact.
inline FeatureMap resize_nearest(const FeatureMap& input, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw GeometryError("resize_nearest: non-positive target");
    FeatureMap out(out_h, out_w, input.channels);
    for (int i = 0; i < out_h; ++i) {
        const int si = static_cast<int>(static_cast<long long>(i) * input.height / out_h);
        for (int j = 0; j < out_w; ++j) {
            const int sj = static_cast<int>(static_cast<long long>(j) * input.width / out_w);
            for (int c = 0; c < input.channels; ++c) out.at(i, j, c) = input.at(si, sj, c);
        }
    }
    return out;
}

inline FeatureMap upsample_nearest2x(const FeatureMap& input) {
    return resize_nearest(input, input.height * 2, input.width * 2);
}

// --- elementwise and linear algebra helpers -------------------------------

inline FeatureMap add(const FeatureMap& a, const FeatureMap& b) {
    if (!a.same_shape(b)) throw DimensionError("add: shape mismatch");
    FeatureMap out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

inline TokenSequence add(const TokenSequence& a, const TokenSequence& b) {
    if (!a.same_shape(b)) throw DimensionError("add: shape mismatch");
    TokenSequence out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

inline std::vector<double> matvec(const Mat& m, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != m.cols) {
        throw DimensionError("matvec: vector length " + std::to_string(x.size()) +
                             " != cols " + std::to_string(m.cols));
    }
    std::vector<double> y(m.rows, 0.0);
    for (int r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < m.cols; ++c) acc += m.at(r, c) * x[c];
        y[r] = acc;
    }
    return y;
}

// Per-token affine map: out[t] = w * x[t] + b.
inline TokenSequence linear_map(const TokenSequence& x, const Mat& w,
                                const std::vector<double>& b) {
    if (w.cols != x.channels) {
        throw DimensionError("linear_map: weight cols " + std::to_string(w.cols) +
                             " != channels " + std::to_string(x.channels));
    }
    if (!b.empty() && static_cast<int>(b.size()) != w.rows) {
        throw DimensionError("linear_map: bias length != rows");
    }
    TokenSequence out(x.length, w.rows);
    for (int t = 0; t < x.length; ++t) {
        for (int r = 0; r < w.rows; ++r) {
            double acc = b.empty() ? 0.0 : b[r];
            for (int c = 0; c < x.channels; ++c) acc += w.at(r, c) * x.at(t, c);
            out.at(t, r) = acc;
        }
    }
    return out;
}

template <typename Container>
inline bool all_finite(const Container& c) {
    for (double v : c.data)
        if (!std::isfinite(v)) return false;
    return true;
}

template <typename Container>
inline double l2_norm(const Container& c) {
    double s = 0.0;
    for (double v : c.data) s += v * v;
    return std::sqrt(s);
}

// --- seeded fills ---------------------------------------------------------

inline FeatureMap random_feature_map(int h, int w, int c, SeededRng& rng,
                                     double lo = -1.0, double hi = 1.0) {
    FeatureMap m(h, w, c);
    for (double& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

inline TokenSequence random_tokens(int len, int c, SeededRng& rng,
                                   double lo = -1.0, double hi = 1.0) {
    TokenSequence s(len, c);
    for (double& v : s.data) v = rng.uniform(lo, hi);
    return s;
}

inline Mat random_mat(int r, int c, SeededRng& rng, double lo, double hi) {
    Mat m(r, c);
    for (double& v : m.a) v = rng.uniform(lo, hi);
    return m;
}

inline ConvKernel random_kernel(int kh, int kw, int ci, int co, SeededRng& rng,
                                double scale) {
    ConvKernel k(kh, kw, ci, co);
    for (double& v : k.data) v = rng.uniform(-scale, scale);
    return k;
}

}  // namespace xmamba
