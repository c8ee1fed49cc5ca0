#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "xmamba/errors.hpp"

namespace xmamba::offsets {

// Misalignment model and audit tooling: block-intersection retention per
// pyramid level, greedy cross-modal box matching, and displacement
// statistics.

enum class IntersectionMode { literal, clamped };
enum class MagnitudeMetric { chebyshev, euclidean };

// literal mode evaluates |w - dx| * |h - dy| as written, which re-grows once
// the offset exceeds the block; clamped mode floors the overlap at zero and
// is the default for analysis.
inline double intersection_area(double w_blk, double h_blk, double dx, double dy,
                                IntersectionMode mode = IntersectionMode::clamped) {
    if (!(w_blk > 0.0) || !(h_blk > 0.0)) {
        throw ParameterError("intersection_area: block dims must be positive");
    }
    if (mode == IntersectionMode::literal) {
        return std::abs(w_blk - dx) * std::abs(h_blk - dy);
    }
    return std::max(w_blk - std::abs(dx), 0.0) * std::max(h_blk - std::abs(dy), 0.0);
}

// Clamped overlap fraction for square blocks of the given sizes; monotone
// non-decreasing in block size for fixed offsets.
inline std::vector<double> retention_by_level(double dx, double dy,
                                              const std::vector<double>& block_sizes) {
    std::vector<double> out;
    out.reserve(block_sizes.size());
    for (double s : block_sizes) {
        out.push_back(intersection_area(s, s, dx, dy, IntersectionMode::clamped) / (s * s));
    }
    return out;
}

struct Box {
    double x = 0.0, y = 0.0;  // top-left corner, pixels
    double w = 0.0, h = 0.0;

    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
};

struct OffsetRecord {
    int index_a = -1;  // positions in the input lists
    int index_b = -1;
    Box box_a, box_b;
    double dx = 0.0;  // center displacement, B - A
    double dy = 0.0;
};

struct MatchResult {
    std::vector<OffsetRecord> records;
    std::vector<int> unmatched_a;
    std::vector<int> unmatched_b;
};

// One-to-one greedy matching: repeatedly take the globally closest
// (Euclidean center distance) unused pair under the gate.
inline MatchResult match_annotations(const std::vector<Box>& boxes_a,
                                     const std::vector<Box>& boxes_b,
                                     double max_center_distance = 20.0) {
    auto check = [](const std::vector<Box>& boxes, const char* side) {
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            if (!(boxes[i].w > 0.0) || !(boxes[i].h > 0.0)) {
                throw ValidationError(std::string("match_annotations: box ") +
                                      std::to_string(i) + " in list " + side +
                                      " has non-positive size");
            }
        }
    };
    check(boxes_a, "A");
    check(boxes_b, "B");

    struct Cand {
        double dist;
        int ia, ib;
    };
    std::vector<Cand> cands;
    for (int ia = 0; ia < static_cast<int>(boxes_a.size()); ++ia) {
        for (int ib = 0; ib < static_cast<int>(boxes_b.size()); ++ib) {
            const double ddx = boxes_b[ib].cx() - boxes_a[ia].cx();
            const double ddy = boxes_b[ib].cy() - boxes_a[ia].cy();
            const double dist = std::hypot(ddx, ddy);
            if (dist <= max_center_distance) cands.push_back({dist, ia, ib});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& l, const Cand& r) {
        if (l.dist != r.dist) return l.dist < r.dist;
        if (l.ia != r.ia) return l.ia < r.ia;
        return l.ib < r.ib;
    });

    MatchResult res;
    std::vector<bool> used_a(boxes_a.size(), false), used_b(boxes_b.size(), false);
    for (const Cand& c : cands) {
        if (used_a[c.ia] || used_b[c.ib]) continue;
        used_a[c.ia] = true;
        used_b[c.ib] = true;
        OffsetRecord r;
        r.index_a = c.ia;
        r.index_b = c.ib;
        r.box_a = boxes_a[c.ia];
        r.box_b = boxes_b[c.ib];
        r.dx = boxes_b[c.ib].cx() - boxes_a[c.ia].cx();
        r.dy = boxes_b[c.ib].cy() - boxes_a[c.ia].cy();
        res.records.push_back(r);
    }
    for (int i = 0; i < static_cast<int>(boxes_a.size()); ++i) {
        if (!used_a[i]) res.unmatched_a.push_back(i);
    }
    for (int i = 0; i < static_cast<int>(boxes_b.size()); ++i) {
        if (!used_b[i]) res.unmatched_b.push_back(i);
    }
    return res;
}

inline std::vector<double> default_histogram_edges() {
    return {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, std::numeric_limits<double>::infinity()};
}

struct OffsetHistogram {
    std::vector<double> edges;        // bin i covers [edges[i], edges[i+1])
    std::vector<long long> counts;
    long long total = 0;
    long long misaligned = 0;         // magnitude >= 1 px
    double misaligned_fraction = 0.0;
    double within_1_to_5_fraction = 0.0;  // of misaligned, magnitude in [1, 5]
};

inline double displacement_magnitude(const OffsetRecord& r, MagnitudeMetric metric) {
    if (metric == MagnitudeMetric::euclidean) return std::hypot(r.dx, r.dy);
    return std::max(std::abs(r.dx), std::abs(r.dy));
}

inline OffsetHistogram offset_stats(const std::vector<OffsetRecord>& records,
                                    MagnitudeMetric metric = MagnitudeMetric::chebyshev,
                                    std::vector<double> edges = default_histogram_edges()) {
    if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end())) {
        throw ParameterError("offset_stats: histogram edges must be sorted, >= 2 entries");
    }
    OffsetHistogram h;
    h.edges = edges;
    h.counts.assign(edges.size() - 1, 0);
    long long in_1_to_5 = 0;
    for (const OffsetRecord& r : records) {
        const double m = displacement_magnitude(r, metric);
        if (!std::isfinite(m)) throw ValidationError("offset_stats: non-finite displacement");
        for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
            if (m >= edges[i] && m < edges[i + 1]) {
                ++h.counts[i];
                break;
            }
        }
        ++h.total;
        if (m >= 1.0) {
            ++h.misaligned;
            if (m <= 5.0) ++in_1_to_5;
        }
    }
    h.misaligned_fraction =
        h.total > 0 ? static_cast<double>(h.misaligned) / static_cast<double>(h.total) : 0.0;
    h.within_1_to_5_fraction =
        h.misaligned > 0 ? static_cast<double>(in_1_to_5) / static_cast<double>(h.misaligned)
                         : 0.0;
    return h;
}

}  // namespace xmamba::offsets
