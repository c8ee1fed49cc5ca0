#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "xmamba/errors.hpp"
#include "xmamba/tensor.hpp"

namespace xmamba::scan {

// 2D-to-1D serialization. A plan is an explicit permutation of the H*W grid
// indices for one direction, carried together with its exact inverse so the
// reverse scan is a lookup, never a recomputation.

enum class Direction { row_fwd, row_bwd, col_fwd, col_bwd, local_fwd, local_bwd };

inline bool is_local(Direction d) {
    return d == Direction::local_fwd || d == Direction::local_bwd;
}

inline const char* direction_name(Direction d) {
    switch (d) {
        case Direction::row_fwd: return "row_fwd";
        case Direction::row_bwd: return "row_bwd";
        case Direction::col_fwd: return "col_fwd";
        case Direction::col_bwd: return "col_bwd";
        case Direction::local_fwd: return "local_fwd";
        case Direction::local_bwd: return "local_bwd";
    }
    return "?";
}

struct ScanPlan {
    int grid_h = 0;
    int grid_w = 0;
    Direction direction = Direction::row_fwd;
    int window_h = 0;  // local directions only
    int window_w = 0;
    std::vector<int> order;    // order[t] = flat grid index visited at step t
    std::vector<int> inverse;  // inverse[order[t]] == t
};

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Local windows must divide the grid and stay at most one third of it per
// axis. Non-divisible geometries are rejected; padding semantics would be
// an invention and would corrupt the locality property.
inline void validate_window(int grid_h, int grid_w, int window_h, int window_w) {
    if (window_h < 1 || window_w < 1) {
        throw GeometryError("scan: window dims must be positive");
    }
    if (window_h > ceil_div(grid_h, 3) || window_w > ceil_div(grid_w, 3)) {
        throw GeometryError("scan: window " + std::to_string(window_h) + "x" +
                            std::to_string(window_w) + " exceeds one third of grid " +
                            std::to_string(grid_h) + "x" + std::to_string(grid_w));
    }
    if (grid_h % window_h != 0 || grid_w % window_w != 0) {
        throw GeometryError("scan: window must divide grid dims");
    }
}

inline ScanPlan build_scan_plan(int grid_h, int grid_w, Direction direction,
                                int window_h = 0, int window_w = 0) {
    if (grid_h < 1 || grid_w < 1) throw GeometryError("scan: grid dims must be positive");
    const int n = grid_h * grid_w;

    ScanPlan plan;
    plan.grid_h = grid_h;
    plan.grid_w = grid_w;
    plan.direction = direction;
    plan.order.reserve(n);

    switch (direction) {
        case Direction::row_fwd:
        case Direction::row_bwd:
            for (int i = 0; i < n; ++i) plan.order.push_back(i);
            break;
        case Direction::col_fwd:
        case Direction::col_bwd:
            for (int j = 0; j < grid_w; ++j)
                for (int i = 0; i < grid_h; ++i) plan.order.push_back(i * grid_w + j);
            break;
        case Direction::local_fwd:
        case Direction::local_bwd: {
            validate_window(grid_h, grid_w, window_h, window_w);
            plan.window_h = window_h;
            plan.window_w = window_w;
            // windows visited row-major; tokens row-major within each window
            for (int wr = 0; wr < grid_h / window_h; ++wr)
                for (int wc = 0; wc < grid_w / window_w; ++wc)
                    for (int i = 0; i < window_h; ++i)
                        for (int j = 0; j < window_w; ++j)
                            plan.order.push_back((wr * window_h + i) * grid_w +
                                                 (wc * window_w + j));
            break;
        }
    }

    const bool backward = direction == Direction::row_bwd ||
                          direction == Direction::col_bwd ||
                          direction == Direction::local_bwd;
    if (backward) std::reverse(plan.order.begin(), plan.order.end());

    plan.inverse.assign(n, -1);
    for (int t = 0; t < n; ++t) plan.inverse[plan.order[t]] = t;
    return plan;
}

inline void check_plan_matches(const ScanPlan& plan, int h, int w) {
    if (plan.grid_h != h || plan.grid_w != w) {
        throw GeometryError("scan: plan built for " + std::to_string(plan.grid_h) + "x" +
                            std::to_string(plan.grid_w) + ", grid is " + std::to_string(h) +
                            "x" + std::to_string(w));
    }
}

// sequence[t] = grid token at plan.order[t]
inline TokenSequence apply_scan(const FeatureMap& grid, const ScanPlan& plan) {
    check_plan_matches(plan, grid.height, grid.width);
    TokenSequence seq(grid.height * grid.width, grid.channels);
    for (int t = 0; t < seq.length; ++t) {
        const int g = plan.order[t];
        for (int c = 0; c < grid.channels; ++c) {
            seq.at(t, c) = grid.data[static_cast<std::size_t>(g) * grid.channels + c];
        }
    }
    return seq;
}

// Exact inverse of apply_scan under the same plan.
inline FeatureMap reverse_scan(const TokenSequence& seq, const ScanPlan& plan) {
    if (seq.length != plan.grid_h * plan.grid_w) {
        throw GeometryError("scan: sequence length " + std::to_string(seq.length) +
                            " != grid size " + std::to_string(plan.grid_h * plan.grid_w));
    }
    FeatureMap grid(plan.grid_h, plan.grid_w, seq.channels);
    for (int t = 0; t < seq.length; ++t) {
        const int g = plan.order[t];
        for (int c = 0; c < seq.channels; ++c) {
            grid.data[static_cast<std::size_t>(g) * seq.channels + c] = seq.at(t, c);
        }
    }
    return grid;
}

// Elementwise sum in list order; 4 grids on the single path, 6 on the cross
// path. Fixed summation order keeps results bit-deterministic.
inline FeatureMap merge_directions(const std::vector<FeatureMap>& grids) {
    if (grids.size() != 4 && grids.size() != 6) {
        throw DimensionError("merge_directions: expected 4 or 6 grids, got " +
                             std::to_string(grids.size()));
    }
    FeatureMap out = grids[0];
    for (std::size_t i = 1; i < grids.size(); ++i) {
        if (!grids[i].same_shape(out)) {
            throw DimensionError("merge_directions: shape mismatch at index " +
                                 std::to_string(i));
        }
        for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += grids[i].data[k];
    }
    return out;
}

inline std::array<Direction, 4> global_directions() {
    return {Direction::row_fwd, Direction::row_bwd, Direction::col_fwd, Direction::col_bwd};
}

inline std::array<Direction, 6> global_and_local_directions() {
    return {Direction::row_fwd, Direction::row_bwd, Direction::col_fwd,
            Direction::col_bwd, Direction::local_fwd, Direction::local_bwd};
}

}  // namespace xmamba::scan
