#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "xmamba/scan.hpp"
#include "xmamba/serialize.hpp"

using namespace xmamba;
using scan::Direction;

namespace {

FeatureMap numbered_grid(int h, int w, int c = 1) {
    FeatureMap g(h, w, c);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = static_cast<double>(i);
    return g;
}

std::vector<double> scan_values(const FeatureMap& g, Direction d, int wh = 0, int ww = 0) {
    const scan::ScanPlan plan = scan::build_scan_plan(g.height, g.width, d, wh, ww);
    return scan::apply_scan(g, plan).data;
}

}  // namespace

TEST(ScanPlan, TwoByTwoEnumeration) {
    // grid [a b; c d] with a=0, b=1, c=2, d=3
    const FeatureMap g = numbered_grid(2, 2);
    EXPECT_EQ(scan_values(g, Direction::row_fwd), (std::vector<double>{0, 1, 2, 3}));
    EXPECT_EQ(scan_values(g, Direction::col_fwd), (std::vector<double>{0, 2, 1, 3}));
    EXPECT_EQ(scan_values(g, Direction::row_bwd), (std::vector<double>{3, 2, 1, 0}));
    EXPECT_EQ(scan_values(g, Direction::col_bwd), (std::vector<double>{3, 1, 2, 0}));
}

TEST(ScanPlan, LocalWindowEnumeration) {
    // 4x4 grid, 2x2 windows: window-by-window row-major, row-major inside
    const FeatureMap g = numbered_grid(4, 4);
    EXPECT_EQ(scan_values(g, Direction::local_fwd, 2, 2),
              (std::vector<double>{0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15}));
}

TEST(ScanPlan, InversePermutationIdentity) {
    for (Direction d : scan::global_and_local_directions()) {
        const scan::ScanPlan p = scan::build_scan_plan(6, 9, d, scan::is_local(d) ? 2 : 0,
                                                       scan::is_local(d) ? 3 : 0);
        for (int i = 0; i < static_cast<int>(p.order.size()); ++i) {
            ASSERT_EQ(p.inverse[p.order[i]], i);
        }
    }
}

TEST(ScanPlan, BijectivityOverRandomSizes) {
    SeededRng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const int h = 1 + static_cast<int>(rng.next_u64() % 12);
        const int w = 1 + static_cast<int>(rng.next_u64() % 12);
        for (Direction d : scan::global_directions()) {
            const scan::ScanPlan p = scan::build_scan_plan(h, w, d);
            std::vector<int> sorted = p.order;
            std::sort(sorted.begin(), sorted.end());
            for (int i = 0; i < h * w; ++i) ASSERT_EQ(sorted[i], i);
        }
    }
}

TEST(ScanPlan, WindowConstraints) {
    // at most one third of the grid per axis
    EXPECT_THROW(scan::build_scan_plan(8, 8, Direction::local_fwd, 4, 2), GeometryError);
    EXPECT_THROW(scan::build_scan_plan(8, 8, Direction::local_fwd, 2, 4), GeometryError);
    // must divide the grid dims
    EXPECT_THROW(scan::build_scan_plan(8, 9, Direction::local_fwd, 2, 2), GeometryError);
    // ceil(9/3) = 3 allows a 3-wide window on a 9 grid
    EXPECT_NO_THROW(scan::build_scan_plan(9, 9, Direction::local_fwd, 3, 3));
    EXPECT_NO_THROW(scan::build_scan_plan(8, 8, Direction::local_fwd, 2, 2));
    // 1x1 windows are always legal
    EXPECT_NO_THROW(scan::build_scan_plan(5, 7, Direction::local_bwd, 1, 1));
}

TEST(ApplyScan, RowForwardIsRowMajorFlatten) {
    SeededRng rng(32);
    const FeatureMap g = random_feature_map(5, 7, 3, rng);
    const scan::ScanPlan p = scan::build_scan_plan(5, 7, Direction::row_fwd);
    EXPECT_EQ(scan::apply_scan(g, p).data, flatten_tokens(g).data);
}

TEST(ApplyScan, ConstantGridInvariantUnderDirection) {
    const FeatureMap g(4, 4, 2, 3.25);
    for (Direction d : scan::global_and_local_directions()) {
        const scan::ScanPlan p = scan::build_scan_plan(4, 4, d, scan::is_local(d) ? 2 : 0,
                                                       scan::is_local(d) ? 2 : 0);
        for (double v : scan::apply_scan(g, p).data) ASSERT_EQ(v, 3.25);
    }
}

TEST(ApplyScan, ColBackwardReversedColumnMajor) {
    const FeatureMap g = numbered_grid(3, 3);
    // column-major of 0..8 is (0,3,6,1,4,7,2,5,8); reversed below
    EXPECT_EQ(scan_values(g, Direction::col_bwd),
              (std::vector<double>{8, 5, 2, 7, 4, 1, 6, 3, 0}));
}

TEST(ApplyScan, MismatchedPlanRejected) {
    const FeatureMap g(3, 3, 1);
    const scan::ScanPlan p = scan::build_scan_plan(4, 4, Direction::row_fwd);
    EXPECT_THROW(scan::apply_scan(g, p), GeometryError);
}

TEST(ReverseScan, RoundTripAllDirectionsUpTo32) {
    SeededRng rng(33);
    for (const int size : {1, 2, 3, 5, 8, 12, 32}) {
        const FeatureMap g = random_feature_map(size, size, 3, rng);
        for (Direction d : scan::global_and_local_directions()) {
            int wh = 0, ww = 0;
            if (scan::is_local(d)) {
                wh = ww = 1;  // divides everything and honors the one-third rule
            }
            const scan::ScanPlan p = scan::build_scan_plan(size, size, d, wh, ww);
            const FeatureMap back = scan::reverse_scan(scan::apply_scan(g, p), p);
            ASSERT_EQ(back.data, g.data) << scan::direction_name(d) << " size " << size;
        }
    }
}

TEST(ReverseScan, HandPermutedColForward) {
    const FeatureMap g = numbered_grid(2, 2);
    const scan::ScanPlan p = scan::build_scan_plan(2, 2, Direction::col_fwd);
    TokenSequence seq(4, 1);
    seq.data = {0, 2, 1, 3};  // column-major order of the numbered grid
    EXPECT_EQ(scan::reverse_scan(seq, p).data, g.data);
}

TEST(ReverseScan, ConstantSequenceGivesConstantGrid) {
    const scan::ScanPlan p = scan::build_scan_plan(4, 4, Direction::col_fwd);
    const TokenSequence seq(16, 2, 1.5);
    for (double v : scan::reverse_scan(seq, p).data) ASSERT_EQ(v, 1.5);
}

TEST(ReverseScan, LengthMismatchRejected) {
    const scan::ScanPlan p = scan::build_scan_plan(4, 4, Direction::row_fwd);
    EXPECT_THROW(scan::reverse_scan(TokenSequence(15, 1), p), GeometryError);
}

TEST(MergeDirections, FourCopiesQuadruple) {
    SeededRng rng(34);
    const FeatureMap g = random_feature_map(4, 4, 2, rng);
    const FeatureMap sum = scan::merge_directions({g, g, g, g});
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        ASSERT_DOUBLE_EQ(sum.data[i], 4.0 * g.data[i]);
    }
}

TEST(MergeDirections, CancellationToZero) {
    SeededRng rng(35);
    const FeatureMap g = random_feature_map(3, 3, 1, rng);
    FeatureMap neg = g;
    for (double& v : neg.data) v = -v;
    const FeatureMap zero(3, 3, 1);
    const FeatureMap sum = scan::merge_directions({g, neg, zero, zero});
    for (double v : sum.data) ASSERT_EQ(v, 0.0);
}

TEST(MergeDirections, SixGridsMatchElementwiseOracle) {
    SeededRng rng(36);
    std::vector<FeatureMap> grids;
    for (int i = 0; i < 6; ++i) grids.push_back(random_feature_map(4, 5, 3, rng));
    const FeatureMap sum = scan::merge_directions(grids);
    for (std::size_t i = 0; i < sum.data.size(); ++i) {
        double want = 0.0;
        for (const FeatureMap& g : grids) want += g.data[i];
        ASSERT_EQ(sum.data[i], want);
    }
}

TEST(MergeDirections, RejectsWrongCount) {
    const FeatureMap g(2, 2, 1);
    EXPECT_THROW(scan::merge_directions({g, g, g}), DimensionError);
    EXPECT_THROW(scan::merge_directions({g, g, g, g, FeatureMap(3, 2, 1), g}),
                 DimensionError);
}

TEST(Locality, WindowBoundHoldsAndGlobalBreaksIt) {
    const scan::ScanPlan local = scan::build_scan_plan(12, 12, Direction::local_fwd, 3, 3);
    const int per_window = 9;
    for (int t = 0; t + 1 < static_cast<int>(local.order.size()); ++t) {
        if ((t + 1) % per_window == 0) continue;
        const int g0 = local.order[t], g1 = local.order[t + 1];
        const int cheb = std::max(std::abs(g0 / 12 - g1 / 12), std::abs(g0 % 12 - g1 % 12));
        ASSERT_LE(cheb, 2);  // window size 3 => bound w-1 = 2
    }
    // row-major crosses a row boundary with Chebyshev distance W-1
    const scan::ScanPlan global = scan::build_scan_plan(12, 12, Direction::row_fwd);
    bool violated = false;
    for (int t = 0; t + 1 < static_cast<int>(global.order.size()); ++t) {
        const int g0 = global.order[t], g1 = global.order[t + 1];
        const int cheb = std::max(std::abs(g0 / 12 - g1 / 12), std::abs(g0 % 12 - g1 % 12));
        violated = violated || cheb > 2;
    }
    EXPECT_TRUE(violated);
}

TEST(PlanJson, ExportsIndexArrays) {
    const scan::ScanPlan p = scan::build_scan_plan(2, 3, Direction::col_fwd);
    const nlohmann::json j = serialize::to_json(p);
    EXPECT_EQ(j.at("direction"), "col_fwd");
    EXPECT_EQ(j.at("grid_h"), 2);
    EXPECT_EQ(j.at("order").get<std::vector<int>>(), (std::vector<int>{0, 3, 1, 4, 2, 5}));
    EXPECT_EQ(j.at("inverse").get<std::vector<int>>(), (std::vector<int>{0, 2, 4, 1, 3, 5}));
    EXPECT_FALSE(j.contains("window"));

    const scan::ScanPlan lp = scan::build_scan_plan(6, 6, Direction::local_fwd, 2, 2);
    const nlohmann::json lj = serialize::to_json(lp);
    EXPECT_EQ(lj.at("window").get<std::vector<int>>(), (std::vector<int>{2, 2}));
}
