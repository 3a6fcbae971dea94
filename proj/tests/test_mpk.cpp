// Wavefront executor and matrix power kernels: schedule enumeration, the
// dependency audit, bitwise agreement between baseline and blocked sweeps,
// shifted (Newton) sweeps against a dense oracle, and depth tuning.

#include <gtest/gtest.h>

#include <complex>
#include <mutex>

#include "mpk/execute.hpp"
#include "mpk/generators.hpp"
#include "mpk/levels.hpp"
#include "mpk/mpk.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using mpk::CsrMatrix;
using mpk::ExecutionPlan;
using mpk::index_t;
using mpk::VectorBlock;
using cplx = std::complex<double>;

namespace {

/// Synthetic plan: one row per group, for schedule/audit tests.
ExecutionPlan synthetic_plan(index_t n_groups, int p_m, int sub_powers = 1) {
    ExecutionPlan plan;
    plan.p_m = p_m;
    plan.sub_powers = sub_powers;
    plan.n_rows = n_groups;
    plan.group_rows.resize(n_groups + 1);
    plan.group_level_ptr.resize(n_groups + 1);
    for (index_t g = 0; g <= n_groups; ++g) plan.group_rows[g] = g;
    plan.group_level_ptr = plan.group_rows;
    plan.group_footprint.assign(n_groups, 0);
    return plan;
}

struct PGP {  // (group, effective stage) observation
    index_t g;
    int q;
    bool operator==(const PGP&) const = default;
};

}  // namespace

TEST(Wavefront, MatchesPinnedEnumeration) {
    // Three groups, two powers: the diagonal order interleaves groups and
    // powers so that each cell's three predecessors are already done.
    const auto order = mpk::wavefront_schedule(3, 2);
    const std::vector<mpk::ScheduleCell> expect = {
        {0, 1}, {1, 1}, {0, 2}, {2, 1}, {1, 2}, {2, 2}};
    ASSERT_EQ(order.size(), expect.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        EXPECT_EQ(order[i].group, expect[i].group) << i;
        EXPECT_EQ(order[i].stage, expect[i].stage) << i;
    }
}

TEST(Wavefront, CoversEveryCellExactlyOnce) {
    for (index_t ng : {1u, 2u, 5u, 9u}) {
        for (int q_m : {1, 3, 8}) {
            const auto order = mpk::wavefront_schedule(ng, q_m);
            ASSERT_EQ(order.size(), static_cast<std::size_t>(ng) * q_m);
            std::vector<int> seen(ng * q_m, 0);
            for (const auto& c : order) seen[c.group * q_m + (c.stage - 1)]++;
            for (int s : seen) EXPECT_EQ(s, 1);
        }
    }
}

TEST(Wavefront, DependencyAuditAcrossShapes) {
    // For every executed cell (g, q), the cells (g-1, q-1), (g, q-1) and
    // (g+1, q-1) must have been executed earlier.
    for (index_t ng = 1; ng <= 10; ++ng) {
        for (int p_m = 1; p_m <= 8; ++p_m) {
            const ExecutionPlan plan = synthetic_plan(ng, p_m);
            std::vector<PGP> trace;
            mpk::execute(
                plan,
                [&](index_t row_s, index_t, int p, int j) {
                    trace.push_back({row_s, (p - 1) * plan.sub_powers + j + 1});
                },
                /*threads=*/1);
            ASSERT_EQ(trace.size(), static_cast<std::size_t>(ng) * p_m);
            std::vector<int> done(ng * (p_m + 1), 0);
            auto idx = [&](index_t g, int q) { return g * (p_m + 1) + q; };
            for (const auto& cell : trace) {
                if (cell.q > 1) {
                    if (cell.g > 0) {
                        EXPECT_TRUE(done[idx(cell.g - 1, cell.q - 1)]);
                    }
                    EXPECT_TRUE(done[idx(cell.g, cell.q - 1)]);
                    if (cell.g + 1 < ng) {
                        EXPECT_TRUE(done[idx(cell.g + 1, cell.q - 1)]);
                    }
                }
                done[idx(cell.g, cell.q)] = 1;
            }
        }
    }
}

TEST(Wavefront, SubPowersRunAscendingWithinEachPower) {
    const ExecutionPlan plan = synthetic_plan(3, 2, /*sub_powers=*/3);
    std::vector<std::array<int, 3>> trace;  // (g, p, j)
    mpk::execute(
        plan,
        [&](index_t row_s, index_t, int p, int j) {
            trace.push_back({static_cast<int>(row_s), p, j});
        },
        1);
    ASSERT_EQ(trace.size(), 3u * 2 * 3);
    // Per group, the (p, j) sequence must be lexicographically increasing.
    std::vector<std::vector<std::pair<int, int>>> per_group(3);
    for (const auto& t : trace) per_group[t[0]].push_back({t[1], t[2]});
    for (const auto& seq : per_group) {
        ASSERT_EQ(seq.size(), 6u);
        EXPECT_TRUE(std::is_sorted(seq.begin(), seq.end()));
        EXPECT_EQ(seq.front(), std::make_pair(1, 0));
        EXPECT_EQ(seq.back(), std::make_pair(2, 2));
    }
}

TEST(Mpk, BaselineMatchesDenseOracle) {
    const CsrMatrix A = mpk::poisson2d(12, 9);
    std::vector<double> x(A.n_rows);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.37 * i) + 0.5;
    const int p_m = 5;
    VectorBlock block(A.n_rows, p_m + 1);
    mpk::baseline_mpk(A, x, p_m, block);
    const auto ref =
        oracle::dense_power_apply(oracle::dense_from_csr(A), oracle::to_eigen(x), p_m);
    for (int p = 1; p <= p_m; ++p) {
        const double scale = ref[p - 1].cwiseAbs().maxCoeff();
        for (index_t r = 0; r < A.n_rows; ++r)
            EXPECT_NEAR(block.slice(p)[r], ref[p - 1](r), 1e-13 * scale);
    }
}

TEST(Mpk, BlockedBitwiseEqualsBaseline) {
    for (const CsrMatrix& A :
         {mpk::poisson2d(48, 37), mpk::poisson3d(9, 10, 11), mpk::random_csr(2000, 5, 3)}) {
        const auto ls = mpk::build_levels(A);
        const CsrMatrix P = mpk::permute(A, ls.perm);
        std::vector<double> x(A.n_rows);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::cos(0.11 * i);
        for (int p_m : {1, 3, 6}) {
            // Small cache target forces many groups.
            const ExecutionPlan plan = mpk::group_levels(ls, P, 64 * 1024, p_m);
            VectorBlock base(P.n_rows, p_m + 1), blk(P.n_rows, p_m + 1);
            mpk::baseline_mpk(P, x, p_m, base);
            mpk::mpk(plan, P, x, p_m, blk);
            EXPECT_TRUE(testutil::bitwise_equal(base.data, blk.data))
                << "p_m=" << p_m << " first mismatch at "
                << testutil::first_mismatch(base.data, blk.data);
        }
    }
}

TEST(Mpk, ThreadCountDoesNotChangeBits) {
    const CsrMatrix A = mpk::poisson2d(40, 40);
    const auto ls = mpk::build_levels(A);
    const CsrMatrix P = mpk::permute(A, ls.perm);
    const ExecutionPlan plan = mpk::group_levels(ls, P, 32 * 1024, 4);
    std::vector<double> x(A.n_rows, 1.0);
    VectorBlock ref(P.n_rows, 5);
    mpk::mpk(plan, P, x, 4, ref, 1);
    for (int nt : {2, 4, 8}) {
        VectorBlock blk(P.n_rows, 5);
        mpk::mpk(plan, P, x, 4, blk, nt);
        EXPECT_TRUE(testutil::bitwise_equal(ref.data, blk.data)) << "threads=" << nt;
    }
}

TEST(MpkShifted, MatchesDenseOracleWithPairs) {
    const CsrMatrix A = mpk::random_csr(150, 4, 21);
    std::vector<double> x(A.n_rows);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(1.3 * i);
    // Real, pair, real: exercises the two-step pair formulation mid-chain.
    const std::vector<cplx> shifts = {{0.4, 0.0}, {1.2, 0.7}, {1.2, -0.7}, {-0.3, 0.0}};
    VectorBlock block(A.n_rows, shifts.size() + 1);
    mpk::baseline_mpk_shifted(A, x, shifts, block);
    const auto ref = oracle::dense_shifted_power_apply(oracle::dense_from_csr(A),
                                                       oracle::to_eigen(x), shifts);
    for (std::size_t p = 1; p <= shifts.size(); ++p) {
        const double scale = std::max(1.0, ref[p - 1].cwiseAbs().maxCoeff());
        for (index_t r = 0; r < A.n_rows; ++r)
            EXPECT_NEAR(block.slice(p)[r], ref[p - 1](r), 1e-12 * scale);
    }
}

TEST(MpkShifted, BlockedBitwiseEqualsBaseline) {
    const CsrMatrix A = mpk::poisson2d(30, 30);
    const auto ls = mpk::build_levels(A);
    const CsrMatrix P = mpk::permute(A, ls.perm);
    std::vector<double> x(A.n_rows);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1.0 / (1.0 + i % 17);
    const std::vector<cplx> shifts = {{2.0, 0.0}, {3.5, 1.5}, {3.5, -1.5}, {4.0, 0.0}, {1.0, 0.0}};
    const ExecutionPlan plan =
        mpk::group_levels(ls, P, 16 * 1024, static_cast<int>(shifts.size()));
    VectorBlock base(P.n_rows, shifts.size() + 1), blk(P.n_rows, shifts.size() + 1);
    mpk::baseline_mpk_shifted(P, x, shifts, base);
    mpk::mpk_shifted(plan, P, x, shifts, blk);
    EXPECT_TRUE(testutil::bitwise_equal(base.data, blk.data));
}

TEST(MpkShifted, RejectsMalformedPairs) {
    const CsrMatrix A = mpk::poisson1d(8);
    std::vector<double> x(8, 1.0);
    VectorBlock block(8, 4);
    // Pair straddling the end of the sequence.
    EXPECT_THROW(mpk::baseline_mpk_shifted(A, x, {{1.0, 0.0}, {2.0, 1.0}}, block),
                 std::invalid_argument);
    // Conjugate not adjacent.
    EXPECT_THROW(
        mpk::baseline_mpk_shifted(A, x, {{2.0, 1.0}, {0.5, 0.0}, {2.0, -1.0}}, block),
        std::invalid_argument);
    // Second member first.
    EXPECT_THROW(mpk::baseline_mpk_shifted(A, x, {{2.0, -1.0}, {2.0, 1.0}, {0.0, 0.0}}, block),
                 std::invalid_argument);
}

TEST(TuneP, PicksArgmaxAndBreaksTiesLow) {
    const std::vector<double> table = {1.0, 1.8, 2.1, 2.0};
    auto res = mpk::tune_p(1, 4, [&](int p) { return table[p - 1]; });
    EXPECT_EQ(res.p_opt, 3);
    ASSERT_EQ(res.table.size(), 4u);
    EXPECT_EQ(res.table[2].second, 2.1);

    const std::vector<double> tied = {1.0, 2.1, 1.5, 2.1};
    res = mpk::tune_p(1, 4, [&](int p) { return tied[p - 1]; });
    EXPECT_EQ(res.p_opt, 2);
}

TEST(TuneP, MeasuredPathProducesPositiveThroughput) {
    const CsrMatrix A = mpk::poisson2d(48, 48);
    const auto ls = mpk::build_levels(A);
    const CsrMatrix P = mpk::permute(A, ls.perm);
    const auto res = mpk::tune_p(ls, P, 256 * 1024, 1, 3);
    EXPECT_GE(res.p_opt, 1);
    EXPECT_LE(res.p_opt, 3);
    ASSERT_EQ(res.table.size(), 3u);
    for (const auto& [p, gf] : res.table) EXPECT_GT(gf, 0.0) << "p=" << p;
}

TEST(Mpk, RejectsMismatchedArguments) {
    const CsrMatrix A = mpk::poisson1d(10);
    const auto ls = mpk::build_levels(A);
    const CsrMatrix P = mpk::permute(A, ls.perm);
    const ExecutionPlan plan = mpk::group_levels(ls, P, 1024, 2);
    std::vector<double> x(10, 1.0);
    VectorBlock small(10, 2);
    EXPECT_THROW(mpk::mpk(plan, P, x, 2, small), std::invalid_argument);  // needs 3 slices
    VectorBlock ok(10, 4);
    EXPECT_THROW(mpk::mpk(plan, P, x, 3, ok), std::invalid_argument);  // p_m > plan
    std::vector<double> bad(9, 1.0);
    EXPECT_THROW(mpk::baseline_mpk(A, bad, 2, ok), std::invalid_argument);
}
