// Level construction and cache grouping: BFS distances against a dense
// reference, the adjacency property, and the greedy footprint packing.

#include <gtest/gtest.h>

#include "mpk/generators.hpp"
#include "mpk/levels.hpp"
#include "mpk/plan.hpp"
#include "support/oracles.hpp"

using mpk::CsrMatrix;
using mpk::index_t;
using mpk::LevelStructure;

TEST(BuildLevels, TridiagonalGivesOneRowPerLevel) {
    const CsrMatrix A = mpk::poisson1d(5);
    const LevelStructure ls = mpk::build_levels(A);
    ASSERT_EQ(ls.n_levels(), 5u);
    for (index_t l = 0; l < 5; ++l)
        EXPECT_EQ(ls.level_ptr[l + 1] - ls.level_ptr[l], 1u);
    // The min-degree root is an endpoint; index ties resolve to row 0, so
    // the level permutation is the identity here.
    for (index_t r = 0; r < 5; ++r) EXPECT_EQ(ls.perm[r], r);
}

TEST(BuildLevels, Grid3x3LevelSizes) {
    const CsrMatrix A = mpk::poisson2d(3, 3);
    const LevelStructure ls = mpk::build_levels(A);
    ASSERT_EQ(ls.n_levels(), 5u);
    const std::vector<index_t> sizes = {1, 2, 3, 2, 1};
    for (index_t l = 0; l < 5; ++l)
        EXPECT_EQ(ls.level_ptr[l + 1] - ls.level_ptr[l], sizes[l]);
}

TEST(BuildLevels, DiagonalMatrixCollapsesToOneLevel) {
    const CsrMatrix A = mpk::from_coo(6, 6,
                                      {{0, 0, 1.0},
                                       {1, 1, 2.0},
                                       {2, 2, 3.0},
                                       {3, 3, 4.0},
                                       {4, 4, 5.0},
                                       {5, 5, 6.0}});
    const LevelStructure ls = mpk::build_levels(A);
    ASSERT_EQ(ls.n_levels(), 1u);
    EXPECT_EQ(ls.level_ptr[1], 6u);
}

TEST(BuildLevels, MatchesDenseBfsReference) {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        const CsrMatrix A = mpk::random_csr(120, 4, seed);
        const LevelStructure ls = mpk::build_levels(A);
        const auto ref = oracle::bfs_levels_reference(oracle::dense_from_csr(A));
        for (index_t r = 0; r < A.n_rows; ++r)
            EXPECT_EQ(static_cast<int>(ls.levels[r]), ref[r]) << "row " << r;
    }
}

TEST(BuildLevels, ComponentsMergeAtLevelZero) {
    // Two disjoint paths of lengths 3 and 2: component roots both land in
    // level 0, deeper rows merge by distance.
    const CsrMatrix A = mpk::from_coo(
        5, 5,
        {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}, {3, 4, 1.0}, {4, 3, 1.0}});
    const LevelStructure ls = mpk::build_levels(A);
    ASSERT_EQ(ls.n_levels(), 3u);
    EXPECT_EQ(ls.level_ptr[1] - ls.level_ptr[0], 2u);  // both roots
    EXPECT_EQ(ls.level_ptr[2] - ls.level_ptr[1], 2u);
    EXPECT_EQ(ls.level_ptr[3] - ls.level_ptr[2], 1u);
    const auto ref = oracle::bfs_levels_reference(oracle::dense_from_csr(A));
    for (index_t r = 0; r < 5; ++r)
        EXPECT_EQ(static_cast<int>(ls.levels[r]), ref[r]);
}

TEST(BuildLevels, PermSortedByLevelThenIndex) {
    const CsrMatrix A = mpk::random_spd(200, 5, 77);
    const LevelStructure ls = mpk::build_levels(A);
    for (index_t i = 0; i + 1 < ls.n_rows; ++i) {
        const index_t a = ls.inv_perm[i], b = ls.inv_perm[i + 1];
        const bool ordered = ls.levels[a] < ls.levels[b] ||
                             (ls.levels[a] == ls.levels[b] && a < b);
        EXPECT_TRUE(ordered) << "positions " << i << ", " << i + 1;
        EXPECT_EQ(ls.perm[a], i);
    }
}

TEST(ValidateLevels, AdjacencyHoldsOnPermutedMatrices) {
    for (const CsrMatrix& A :
         {mpk::poisson2d(20, 17), mpk::poisson3d(7, 8, 9), mpk::random_csr(300, 5, 11)}) {
        const LevelStructure ls = mpk::build_levels(A);
        const CsrMatrix P = mpk::permute(A, ls.perm);
        EXPECT_TRUE(mpk::validate_levels(P, ls));
    }
}

TEST(ValidateLevels, DetectsViolation) {
    // An identity level structure over a matrix with a long-range coupling
    // must be rejected.
    const CsrMatrix A =
        mpk::from_coo(4, 4, {{0, 3, 1.0}, {0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {3, 3, 1.0}});
    LevelStructure fake;
    fake.n_rows = 4;
    fake.levels = {0, 1, 2, 3};
    fake.perm = {0, 1, 2, 3};
    fake.inv_perm = {0, 1, 2, 3};
    fake.level_ptr = {0, 1, 2, 3, 4};
    EXPECT_FALSE(mpk::validate_levels(A, fake));
}

TEST(GreedyGroup, PacksLevelsAgainstTarget) {
    // Ten equal levels against a target of 2.5 levels' worth: pairs.
    const std::vector<std::size_t> fp(10, 1000);
    const auto bounds = mpk::greedy_group(fp, 2500);
    EXPECT_EQ(bounds, (std::vector<index_t>{0, 2, 4, 6, 8, 10}));
}

TEST(GreedyGroup, OversizedLevelGetsOwnGroup) {
    const auto bounds = mpk::greedy_group({1000, 5000, 1000, 1000}, 2500);
    EXPECT_EQ(bounds, (std::vector<index_t>{0, 1, 2, 4}));
    // Zero target: every level isolated.
    const auto singles = mpk::greedy_group({10, 10, 10}, 0);
    EXPECT_EQ(singles, (std::vector<index_t>{0, 1, 2, 3}));
}

TEST(GroupLevels, PlanInvariants) {
    const CsrMatrix A = mpk::poisson2d(64, 64);
    const LevelStructure ls = mpk::build_levels(A);
    const CsrMatrix P = mpk::permute(A, ls.perm);
    const int p_m = 4;
    const mpk::ExecutionPlan plan = mpk::group_levels(ls, P, 100 * 1024, p_m);

    EXPECT_EQ(plan.target_bytes, 100 * 1024 / (p_m + 1));
    ASSERT_GE(plan.n_groups(), 1u);
    EXPECT_EQ(plan.group_rows.front(), 0u);
    EXPECT_EQ(plan.group_rows.back(), A.n_rows);
    EXPECT_EQ(plan.group_level_ptr.back(), ls.n_levels());
    for (index_t g = 0; g < plan.n_groups(); ++g) {
        EXPECT_LT(plan.group_rows[g], plan.group_rows[g + 1]);
        // Footprint bookkeeping agrees with the row-range formula.
        EXPECT_EQ(plan.group_footprint[g],
                  mpk::row_range_footprint(P, plan.group_rows[g], plan.group_rows[g + 1],
                                           p_m));
        // A group over target must be a single level.
        if (plan.group_footprint[g] > plan.target_bytes) {
            EXPECT_EQ(plan.group_level_ptr[g + 1] - plan.group_level_ptr[g], 1u);
        }
    }
}

TEST(GroupLevels, RejectsBadArguments) {
    const CsrMatrix A = mpk::poisson1d(10);
    const LevelStructure ls = mpk::build_levels(A);
    EXPECT_THROW(mpk::group_levels(ls, A, 1024, 0), std::invalid_argument);
    const CsrMatrix B = mpk::poisson1d(11);
    EXPECT_THROW(mpk::group_levels(ls, B, 1024, 2), std::invalid_argument);
}
