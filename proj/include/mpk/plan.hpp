/*
 *   Copyright 2026 the mpk authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file
 * Cache-size-driven grouping of BFS levels into execution groups.
 *
 * A power-kernel sweep keeps p_m+1 vector slices live per row, so the
 * per-group data target is cache_bytes / (p_m + 1): small enough that a
 * group's matrix rows and vector slices survive in cache across all powers
 * of the wavefront that touch the group.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mpk/csr.hpp"
#include "mpk/levels.hpp"

namespace mpk {

/// Wavefront execution plan: consecutive levels merged into groups whose
/// data footprint fits the per-group cache target. Groups are contiguous
/// row ranges of the level-permuted matrix.
struct ExecutionPlan {
    int p_m = 1;
    int sub_powers = 1;
    index_t n_rows = 0;
    std::size_t cache_bytes = 0;
    std::size_t target_bytes = 0;
    std::vector<index_t> group_rows;       ///< n_groups+1 row offsets
    std::vector<index_t> group_level_ptr;  ///< n_groups+1 level offsets
    std::vector<std::size_t> group_footprint;

    index_t n_groups() const {
        return group_rows.empty() ? 0 : static_cast<index_t>(group_rows.size() - 1);
    }
};

/// Data footprint in bytes of a permuted row range: matrix values (8B) and
/// column indices (4B) per entry, a row offset (4B) per row, and p_m+1
/// vector slice entries (8B each) per row.
inline std::size_t row_range_footprint(const CsrMatrix& A_perm, index_t row_s,
                                       index_t row_e, int p_m) {
    const std::size_t nnz = A_perm.row_ptr[row_e] - A_perm.row_ptr[row_s];
    const std::size_t rows = row_e - row_s;
    return 12 * nnz + 4 * rows + 8 * static_cast<std::size_t>(p_m + 1) * rows;
}

/// Greedy accumulation of per-level footprints into groups: a level joins
/// the current group while the running footprint stays within the target;
/// a level that alone exceeds the target becomes its own group. Returns
/// group boundaries as level offsets (n_groups+1 entries).
inline std::vector<index_t> greedy_group(const std::vector<std::size_t>& level_fp,
                                         std::size_t target) {
    std::vector<index_t> bounds{0};
    std::size_t acc = 0;
    for (std::size_t l = 0; l < level_fp.size(); ++l) {
        if (l > bounds.back() && acc + level_fp[l] > target) {
            bounds.push_back(static_cast<index_t>(l));
            acc = 0;
        }
        // A level exceeding the target on its own still needs a group; it
        // simply closes immediately on the next iteration.
        acc += level_fp[l];
    }
    if (!level_fp.empty()) bounds.push_back(static_cast<index_t>(level_fp.size()));
    return bounds;
}

/// Builds the execution plan for a matrix already permuted to level order.
inline ExecutionPlan group_levels(const LevelStructure& ls, const CsrMatrix& A_perm,
                                  std::size_t cache_bytes, int p_m) {
    if (p_m < 1) throw std::invalid_argument("group_levels: p_m must be >= 1");
    if (A_perm.n_rows != ls.n_rows)
        throw std::invalid_argument("group_levels: level structure does not match matrix");

    ExecutionPlan plan;
    plan.p_m = p_m;
    plan.n_rows = ls.n_rows;
    plan.cache_bytes = cache_bytes;
    plan.target_bytes = cache_bytes / static_cast<std::size_t>(p_m + 1);

    std::vector<std::size_t> level_fp(ls.n_levels());
    for (index_t l = 0; l < ls.n_levels(); ++l)
        level_fp[l] = row_range_footprint(A_perm, ls.level_ptr[l], ls.level_ptr[l + 1], p_m);

    const std::vector<index_t> bounds = greedy_group(level_fp, plan.target_bytes);
    plan.group_level_ptr = bounds;
    plan.group_rows.reserve(bounds.size());
    plan.group_footprint.reserve(bounds.size() - 1);
    for (index_t b : bounds) plan.group_rows.push_back(ls.level_ptr[b]);
    for (std::size_t g = 0; g + 1 < bounds.size(); ++g) {
        std::size_t fp = 0;
        for (index_t l = bounds[g]; l < bounds[g + 1]; ++l) fp += level_fp[l];
        plan.group_footprint.push_back(fp);
    }
    return plan;
}

}  // namespace mpk
