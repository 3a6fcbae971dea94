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
 * Diagonal-wavefront executor for cache-blocked power kernels.
 *
 * Cells are (group, stage) pairs where a stage is one sub-power of one
 * power; the wavefront runs stages of a chained kernel exactly like plain
 * powers, so the effective depth is p_m * sub_powers. Executing diagonal
 * d = g + q - 1 in ascending stage order guarantees that when cell (g, q)
 * runs, cells (g-1, q-1), (g, q-1) and (g+1, q-1) are already complete --
 * and by induction every earlier stage at every neighbouring group. Since
 * the level adjacency property confines a row's dependencies to neighbour
 * groups, every read a well-formed kernel makes is then safe.
 *
 * Threads split each cell's rows statically; a barrier separates cells.
 * Kernels write each row's outputs exactly once and accumulate in stored
 * column order, so results are bitwise identical for any thread count.
 */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mpk/plan.hpp"
#include "mpk/threading.hpp"

namespace mpk {

/// One scheduled cell: group index and 1-based effective stage.
struct ScheduleCell {
    index_t group;
    int stage;  ///< q in [1, p_m * sub_powers]
};

/// Enumerates the diagonal wavefront: for each diagonal d, ascending stage
/// q executes group g = d - (q - 1) when it exists.
inline std::vector<ScheduleCell> wavefront_schedule(index_t n_groups, int stages) {
    std::vector<ScheduleCell> order;
    if (n_groups == 0 || stages <= 0) return order;
    order.reserve(static_cast<std::size_t>(n_groups) * stages);
    const std::int64_t ng = n_groups;
    for (std::int64_t d = 0; d <= ng + stages - 2; ++d) {
        for (int q = 1; q <= stages; ++q) {
            const std::int64_t g = d - (q - 1);
            if (g >= 0 && g < ng)
                order.push_back({static_cast<index_t>(g), q});
        }
    }
    return order;
}

/// Runs `kernel(row_s, row_e, p, j)` for every wavefront cell of the plan,
/// powers p in [1, p_m] and sub-powers j in [0, sub_powers). `p_m` may be
/// lowered below the plan's value (used when a larger power budget is
/// sliced into shorter runs); the grouping stays valid because the plan's
/// footprint target was computed for the larger p_m.
template <typename Kernel>
void execute(const ExecutionPlan& plan, Kernel&& kernel, int threads = 0, int p_m = 0) {
    if (p_m <= 0) p_m = plan.p_m;
    if (p_m > plan.p_m)
        throw std::invalid_argument("execute: p_m exceeds the plan's power budget");
    const int sub = plan.sub_powers;
    const auto order = wavefront_schedule(plan.n_groups(), p_m * sub);
    const int nt = resolve_threads(threads);

#pragma omp parallel num_threads(nt)
    {
#ifdef _OPENMP
        const int tid = omp_get_thread_num();
        const int team = omp_get_num_threads();
#else
        const int tid = 0;
        const int team = 1;
#endif
        for (const ScheduleCell& cell : order) {
            const index_t rs = plan.group_rows[cell.group];
            const index_t re = plan.group_rows[cell.group + 1];
            const index_t len = re - rs;
            const index_t c0 = rs + static_cast<index_t>(
                                        (static_cast<std::uint64_t>(len) * tid) / team);
            const index_t c1 = rs + static_cast<index_t>(
                                        (static_cast<std::uint64_t>(len) * (tid + 1)) / team);
            if (c1 > c0) {
                const int p = (cell.stage - 1) / sub + 1;
                const int j = (cell.stage - 1) % sub;
                kernel(c0, c1, p, j);
            }
#pragma omp barrier
        }
    }
}

}  // namespace mpk
