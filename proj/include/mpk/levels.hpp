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
 * BFS level construction over the symmetrised matrix graph.
 *
 * Rows grouped by BFS distance have the property that every nonzero couples
 * rows at most one level apart, which is what lets a power-kernel sweep be
 * reordered into cache-sized wavefront cells without violating data
 * dependencies.
 */

#pragma once

#include <algorithm>
#include <queue>
#include <stdexcept>
#include <vector>

#include "mpk/csr.hpp"

namespace mpk {

/// BFS level decomposition of a square matrix.
///
/// `levels[r]` is the level of *original* row r; `perm` maps original to
/// level order (rows sorted by level, then original index); `level_ptr`
/// bounds each level as a contiguous row range of the permuted matrix.
struct LevelStructure {
    index_t n_rows = 0;
    std::vector<index_t> levels;
    std::vector<index_t> perm;
    std::vector<index_t> inv_perm;
    std::vector<index_t> level_ptr;

    index_t n_levels() const {
        return level_ptr.empty() ? 0 : static_cast<index_t>(level_ptr.size() - 1);
    }
    /// Level of a row in the *permuted* ordering.
    index_t level_of_permuted(index_t new_row) const {
        return levels[inv_perm[new_row]];
    }
};

/// Builds the BFS level structure of A's symmetrised pattern.
///
/// Each connected component is traversed from its minimum-degree node
/// (ties broken toward the smallest index); the per-component distance
/// classes are merged level-wise, so level k holds every row at distance k
/// from its component's root.
inline LevelStructure build_levels(const CsrMatrix& A) {
    if (A.n_rows != A.n_cols)
        throw std::invalid_argument("build_levels: matrix must be square");
    const index_t n = A.n_rows;
    const CsrMatrix At = transpose(A);

    // Symmetrised adjacency (self-loops dropped): per row, the sorted union
    // of the row patterns of A and A^T.
    std::vector<index_t> xadj(static_cast<std::size_t>(n) + 1, 0);
    std::vector<index_t> adjncy;
    adjncy.reserve(2u * A.nnz());
    for (index_t r = 0; r < n; ++r) {
        index_t a = A.row_ptr[r], ae = A.row_ptr[r + 1];
        index_t b = At.row_ptr[r], be = At.row_ptr[r + 1];
        while (a < ae || b < be) {
            index_t c;
            if (b >= be || (a < ae && A.col_idx[a] <= At.col_idx[b])) {
                c = A.col_idx[a];
                if (a < ae && b < be && A.col_idx[a] == At.col_idx[b]) ++b;
                ++a;
            } else {
                c = At.col_idx[b];
                ++b;
            }
            if (c != r) adjncy.push_back(c);
        }
        xadj[r + 1] = static_cast<index_t>(adjncy.size());
    }

    LevelStructure ls;
    ls.n_rows = n;
    ls.levels.assign(n, 0);
    std::vector<char> visited(n, 0);

    // Visit candidates in (degree, index) order; the first unvisited one is
    // the next component's root.
    std::vector<index_t> by_degree(n);
    for (index_t i = 0; i < n; ++i) by_degree[i] = i;
    std::sort(by_degree.begin(), by_degree.end(), [&](index_t x, index_t y) {
        const index_t dx = xadj[x + 1] - xadj[x];
        const index_t dy = xadj[y + 1] - xadj[y];
        return dx != dy ? dx < dy : x < y;
    });

    index_t max_level = 0;
    std::queue<index_t> q;
    for (index_t cand : by_degree) {
        if (visited[cand]) continue;
        visited[cand] = 1;
        ls.levels[cand] = 0;
        q.push(cand);
        while (!q.empty()) {
            const index_t u = q.front();
            q.pop();
            for (index_t k = xadj[u]; k < xadj[u + 1]; ++k) {
                const index_t v = adjncy[k];
                if (!visited[v]) {
                    visited[v] = 1;
                    ls.levels[v] = ls.levels[u] + 1;
                    max_level = std::max(max_level, ls.levels[v]);
                    q.push(v);
                }
            }
        }
    }

    // Counting sort by (level, original index) yields the permutation and
    // the level offsets in one pass.
    const index_t n_levels = n == 0 ? 0 : max_level + 1;
    ls.level_ptr.assign(static_cast<std::size_t>(n_levels) + 1, 0);
    for (index_t r = 0; r < n; ++r) ls.level_ptr[ls.levels[r] + 1]++;
    for (index_t l = 0; l < n_levels; ++l) ls.level_ptr[l + 1] += ls.level_ptr[l];

    ls.perm.assign(n, 0);
    ls.inv_perm.assign(n, 0);
    std::vector<index_t> cursor(ls.level_ptr.begin(), ls.level_ptr.end() - 1);
    for (index_t r = 0; r < n; ++r) {
        const index_t pos = cursor[ls.levels[r]]++;
        ls.perm[r] = pos;
        ls.inv_perm[pos] = r;
    }
    return ls;
}

/// Checks the level adjacency property on a matrix already permuted to
/// level order: every nonzero must couple rows at most one level apart.
inline bool validate_levels(const CsrMatrix& A_perm, const LevelStructure& ls) {
    if (A_perm.n_rows != ls.n_rows || A_perm.n_rows != A_perm.n_cols) return false;
    std::vector<index_t> level_of_new(ls.n_rows);
    for (index_t i = 0; i < ls.n_rows; ++i) level_of_new[i] = ls.level_of_permuted(i);
    for (index_t r = 0; r < A_perm.n_rows; ++r) {
        const index_t lr = level_of_new[r];
        for (index_t k = A_perm.row_ptr[r]; k < A_perm.row_ptr[r + 1]; ++k) {
            const index_t lc = level_of_new[A_perm.col_idx[k]];
            const index_t d = lr > lc ? lr - lc : lc - lr;
            if (d > 1) return false;
        }
    }
    return true;
}

}  // namespace mpk
