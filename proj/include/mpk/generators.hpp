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
 * Deterministic test/benchmark matrix generators: finite-difference
 * Laplacians on regular grids and random sparse matrices.
 */

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "mpk/csr.hpp"

namespace mpk {

/// 1D Poisson operator: tridiag(-1, 2, -1), n x n.
inline CsrMatrix poisson1d(index_t n) {
    if (n == 0) throw std::invalid_argument("poisson1d: empty grid");
    std::vector<Triplet> t;
    t.reserve(3u * n);
    for (index_t i = 0; i < n; ++i) {
        if (i > 0) t.push_back({i, i - 1, -1.0});
        t.push_back({i, i, 2.0});
        if (i + 1 < n) t.push_back({i, i + 1, -1.0});
    }
    return from_coo(n, n, std::move(t));
}

/// 2D Poisson operator on an nx x ny grid, 5-point stencil (4 on the
/// diagonal, -1 to each grid neighbour), row i = y*nx + x.
inline CsrMatrix poisson2d(index_t nx, index_t ny) {
    if (nx == 0 || ny == 0) throw std::invalid_argument("poisson2d: empty grid");
    const index_t n = nx * ny;
    std::vector<Triplet> t;
    t.reserve(5u * n);
    for (index_t y = 0; y < ny; ++y) {
        for (index_t x = 0; x < nx; ++x) {
            const index_t i = y * nx + x;
            if (y > 0) t.push_back({i, i - nx, -1.0});
            if (x > 0) t.push_back({i, i - 1, -1.0});
            t.push_back({i, i, 4.0});
            if (x + 1 < nx) t.push_back({i, i + 1, -1.0});
            if (y + 1 < ny) t.push_back({i, i + nx, -1.0});
        }
    }
    return from_coo(n, n, std::move(t));
}

/// 3D Poisson operator, 7-point stencil, row i = (z*ny + y)*nx + x.
inline CsrMatrix poisson3d(index_t nx, index_t ny, index_t nz) {
    if (nx == 0 || ny == 0 || nz == 0)
        throw std::invalid_argument("poisson3d: empty grid");
    const index_t n = nx * ny * nz;
    std::vector<Triplet> t;
    t.reserve(7u * n);
    for (index_t z = 0; z < nz; ++z) {
        for (index_t y = 0; y < ny; ++y) {
            for (index_t x = 0; x < nx; ++x) {
                const index_t i = (z * ny + y) * nx + x;
                if (z > 0) t.push_back({i, i - nx * ny, -1.0});
                if (y > 0) t.push_back({i, i - nx, -1.0});
                if (x > 0) t.push_back({i, i - 1, -1.0});
                t.push_back({i, i, 6.0});
                if (x + 1 < nx) t.push_back({i, i + 1, -1.0});
                if (y + 1 < ny) t.push_back({i, i + nx, -1.0});
                if (z + 1 < nz) t.push_back({i, i + nx * ny, -1.0});
            }
        }
    }
    return from_coo(n, n, std::move(t));
}

/// Random square matrix with a guaranteed diagonal and nnz_per_row-1 random
/// off-diagonal entries per row. Off-diagonal values are uniform in [-1, 1);
/// the diagonal is set to the row's absolute off-diagonal sum plus one, so
/// the result is strictly diagonally dominant (hence nonsingular).
/// Fully deterministic for a given seed.
inline CsrMatrix random_csr(index_t n, index_t nnz_per_row, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("random_csr: empty matrix");
    if (nnz_per_row == 0 || nnz_per_row > n)
        throw std::invalid_argument("random_csr: bad nnz_per_row");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<index_t> col_dist(0, n - 1);
    std::uniform_real_distribution<double> val_dist(-1.0, 1.0);

    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(n) * nnz_per_row);
    std::unordered_set<index_t> used;
    for (index_t r = 0; r < n; ++r) {
        used.clear();
        used.insert(r);
        double abs_sum = 0.0;
        for (index_t k = 1; k < nnz_per_row; ++k) {
            index_t c = col_dist(rng);
            while (used.count(c)) c = col_dist(rng);
            used.insert(c);
            const double v = val_dist(rng);
            abs_sum += std::abs(v);
            t.push_back({r, c, v});
        }
        t.push_back({r, r, abs_sum + 1.0});
    }
    return from_coo(n, n, std::move(t));
}

/// Symmetrized variant: (A + A^T) / 2 of random_csr, diagonal re-boosted to
/// keep strict diagonal dominance. Symmetric positive definite by Gershgorin.
inline CsrMatrix random_spd(index_t n, index_t nnz_per_row, std::uint64_t seed) {
    const CsrMatrix A = random_csr(n, nnz_per_row, seed);
    const CsrMatrix At = transpose(A);
    std::vector<Triplet> t;
    t.reserve(2u * A.nnz());
    std::vector<double> off_sum(n, 0.0);
    for (index_t r = 0; r < n; ++r) {
        for (index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
            if (A.col_idx[k] != r) {
                t.push_back({r, A.col_idx[k], 0.5 * A.values[k]});
                off_sum[r] += std::abs(0.5 * A.values[k]);
            }
        for (index_t k = At.row_ptr[r]; k < At.row_ptr[r + 1]; ++k)
            if (At.col_idx[k] != r) {
                t.push_back({r, At.col_idx[k], 0.5 * At.values[k]});
                off_sum[r] += std::abs(0.5 * At.values[k]);
            }
    }
    for (index_t r = 0; r < n; ++r) t.push_back({r, r, off_sum[r] + 1.0});
    return from_coo(n, n, std::move(t));
}

}  // namespace mpk
