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
 * Compressed sparse row matrix storage and the basic kernels on it.
 *
 * Values are 64-bit floats and indices 32-bit unsigned; column indices are
 * kept sorted within every row so that per-row accumulation order is fixed,
 * which makes every kernel in this library bitwise reproducible regardless
 * of scheduling.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpk/threading.hpp"

namespace mpk {

using index_t = std::uint32_t;

/// One coordinate-format entry; used as the construction currency.
struct Triplet {
    index_t row = 0;
    index_t col = 0;
    double val = 0.0;
};

/// CSR sparse matrix. Rows may be empty; the matrix may be rectangular.
///
/// Invariants established at construction and relied upon everywhere:
///  - row_ptr has n_rows+1 monotone entries, row_ptr[0] == 0;
///  - column indices are strictly increasing within each row (duplicates
///    were summed);
///  - nnz fits in a signed 32-bit count.
struct CsrMatrix {
    index_t n_rows = 0;
    index_t n_cols = 0;
    std::vector<index_t> row_ptr;
    std::vector<index_t> col_idx;
    std::vector<double> values;

    index_t nnz() const { return row_ptr.empty() ? 0 : row_ptr[n_rows]; }
};

/// Builds a CsrMatrix from coordinate entries.
///
/// Duplicate (row, col) entries are summed in their input order; columns are
/// sorted ascending within each row. Throws std::invalid_argument on indices
/// out of range or entry counts at or above 2^31.
inline CsrMatrix from_coo(index_t n_rows, index_t n_cols,
                          std::vector<Triplet> entries) {
    constexpr std::size_t kMaxNnz = std::size_t{1} << 31;
    if (entries.size() >= kMaxNnz)
        throw std::invalid_argument("from_coo: entry count exceeds 32-bit index range");
    for (const Triplet& t : entries) {
        if (t.row >= n_rows || t.col >= n_cols)
            throw std::invalid_argument("from_coo: entry index out of range at (" +
                                        std::to_string(t.row) + ", " +
                                        std::to_string(t.col) + ")");
    }
    // Stable sort keeps duplicates in input order so their sum is
    // deterministic for a given input sequence.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Triplet& a, const Triplet& b) {
                         return a.row != b.row ? a.row < b.row : a.col < b.col;
                     });

    CsrMatrix A;
    A.n_rows = n_rows;
    A.n_cols = n_cols;
    A.row_ptr.assign(static_cast<std::size_t>(n_rows) + 1, 0);
    A.col_idx.reserve(entries.size());
    A.values.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size();) {
        const index_t r = entries[i].row;
        const index_t c = entries[i].col;
        double sum = 0.0;
        for (; i < entries.size() && entries[i].row == r && entries[i].col == c; ++i)
            sum += entries[i].val;
        A.col_idx.push_back(c);
        A.values.push_back(sum);
        A.row_ptr[r + 1] = static_cast<index_t>(A.col_idx.size());
    }
    // Rows without entries inherit the previous offset.
    for (index_t r = 0; r < n_rows; ++r)
        A.row_ptr[r + 1] = std::max(A.row_ptr[r + 1], A.row_ptr[r]);
    return A;
}

/// y = A x over the row range [row_s, row_e). The building block every
/// kernel variant shares: accumulation runs in stored (ascending) column
/// order, so results do not depend on how rows are scheduled.
inline void spmv_rows(const CsrMatrix& A, const double* x, double* y,
                      index_t row_s, index_t row_e) {
    for (index_t r = row_s; r < row_e; ++r) {
        double acc = 0.0;
        for (index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
            acc += A.values[k] * x[A.col_idx[k]];
        y[r] = acc;
    }
}

/// y = A x, rows statically partitioned over worker threads.
inline void spmv(const CsrMatrix& A, const double* x, double* y, int threads = 0) {
    const int nt = resolve_threads(threads);
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(A.n_rows); ++r) {
        double acc = 0.0;
        for (index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
            acc += A.values[k] * x[A.col_idx[k]];
        y[r] = acc;
    }
}

inline void spmv(const CsrMatrix& A, const std::vector<double>& x,
                 std::vector<double>& y, int threads = 0) {
    if (x.size() != A.n_cols || y.size() != A.n_rows)
        throw std::invalid_argument("spmv: vector size mismatch");
    spmv(A, x.data(), y.data(), threads);
}

/// Validates that perm is a permutation of [0, n).
inline void check_permutation(const std::vector<index_t>& perm, index_t n,
                              const char* who) {
    if (perm.size() != n)
        throw std::invalid_argument(std::string(who) + ": permutation size mismatch");
    std::vector<bool> seen(n, false);
    for (index_t p : perm) {
        if (p >= n || seen[p])
            throw std::invalid_argument(std::string(who) + ": not a permutation");
        seen[p] = true;
    }
}

/// Symmetric reordering: result[perm[i], perm[j]] = A[i, j].
/// perm maps old index -> new index; requires a square matrix.
inline CsrMatrix permute(const CsrMatrix& A, const std::vector<index_t>& perm) {
    if (A.n_rows != A.n_cols)
        throw std::invalid_argument("permute: matrix must be square");
    check_permutation(perm, A.n_rows, "permute");

    CsrMatrix B;
    B.n_rows = A.n_rows;
    B.n_cols = A.n_cols;
    B.row_ptr.assign(static_cast<std::size_t>(A.n_rows) + 1, 0);
    for (index_t r = 0; r < A.n_rows; ++r)
        B.row_ptr[perm[r] + 1] = A.row_ptr[r + 1] - A.row_ptr[r];
    std::partial_sum(B.row_ptr.begin(), B.row_ptr.end(), B.row_ptr.begin());

    B.col_idx.resize(A.nnz());
    B.values.resize(A.nnz());
    std::vector<std::pair<index_t, double>> scratch;
    for (index_t r = 0; r < A.n_rows; ++r) {
        scratch.clear();
        for (index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
            scratch.emplace_back(perm[A.col_idx[k]], A.values[k]);
        std::sort(scratch.begin(), scratch.end());
        index_t out = B.row_ptr[perm[r]];
        for (const auto& [c, v] : scratch) {
            B.col_idx[out] = c;
            B.values[out] = v;
            ++out;
        }
    }
    return B;
}

/// Gathers a vector into permuted order: out[perm[i]] = in[i].
inline std::vector<double> permute_vector(const std::vector<double>& in,
                                          const std::vector<index_t>& perm) {
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[perm[i]] = in[i];
    return out;
}

/// Scatters a permuted vector back to original order: out[i] = in[perm[i]].
inline std::vector<double> unpermute_vector(const std::vector<double>& in,
                                            const std::vector<index_t>& perm) {
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[perm[i]];
    return out;
}

/// B = A^T with sorted rows.
inline CsrMatrix transpose(const CsrMatrix& A) {
    CsrMatrix B;
    B.n_rows = A.n_cols;
    B.n_cols = A.n_rows;
    B.row_ptr.assign(static_cast<std::size_t>(A.n_cols) + 1, 0);
    for (index_t c : A.col_idx) B.row_ptr[c + 1]++;
    std::partial_sum(B.row_ptr.begin(), B.row_ptr.end(), B.row_ptr.begin());
    B.col_idx.resize(A.nnz());
    B.values.resize(A.nnz());
    std::vector<index_t> cursor(B.row_ptr.begin(), B.row_ptr.end() - 1);
    // Walking A in row order writes each transposed row in ascending column
    // (= original row) order, so B comes out sorted.
    for (index_t r = 0; r < A.n_rows; ++r) {
        for (index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) {
            const index_t pos = cursor[A.col_idx[k]]++;
            B.col_idx[pos] = r;
            B.values[pos] = A.values[k];
        }
    }
    return B;
}

/// Position of the diagonal entry within each row's slice, or npos if the
/// row has no stored diagonal.
inline constexpr index_t kNoDiag = std::numeric_limits<index_t>::max();

inline std::vector<index_t> diagonal_positions(const CsrMatrix& A) {
    std::vector<index_t> pos(A.n_rows, kNoDiag);
    for (index_t r = 0; r < A.n_rows && r < A.n_cols; ++r) {
        const index_t* begin = A.col_idx.data() + A.row_ptr[r];
        const index_t* end = A.col_idx.data() + A.row_ptr[r + 1];
        const index_t* it = std::lower_bound(begin, end, r);
        if (it != end && *it == r)
            pos[r] = static_cast<index_t>(it - A.col_idx.data());
    }
    return pos;
}

}  // namespace mpk
