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
 * Block orthogonalization kernels: iterated classical Gram-Schmidt against an
 * existing basis and tall-skinny QR via a deterministic row-panel reduction
 * tree. Both operate on column-major blocks laid out like VectorBlock slices.
 */

#pragma once

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mpk/threading.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mpk {

// Dense blocks in this header are column-major with leading dimension = rows,
// which is exactly the layout of consecutive VectorBlock slices.

// C (qcols x vcols, column-major) = Q^T V. Every entry is a serial dot product
// over the rows, so the result is independent of the thread count.
inline void block_dots(const double* q, const double* v, std::size_t rows,
                       std::size_t qcols, std::size_t vcols, double* c,
                       int threads = 0) {
    const int nt = resolve_threads(threads);
    const std::size_t entries = qcols * vcols;
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::size_t e = 0; e < entries; ++e) {
        const std::size_t k = e % qcols;
        const std::size_t j = e / qcols;
        const double* qk = q + k * rows;
        const double* vj = v + j * rows;
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            acc += qk[i] * vj[i];
        }
        c[e] = acc;
    }
}

// V <- V - Q C. Each element of V is updated serially in ascending k order, so
// the result is independent of how the rows are chunked across threads.
inline void block_update(const double* q, const double* c, std::size_t rows,
                         std::size_t qcols, std::size_t vcols, double* v,
                         int threads = 0) {
    const int nt = resolve_threads(threads);
#pragma omp parallel num_threads(nt)
    {
#ifdef _OPENMP
        const std::size_t tid = static_cast<std::size_t>(omp_get_thread_num());
        const std::size_t team = static_cast<std::size_t>(omp_get_num_threads());
#else
        const std::size_t tid = 0, team = 1;
#endif
        const std::size_t rs = rows * tid / team;
        const std::size_t re = rows * (tid + 1) / team;
        for (std::size_t j = 0; j < vcols; ++j) {
            double* vj = v + j * rows;
            for (std::size_t k = 0; k < qcols; ++k) {
                const double ck = c[j * qcols + k];
                const double* qk = q + k * rows;
                for (std::size_t i = rs; i < re; ++i) {
                    vj[i] -= ck * qk[i];
                }
            }
        }
    }
}

// Iterated classical Gram-Schmidt: V <- V - Q (Q^T V), repeated `sweeps`
// times. Q has orthonormal columns; the accumulated projection coefficients
// (qcols x vcols, column-major) are returned for Hessenberg assembly.
inline std::vector<double> icgs_block_orthogonalize(const double* q, std::size_t rows,
                                                    std::size_t qcols, double* v,
                                                    std::size_t vcols, int sweeps,
                                                    int threads = 0) {
    std::vector<double> coeff(qcols * vcols, 0.0);
    if (qcols == 0 || vcols == 0) {
        return coeff;
    }
    if (sweeps < 1) {
        throw std::invalid_argument("icgs_block_orthogonalize: sweeps must be >= 1");
    }
    std::vector<double> c(qcols * vcols);
    for (int sw = 0; sw < sweeps; ++sw) {
        block_dots(q, v, rows, qcols, vcols, c.data(), threads);
        block_update(q, c.data(), rows, qcols, vcols, v, threads);
        for (std::size_t e = 0; e < coeff.size(); ++e) {
            coeff[e] += c[e];
        }
    }
    return coeff;
}

namespace detail {

// Thin Householder QR of a panel mapped out of the tall block.
inline void panel_qr(const double* v, std::size_t rows, std::size_t row_s,
                     std::size_t row_e, std::size_t cols, Eigen::MatrixXd& thin_q,
                     Eigen::MatrixXd& r) {
    const Eigen::Index pr = static_cast<Eigen::Index>(row_e - row_s);
    const Eigen::Index pc = static_cast<Eigen::Index>(cols);
    Eigen::Map<const Eigen::MatrixXd, Eigen::Unaligned, Eigen::OuterStride<>> panel(
        v + row_s, pr, pc, Eigen::OuterStride<>(static_cast<Eigen::Index>(rows)));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(panel);
    thin_q = qr.householderQ() * Eigen::MatrixXd::Identity(pr, pc);
    r = qr.matrixQR().topLeftCorner(pc, pc).triangularView<Eigen::Upper>();
}

}  // namespace detail

// Tall-skinny QR by a row-panel reduction tree: the block is split into
// row panels of roughly `panel_rows` rows, each panel is factored
// independently, and the per-panel R factors are combined pairwise. The panel
// split is a function of (rows, cols, panel_rows) only, so the result is
// deterministic for a fixed panel count regardless of the thread count.
//
// On return V is overwritten with Q (orthonormal columns) and `r` holds the
// cols x cols upper-triangular factor (column-major, non-negative diagonal)
// with Q R = V_in. Rank deficiency surfaces as near-zero R diagonal entries;
// see tsqr_rank_deficient.
inline void tsqr(double* v, std::size_t rows, std::size_t cols, double* r,
                 std::size_t panel_rows = 4096, int threads = 0) {
    if (cols == 0) {
        return;
    }
    if (rows < cols) {
        throw std::invalid_argument("tsqr: block must have at least as many rows as columns");
    }
    const std::size_t pr_min = std::max(panel_rows, cols);
    const std::size_t n_panels = std::max<std::size_t>(1, rows / pr_min);
    const auto bound = [&](std::size_t k) { return rows * k / n_panels; };
    const int nt = resolve_threads(threads);

    std::vector<Eigen::MatrixXd> panel_q(n_panels);
    std::vector<Eigen::MatrixXd> node_r(n_panels);
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::size_t k = 0; k < n_panels; ++k) {
        detail::panel_qr(v, rows, bound(k), bound(k + 1), cols, panel_q[k], node_r[k]);
    }

    // Pairwise reduction of R factors. mult[k] accumulates the cols x cols
    // matrix that the k-th panel's thin Q must be multiplied by on the right.
    const Eigen::Index c = static_cast<Eigen::Index>(cols);
    std::vector<Eigen::MatrixXd> mult(n_panels, Eigen::MatrixXd::Identity(c, c));
    std::vector<std::vector<std::size_t>> members(n_panels);
    for (std::size_t k = 0; k < n_panels; ++k) {
        members[k] = {k};
    }
    while (node_r.size() > 1) {
        std::vector<Eigen::MatrixXd> next_r;
        std::vector<std::vector<std::size_t>> next_members;
        for (std::size_t i = 0; i + 1 < node_r.size(); i += 2) {
            Eigen::MatrixXd stacked(2 * c, c);
            stacked.topRows(c) = node_r[i];
            stacked.bottomRows(c) = node_r[i + 1];
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
            Eigen::MatrixXd qs = qr.householderQ() * Eigen::MatrixXd::Identity(2 * c, c);
            for (std::size_t p : members[i]) {
                mult[p] = (mult[p] * qs.topRows(c)).eval();
            }
            for (std::size_t p : members[i + 1]) {
                mult[p] = (mult[p] * qs.bottomRows(c)).eval();
            }
            next_r.emplace_back(
                qr.matrixQR().topLeftCorner(c, c).triangularView<Eigen::Upper>());
            std::vector<std::size_t> merged = std::move(members[i]);
            merged.insert(merged.end(), members[i + 1].begin(), members[i + 1].end());
            next_members.push_back(std::move(merged));
        }
        if (node_r.size() % 2 == 1) {
            next_r.push_back(std::move(node_r.back()));
            next_members.push_back(std::move(members.back()));
        }
        node_r = std::move(next_r);
        members = std::move(next_members);
    }
    Eigen::MatrixXd r_final = std::move(node_r.front());

    // Fix the R diagonal sign: Q R = (Q D)(D R) for D = diag(+-1).
    for (Eigen::Index j = 0; j < c; ++j) {
        if (r_final(j, j) < 0.0) {
            r_final.row(j) = -r_final.row(j);
            for (std::size_t k = 0; k < n_panels; ++k) {
                mult[k].col(j) = -mult[k].col(j);
            }
        }
    }

#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::size_t k = 0; k < n_panels; ++k) {
        const std::size_t rs = bound(k);
        Eigen::Map<Eigen::MatrixXd, Eigen::Unaligned, Eigen::OuterStride<>> panel(
            v + rs, static_cast<Eigen::Index>(bound(k + 1) - rs), c,
            Eigen::OuterStride<>(static_cast<Eigen::Index>(rows)));
        panel = (panel_q[k] * mult[k]).eval();
    }

    for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < c; ++i) {
            r[static_cast<std::size_t>(j) * cols + static_cast<std::size_t>(i)] =
                (i <= j) ? r_final(i, j) : 0.0;
        }
    }
}

// True when any diagonal entry of the cols x cols R factor falls below the
// caller's threshold in magnitude.
inline bool tsqr_rank_deficient(const double* r, std::size_t cols, double threshold) {
    for (std::size_t j = 0; j < cols; ++j) {
        if (std::abs(r[j * cols + j]) < threshold) {
            return true;
        }
    }
    return false;
}

}  // namespace mpk
