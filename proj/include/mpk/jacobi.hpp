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
 * Jacobi preconditioner: plain sequential application and the chained form
 * that fuses the preconditioner into a matrix power stage for cache-blocked
 * execution. Every per-row formula lives in exactly one function that both
 * the sequential and the blocked paths call, which is what makes the two
 * paths bitwise identical.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpk/csr.hpp"
#include "mpk/execute.hpp"
#include "mpk/plan.hpp"
#include "mpk/vector_block.hpp"

namespace mpk {

/// Diagonal bookkeeping shared by the relaxation preconditioners: position
/// of the diagonal entry in every row and its reciprocal.
struct DiagInfo {
    std::vector<index_t> pos;
    std::vector<double> inv;
};

inline DiagInfo build_diag_info(const CsrMatrix& a, const char* who) {
    if (a.n_rows != a.n_cols)
        throw std::invalid_argument(std::string(who) + ": matrix must be square");
    DiagInfo d;
    d.pos = diagonal_positions(a);
    d.inv.resize(a.n_rows);
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        if (d.pos[i] == kNoDiag)
            throw std::runtime_error(std::string(who) + ": missing diagonal entry at row " +
                                     std::to_string(i));
        const double v = a.values[d.pos[i]];
        if (v == 0.0)
            throw std::runtime_error(std::string(who) + ": zero diagonal entry at row " +
                                     std::to_string(i));
        d.inv[i] = 1.0 / v;
    }
    return d;
}

/// Jacobi preconditioner z ~= A^{-1} v via `sweeps` iterations of
/// z^{m+1} = D^{-1} v - D^{-1} (L + U) z^m from a zero initial guess.
struct JacobiPrecon {
    DiagInfo diag;
    int sweeps = 1;
};

inline JacobiPrecon jacobi_setup(const CsrMatrix& a, int sweeps = 1) {
    if (sweeps < 1) throw std::invalid_argument("jacobi_setup: sweeps must be >= 1");
    return {build_diag_info(a, "jacobi_setup"), sweeps};
}

namespace detail {

/// One Jacobi sweep on rows [row_s, row_e):
/// z_i = d_inv_i * v_i - d_inv_i * sum_{k != i} a_ik * z_prev_k.
inline void jacobi_sweep_rows(const CsrMatrix& a, const index_t* diag_pos,
                              const double* d_inv, const double* v,
                              const double* z_prev, double* z_out, index_t row_s,
                              index_t row_e) {
    for (index_t r = row_s; r < row_e; ++r) {
        const index_t dp = diag_pos[r];
        double acc = 0.0;
        for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
            if (k == dp) continue;
            acc += a.values[k] * z_prev[a.col_idx[k]];
        }
        z_out[r] = d_inv[r] * v[r] - d_inv[r] * acc;
    }
}

/// Fused single-sweep form of A (D^{-1} v): the diagonal scaling is applied
/// to the column value inside the SpMV accumulation.
inline void scaled_spmv_rows(const CsrMatrix& a, const double* d_inv, const double* x,
                             double* y, index_t row_s, index_t row_e) {
    for (index_t r = row_s; r < row_e; ++r) {
        double acc = 0.0;
        for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
            const index_t c = a.col_idx[k];
            acc += a.values[k] * (d_inv[c] * x[c]);
        }
        y[r] = acc;
    }
}

/// Pointwise scaling stage z = d_inv (.) x, the first sweep of a multi-sweep
/// Jacobi chain.
inline void diag_scale_rows(const double* d_inv, const double* x, double* z,
                            index_t row_s, index_t row_e) {
    for (index_t r = row_s; r < row_e; ++r) z[r] = d_inv[r] * x[r];
}

/// Chain stages for w = A (M_jacobi^{-1} v). For sweeps == 1 this is a single
/// fused-scaling stage; for sweeps >= 2 the chain materialises z^1 = D^{-1} v
/// in stage 0, runs the remaining sweeps as one stage each, and finishes with
/// a plain SpMV terminal, giving sweeps + 1 sub-power stages.
struct JacobiOpChain {
    const CsrMatrix* a = nullptr;
    const JacobiPrecon* p = nullptr;
    const double* v = nullptr;
    double* y = nullptr;
    VectorBlock* z = nullptr;  // sweeps slices (z^1 .. z^sweeps); unused for sweeps == 1

    static int stages(int sweeps) { return sweeps == 1 ? 1 : sweeps + 1; }

    void operator()(index_t row_s, index_t row_e, int /*power*/, int j) const {
        const int k = p->sweeps;
        const double* d_inv = p->diag.inv.data();
        if (k == 1) {
            scaled_spmv_rows(*a, d_inv, v, y, row_s, row_e);
            return;
        }
        if (j == 0) {
            diag_scale_rows(d_inv, v, z->slice(0), row_s, row_e);
        } else if (j < k) {
            jacobi_sweep_rows(*a, p->diag.pos.data(), d_inv, v, z->slice(j - 1),
                              z->slice(j), row_s, row_e);
        } else {
            spmv_rows(*a, z->slice(k - 1), y, row_s, row_e);
        }
    }
};

}  // namespace detail

/// Sequential Jacobi application z = M^{-1} v (the preconditioner alone).
inline void jacobi_apply(const JacobiPrecon& p, const CsrMatrix& a,
                         const std::vector<double>& v, std::vector<double>& z,
                         int threads = 0) {
    const std::size_t n = a.n_rows;
    if (v.size() != n) throw std::invalid_argument("jacobi_apply: size mismatch");
    z.resize(n);
    const int nt = resolve_threads(threads);
    const double* d_inv = p.diag.inv.data();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::size_t r = 0; r < n; ++r) z[r] = d_inv[r] * v[r];
    if (p.sweeps == 1) return;
    std::vector<double> tmp(n);
    for (int sweep = 2; sweep <= p.sweeps; ++sweep) {
#pragma omp parallel for schedule(static) num_threads(nt)
        for (std::size_t r = 0; r < n; ++r) {
            detail::jacobi_sweep_rows(a, p.diag.pos.data(), d_inv, v.data(), z.data(),
                                      tmp.data(), static_cast<index_t>(r),
                                      static_cast<index_t>(r + 1));
        }
        z.swap(tmp);
    }
}

/// Sequential composition w = A (M^{-1} v) using the chain stages in order.
inline void jacobi_op(const JacobiPrecon& p, const CsrMatrix& a,
                      const std::vector<double>& v, std::vector<double>& y,
                      int threads = 0) {
    const std::size_t n = a.n_rows;
    if (v.size() != n) throw std::invalid_argument("jacobi_op: size mismatch");
    y.resize(n);
    VectorBlock z(p.sweeps > 1 ? n : 0, p.sweeps > 1 ? p.sweeps : 0);
    detail::JacobiOpChain chain{&a, &p, v.data(), y.data(), &z};
    const int stages = detail::JacobiOpChain::stages(p.sweeps);
    const int nt = resolve_threads(threads);
    for (int j = 0; j < stages; ++j) {
#pragma omp parallel for schedule(static) num_threads(nt)
        for (std::size_t r = 0; r < n; ++r)
            chain(static_cast<index_t>(r), static_cast<index_t>(r + 1), 1, j);
    }
}

/// Cache-blocked twin of jacobi_op on the level-permuted matrix; bitwise
/// equal to the sequential composition. The plan must carry
/// sub_powers == JacobiOpChain::stages(sweeps) and a power budget >= 1.
inline void jacobi_op_blocked(const JacobiPrecon& p, const CsrMatrix& a_perm,
                              const ExecutionPlan& plan, const std::vector<double>& v,
                              std::vector<double>& y, int threads = 0) {
    const std::size_t n = a_perm.n_rows;
    if (v.size() != n) throw std::invalid_argument("jacobi_op_blocked: size mismatch");
    if (plan.n_rows != n)
        throw std::invalid_argument("jacobi_op_blocked: plan does not match matrix");
    if (plan.sub_powers != detail::JacobiOpChain::stages(p.sweeps))
        throw std::invalid_argument("jacobi_op_blocked: plan sub_powers mismatch");
    y.resize(n);
    VectorBlock z(p.sweeps > 1 ? n : 0, p.sweeps > 1 ? p.sweeps : 0);
    detail::JacobiOpChain chain{&a_perm, &p, v.data(), y.data(), &z};
    execute(plan, chain, threads, /*p_m=*/1);
}

}  // namespace mpk
