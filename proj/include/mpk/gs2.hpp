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
 * Two-stage Gauss-Seidel (GS2): the triangular solve of a Gauss-Seidel sweep
 * is approximated by gamma inner Jacobi-Richardson iterations, so the whole
 * preconditioner decomposes into sparse row sweeps that map onto sub-power
 * stages of a cache-blocked execution. One outer sweep unrolls into
 * gamma + 2 stages: the stage-0 scaled residual, gamma inner iterations
 * (the last one fused with the iterate update), and a terminal stage that is
 * either nothing, an SpMV with the result (solver chaining), or the residual
 * (smoother fusion). Sequential and blocked paths share the per-row kernels
 * and are bitwise identical.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mpk/csr.hpp"
#include "mpk/execute.hpp"
#include "mpk/jacobi.hpp"
#include "mpk/plan.hpp"
#include "mpk/vector_block.hpp"

namespace mpk {

enum class SweepDirection { forward, backward };
enum class Gs2Terminal { none, apply_a, residual };

/// K-sweep two-stage Gauss-Seidel preconditioner/smoother.
struct Gs2Precon {
    DiagInfo diag;
    int gamma = 1;   ///< inner Jacobi-Richardson iterations per sweep
    int sweeps = 1;  ///< outer Gauss-Seidel sweeps (K)
    SweepDirection direction = SweepDirection::forward;
};

inline Gs2Precon gs2_setup(const CsrMatrix& a, int gamma, int sweeps = 1,
                           SweepDirection direction = SweepDirection::forward) {
    if (gamma < 0) throw std::invalid_argument("gs2_setup: gamma must be >= 0");
    if (sweeps < 1) throw std::invalid_argument("gs2_setup: sweeps must be >= 1");
    return {build_diag_info(a, "gs2_setup"), gamma, sweeps, direction};
}

namespace detail {

/// Stage 0 of a sweep: the scaled residual g0 = D^{-1} (v - A z) of the
/// incoming iterate. The correction g computed from it keeps the exact
/// solution a fixed point for any truncation gamma; with a zero initial
/// guess the accumulation short-circuits to D^{-1} v bitwise. When z_next
/// is non-null the gamma = 0 iterate update z_next = z_prev + g0 is fused.
inline void gs2_stage0_rows(const CsrMatrix& a, const double* d_inv, const double* v,
                            const double* z_prev, double* g0, double* z_next,
                            index_t row_s, index_t row_e) {
    for (index_t r = row_s; r < row_e; ++r) {
        double acc = 0.0;
        for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
            acc += a.values[k] * z_prev[a.col_idx[k]];
        const double g = d_inv[r] * (v[r] - acc);
        g0[r] = g;
        if (z_next) z_next[r] = z_prev[r] + g;
    }
}

/// Inner Jacobi-Richardson iteration: g_out = g0 - D^{-1} L g_prev forward,
/// g0 - D^{-1} U g_prev backward (rows are split at the diagonal position,
/// so the strict lower part is the prefix of the sorted row and the strict
/// upper part the suffix). When z_next is non-null this is the last inner
/// iteration and the iterate update z_next = z_prev + g_out is fused.
inline void gs2_inner_rows(const CsrMatrix& a, const index_t* diag_pos,
                           const double* d_inv, const double* g0, const double* g_prev,
                           double* g_out, bool forward, const double* z_prev,
                           double* z_next, index_t row_s, index_t row_e) {
    for (index_t r = row_s; r < row_e; ++r) {
        const index_t dp = diag_pos[r];
        const index_t ks = forward ? a.row_ptr[r] : dp + 1;
        const index_t ke = forward ? dp : a.row_ptr[r + 1];
        double acc = 0.0;
        for (index_t k = ks; k < ke; ++k) acc += a.values[k] * g_prev[a.col_idx[k]];
        const double g = g0[r] - d_inv[r] * acc;
        g_out[r] = g;
        if (z_next) z_next[r] = z_prev[r] + g;
    }
}

/// r = v - A z over the full (sorted) row, which is bitwise identical to
/// accumulating the split parts L + D + U in sequence.
inline void residual_rows(const CsrMatrix& a, const double* v, const double* z,
                          double* r_out, index_t row_s, index_t row_e) {
    for (index_t r = row_s; r < row_e; ++r) {
        double acc = 0.0;
        for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
            acc += a.values[k] * z[a.col_idx[k]];
        r_out[r] = v[r] - acc;
    }
}

/// Stage dispatcher for a K-sweep GS2 chain. Power p is the outer sweep,
/// sub-power j the unrolled stage. The iterate history lives in per-sweep
/// slices of `z` (slice 0 holds the initial guess) so that a stage may read
/// the previous sweep's iterate at neighbouring rows while the current
/// sweep's is being written; the g workspace is shared across sweeps, which
/// is safe because a g bank is only read before the next sweep's stage of
/// the same index can run on any adjacent row group.
struct Gs2Chain {
    const CsrMatrix* a = nullptr;
    const Gs2Precon* p = nullptr;
    const double* v = nullptr;
    Gs2Terminal terminal = Gs2Terminal::none;
    VectorBlock* z = nullptr;  // sweeps + 1 slices
    VectorBlock* g = nullptr;  // gamma + 1 slices
    double* out = nullptr;     // terminal target, used on the last sweep only

    void operator()(index_t row_s, index_t row_e, int power, int j) const {
        const int gamma = p->gamma;
        const bool fwd = p->direction == SweepDirection::forward;
        const double* d_inv = p->diag.inv.data();
        const index_t* dp = p->diag.pos.data();
        const double* z_prev = z->slice(static_cast<std::size_t>(power) - 1);
        double* z_next = z->slice(static_cast<std::size_t>(power));
        if (j == 0) {
            gs2_stage0_rows(*a, d_inv, v, z_prev, g->slice(0),
                            gamma == 0 ? z_next : nullptr, row_s, row_e);
        } else if (j <= gamma) {
            gs2_inner_rows(*a, dp, d_inv, g->slice(0),
                           g->slice(static_cast<std::size_t>(j) - 1),
                           g->slice(static_cast<std::size_t>(j)), fwd, z_prev,
                           j == gamma ? z_next : nullptr, row_s, row_e);
        } else if (power == p->sweeps && terminal != Gs2Terminal::none) {
            if (terminal == Gs2Terminal::apply_a)
                spmv_rows(*a, z_next, out, row_s, row_e);
            else
                residual_rows(*a, v, z_next, out, row_s, row_e);
        }
    }
};

/// Shared driver: runs the chain sequentially (stage loop, rows in parallel)
/// or through the wavefront executor when a plan is given. z_io carries the
/// initial guess in and the smoothed iterate out.
inline void run_gs2_chain(const Gs2Precon& p, const CsrMatrix& a,
                          const std::vector<double>& v, std::vector<double>& z_io,
                          Gs2Terminal terminal, double* out, const ExecutionPlan* plan,
                          int threads) {
    const std::size_t n = a.n_rows;
    if (a.n_rows != a.n_cols) throw std::invalid_argument("gs2: matrix must be square");
    if (v.size() != n || z_io.size() != n)
        throw std::invalid_argument("gs2: size mismatch");
    VectorBlock z(n, static_cast<std::size_t>(p.sweeps) + 1);
    std::copy(z_io.begin(), z_io.end(), z.slice(0));
    VectorBlock g(n, static_cast<std::size_t>(p.gamma) + 1);
    Gs2Chain chain{&a, &p, v.data(), terminal, &z, &g, out};
    const int sub = p.gamma + 2;
    if (plan) {
        if (plan->n_rows != n)
            throw std::invalid_argument("gs2: plan does not match matrix");
        if (plan->sub_powers != sub)
            throw std::invalid_argument("gs2: plan sub_powers mismatch");
        execute(*plan, chain, threads, /*p_m=*/p.sweeps);
    } else {
        const int nt = resolve_threads(threads);
        for (int power = 1; power <= p.sweeps; ++power) {
            for (int j = 0; j < sub; ++j) {
#pragma omp parallel for schedule(static) num_threads(nt)
                for (std::size_t r = 0; r < n; ++r)
                    chain(static_cast<index_t>(r), static_cast<index_t>(r + 1), power,
                          j);
            }
        }
    }
    const double* zk = z.slice(static_cast<std::size_t>(p.sweeps));
    std::copy(zk, zk + n, z_io.begin());
}

}  // namespace detail

/// K-sweep GS2 smoothing of A z = v from the initial guess in z (in/out).
inline void gs2_smooth(const Gs2Precon& p, const CsrMatrix& a,
                       const std::vector<double>& v, std::vector<double>& z,
                       int threads = 0) {
    detail::run_gs2_chain(p, a, v, z, Gs2Terminal::none, nullptr, nullptr, threads);
}

/// Preconditioner application z = M^{-1} v (zero initial guess).
inline void gs2_apply(const Gs2Precon& p, const CsrMatrix& a,
                      const std::vector<double>& v, std::vector<double>& z,
                      int threads = 0) {
    z.assign(a.n_rows, 0.0);
    detail::run_gs2_chain(p, a, v, z, Gs2Terminal::none, nullptr, nullptr, threads);
}

/// Smoothing fused with the residual of the smoothed iterate: r = v - A z.
inline void gs2_smooth_residual(const Gs2Precon& p, const CsrMatrix& a,
                                const std::vector<double>& v, std::vector<double>& z,
                                std::vector<double>& r, int threads = 0) {
    r.resize(a.n_rows);
    detail::run_gs2_chain(p, a, v, z, Gs2Terminal::residual, r.data(), nullptr, threads);
}

/// Operator composition w = A (M^{-1} v) for solver chaining.
inline void gs2_op(const Gs2Precon& p, const CsrMatrix& a, const std::vector<double>& v,
                   std::vector<double>& y, int threads = 0) {
    std::vector<double> z(a.n_rows, 0.0);
    y.resize(a.n_rows);
    detail::run_gs2_chain(p, a, v, z, Gs2Terminal::apply_a, y.data(), nullptr, threads);
}

/// Cache-blocked twins on the level-permuted matrix; bitwise equal to the
/// sequential versions above. The plan needs sub_powers == gamma + 2 and a
/// power budget of at least `sweeps`.
inline void gs2_smooth_blocked(const Gs2Precon& p, const CsrMatrix& a_perm,
                               const ExecutionPlan& plan, const std::vector<double>& v,
                               std::vector<double>& z, int threads = 0) {
    detail::run_gs2_chain(p, a_perm, v, z, Gs2Terminal::none, nullptr, &plan, threads);
}

inline void gs2_apply_blocked(const Gs2Precon& p, const CsrMatrix& a_perm,
                              const ExecutionPlan& plan, const std::vector<double>& v,
                              std::vector<double>& z, int threads = 0) {
    z.assign(a_perm.n_rows, 0.0);
    detail::run_gs2_chain(p, a_perm, v, z, Gs2Terminal::none, nullptr, &plan, threads);
}

inline void gs2_smooth_residual_blocked(const Gs2Precon& p, const CsrMatrix& a_perm,
                                        const ExecutionPlan& plan,
                                        const std::vector<double>& v,
                                        std::vector<double>& z, std::vector<double>& r,
                                        int threads = 0) {
    r.resize(a_perm.n_rows);
    detail::run_gs2_chain(p, a_perm, v, z, Gs2Terminal::residual, r.data(), &plan,
                          threads);
}

inline void gs2_op_blocked(const Gs2Precon& p, const CsrMatrix& a_perm,
                           const ExecutionPlan& plan, const std::vector<double>& v,
                           std::vector<double>& y, int threads = 0) {
    std::vector<double> z(a_perm.n_rows, 0.0);
    y.resize(a_perm.n_rows);
    detail::run_gs2_chain(p, a_perm, v, z, Gs2Terminal::apply_a, y.data(), &plan,
                          threads);
}

}  // namespace mpk
