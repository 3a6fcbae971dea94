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
 * s-step GMRES: per restart cycle the Krylov basis grows in blocks of s
 * vectors generated by a shifted (Newton) power recurrence on the composed
 * operator A M^{-1}, then the whole block is orthogonalized at once (block
 * ICGS against the existing basis followed by TSQR). The Hessenberg columns
 * of the equivalent Arnoldi process are recovered algebraically from the
 * recurrence and the orthogonalization coefficients, so the least-squares
 * machinery, convergence logic, and reporting are shared with classical
 * GMRES; s = 1 reproduces it to rounding.
 *
 * The shifted basis recurrence fuses the preconditioner into the power
 * stages exactly like the operator chains used elsewhere: Jacobi and
 * two-stage Gauss-Seidel expand into sub-power stages executable either
 * sequentially or through the cache-blocked wavefront executor with bitwise
 * identical results. Preconditioners whose application is not a fixed row
 * sweep chain (polynomial, Chebyshev, AMG) cannot be fused this way and are
 * rejected.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mpk/dense.hpp"
#include "mpk/gmres.hpp"
#include "mpk/gs2.hpp"
#include "mpk/jacobi.hpp"
#include "mpk/leja.hpp"
#include "mpk/mpk.hpp"
#include "mpk/ortho.hpp"
#include "mpk/plan.hpp"
#include "mpk/precon.hpp"
#include "mpk/vector_block.hpp"

namespace mpk {

namespace detail {

/// Shifted terminal stage shared by the fused s-step chains:
/// w = A z - a src (+ b2 src2 for the second member of a conjugate pair).
/// The SpMV reads the preconditioned iterate z while the shift acts on the
/// previous basis vector, matching w_p = (A M^{-1} - a_p) w_{p-1}.
inline void shifted_terminal_rows(const CsrMatrix& a, const double* z,
                                  const double* src, const double* src2,
                                  double shift_a, double b2, double* dst,
                                  index_t row_s, index_t row_e) {
    if (b2 == 0.0) {
        for (index_t r = row_s; r < row_e; ++r) {
            double acc = 0.0;
            for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
                acc += a.values[k] * z[a.col_idx[k]];
            dst[r] = acc - shift_a * src[r];
        }
    } else {
        for (index_t r = row_s; r < row_e; ++r) {
            double acc = 0.0;
            for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
                acc += a.values[k] * z[a.col_idx[k]];
            dst[r] = acc - shift_a * src[r] + b2 * src2[r];
        }
    }
}

/// Single-sweep Jacobi fused with the shift: w = A (D^{-1} src) - a src
/// (+ b2 src2), the one-stage form of the s-step Jacobi chain.
inline void scaled_shifted_spmv_rows(const CsrMatrix& a, const double* d_inv,
                                     const double* src, const double* src2,
                                     double shift_a, double b2, double* dst,
                                     index_t row_s, index_t row_e) {
    if (b2 == 0.0) {
        for (index_t r = row_s; r < row_e; ++r) {
            double acc = 0.0;
            for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
                const index_t c = a.col_idx[k];
                acc += a.values[k] * (d_inv[c] * src[c]);
            }
            dst[r] = acc - shift_a * src[r];
        }
    } else {
        for (index_t r = row_s; r < row_e; ++r) {
            double acc = 0.0;
            for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
                const index_t c = a.col_idx[k];
                acc += a.values[k] * (d_inv[c] * src[c]);
            }
            dst[r] = acc - shift_a * src[r] + b2 * src2[r];
        }
    }
}

/// Stage chain for the Jacobi-fused shifted power recurrence
/// w_p = (A M^{-1} - a_p) w_{p-1} + b2_p w_{p-2}. Each power re-runs the
/// zero-guess Jacobi sweeps on w_{p-1} (the z workspace is reused across
/// powers: a slice is rewritten a full power after its last neighbouring
/// read, which the wavefront diagonal ordering keeps safe) and finishes
/// with the shifted SpMV terminal.
struct SstepJacobiChain {
    const CsrMatrix* a = nullptr;
    const JacobiPrecon* p = nullptr;
    const std::vector<Complex>* shifts = nullptr;
    VectorBlock* w = nullptr;  // powers + 1 slices
    VectorBlock* z = nullptr;  // sweeps slices; unused for sweeps == 1

    void operator()(index_t row_s, index_t row_e, int power, int j) const {
        const int k = p->sweeps;
        const double* d_inv = p->diag.inv.data();
        const double sa = (*shifts)[static_cast<std::size_t>(power) - 1].real();
        const double bi = (*shifts)[static_cast<std::size_t>(power) - 1].imag();
        const double b2 = bi < 0.0 ? bi * bi : 0.0;
        const double* src = w->slice(static_cast<std::size_t>(power) - 1);
        const double* src2 =
            power >= 2 ? w->slice(static_cast<std::size_t>(power) - 2) : nullptr;
        double* dst = w->slice(static_cast<std::size_t>(power));
        if (k == 1) {
            scaled_shifted_spmv_rows(*a, d_inv, src, src2, sa, b2, dst, row_s, row_e);
            return;
        }
        if (j == 0) {
            diag_scale_rows(d_inv, src, z->slice(0), row_s, row_e);
        } else if (j < k) {
            jacobi_sweep_rows(*a, p->diag.pos.data(), d_inv, src, z->slice(j - 1),
                              z->slice(j), row_s, row_e);
        } else {
            shifted_terminal_rows(*a, z->slice(static_cast<std::size_t>(k) - 1), src,
                                  src2, sa, b2, dst, row_s, row_e);
        }
    }
};

/// Stage chain for the GS2-fused shifted power recurrence. Every basis power
/// applies the full K-sweep zero-guess GS2 to w_{p-1} (plan power
/// q = (p-1) K + sweep, sub-stages as in the plain GS2 chain) and the last
/// sweep's terminal stage emits the shifted result. The z and g workspaces
/// are reused across powers; slice 0 of z is the permanent zero guess.
struct SstepGs2Chain {
    const CsrMatrix* a = nullptr;
    const Gs2Precon* p = nullptr;
    const std::vector<Complex>* shifts = nullptr;
    VectorBlock* w = nullptr;  // powers + 1 slices
    VectorBlock* z = nullptr;  // sweeps + 1 slices, slice 0 all zero
    VectorBlock* g = nullptr;  // gamma + 1 slices

    void operator()(index_t row_s, index_t row_e, int q, int j) const {
        const int K = p->sweeps;
        const int gamma = p->gamma;
        const int power = (q - 1) / K + 1;
        const int sweep = (q - 1) % K + 1;
        const bool fwd = p->direction == SweepDirection::forward;
        const double* d_inv = p->diag.inv.data();
        const index_t* dp = p->diag.pos.data();
        const double* v = w->slice(static_cast<std::size_t>(power) - 1);
        const double* z_prev = z->slice(static_cast<std::size_t>(sweep) - 1);
        double* z_next = z->slice(static_cast<std::size_t>(sweep));
        if (j == 0) {
            gs2_stage0_rows(*a, d_inv, v, z_prev, g->slice(0),
                            gamma == 0 ? z_next : nullptr, row_s, row_e);
        } else if (j <= gamma) {
            gs2_inner_rows(*a, dp, d_inv, g->slice(0),
                           g->slice(static_cast<std::size_t>(j) - 1),
                           g->slice(static_cast<std::size_t>(j)), fwd, z_prev,
                           j == gamma ? z_next : nullptr, row_s, row_e);
        } else if (sweep == K) {
            const double sa = (*shifts)[static_cast<std::size_t>(power) - 1].real();
            const double bi = (*shifts)[static_cast<std::size_t>(power) - 1].imag();
            const double b2 = bi < 0.0 ? bi * bi : 0.0;
            const double* src2 =
                power >= 2 ? w->slice(static_cast<std::size_t>(power) - 2) : nullptr;
            shifted_terminal_rows(*a, z->slice(static_cast<std::size_t>(K)), v, src2,
                                  sa, b2, w->slice(static_cast<std::size_t>(power)),
                                  row_s, row_e);
        }
    }
};

/// Runs a stage chain sequentially: plan powers in order, sub-stages in
/// order, rows in parallel — the ordered twin of the wavefront executor.
template <typename Chain>
inline void run_chain_sequential(const Chain& chain, int powers, int sub,
                                 std::size_t n, int threads) {
    const int nt = resolve_threads(threads);
    for (int power = 1; power <= powers; ++power) {
        for (int j = 0; j < sub; ++j) {
#pragma omp parallel for schedule(static) num_threads(nt)
            for (std::size_t r = 0; r < n; ++r)
                chain(static_cast<index_t>(r), static_cast<index_t>(r + 1), power, j);
        }
    }
}

}  // namespace detail

/// Sub-power stage count of the fused s-step basis chain for this
/// preconditioner (the plan's sub_powers when cache blocking is used).
inline int sstep_sub_powers(const Precon& p) {
    switch (p.kind) {
        case PreconKind::none:
            return 1;
        case PreconKind::jacobi:
            return detail::JacobiOpChain::stages(p.jacobi.sweeps);
        case PreconKind::gs2:
            return p.gs2.gamma + 2;
        default:
            throw std::invalid_argument(
                "sstep_sub_powers: preconditioner cannot be fused into the s-step "
                "basis chain");
    }
}

/// Plan power budget needed to generate one s-vector basis block.
inline int sstep_plan_powers(const Precon& p, int s) {
    if (s < 1) throw std::invalid_argument("sstep_plan_powers: s must be >= 1");
    switch (p.kind) {
        case PreconKind::none:
        case PreconKind::jacobi:
            return s;
        case PreconKind::gs2:
            return s * p.gs2.sweeps;
        default:
            throw std::invalid_argument(
                "sstep_plan_powers: preconditioner cannot be fused into the s-step "
                "basis chain");
    }
}

/// Newton shifts for the s-step basis: a short Arnoldi warm-up on the
/// composed operator A M^{-1} (seeded by `seed`, `warmup` steps or until
/// breakdown) yields Ritz values, which are Leja-ordered and then cycled
/// into `s` shifts. Complex conjugate pairs stay adjacent with the positive
/// imaginary member first; a pair that does not fit in the remaining slots
/// is skipped in favour of the next real value (or collapsed to its real
/// part when no real value exists). `steps_out`, when given, receives the
/// number of operator applications spent on the warm-up.
inline std::vector<Complex> compute_newton_shifts(const CsrMatrix& a,
                                                  const Precon& precon, int s,
                                                  int warmup,
                                                  const std::vector<double>& seed,
                                                  int threads = 0,
                                                  int* steps_out = nullptr) {
    if (s < 1) throw std::invalid_argument("compute_newton_shifts: s must be >= 1");
    if (warmup < 1)
        throw std::invalid_argument("compute_newton_shifts: warmup must be >= 1");
    const std::size_t n = a.n_rows;
    if (seed.size() != n)
        throw std::invalid_argument("compute_newton_shifts: seed size mismatch");

    const std::size_t w = static_cast<std::size_t>(warmup);
    std::vector<double> q((w + 1) * n);
    std::vector<double> h((w + 1) * w, 0.0);

    const double snorm = nrm2(seed);
    if (snorm > 0.0) {
        for (std::size_t i = 0; i < n; ++i) q[i] = seed[i] / snorm;
    } else {
        const double u = 1.0 / std::sqrt(static_cast<double>(n));
        std::fill(q.begin(), q.begin() + n, u);
    }

    std::vector<double> vin(n), wv;
    std::size_t square = w;
    int steps = 0;
    for (std::size_t i = 0; i < w; ++i) {
        const double* qi = q.data() + i * n;
        std::copy(qi, qi + n, vin.begin());
        precon_op(precon, a, vin, wv, threads);
        ++steps;
        const std::vector<double> coeff =
            icgs_block_orthogonalize(q.data(), n, i + 1, wv.data(), 1, 2, threads);
        double* hcol = h.data() + i * (w + 1);
        std::copy(coeff.begin(), coeff.end(), hcol);
        const double hnext = nrm2(wv);
        hcol[i + 1] = hnext;
        double colsq = hnext * hnext;
        for (std::size_t k = 0; k <= i; ++k) colsq += hcol[k] * hcol[k];
        if (hnext <= 1e-14 * std::sqrt(colsq)) {
            square = i + 1;
            break;
        }
        double* qn = q.data() + (i + 1) * n;
        for (std::size_t r = 0; r < n; ++r) qn[r] = wv[r] / hnext;
    }
    if (steps_out) *steps_out = steps;

    Eigen::MatrixXd hs(square, square);
    for (std::size_t c = 0; c < square; ++c)
        for (std::size_t r = 0; r < square; ++r)
            hs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                h[c * (w + 1) + r];
    std::vector<Complex> ritz = dense_eigenvalues(hs);
    // Snap numerically-real Ritz values onto the real axis (both members of
    // a conjugate pair share |imag|, so pair matching is preserved).
    for (Complex& z : ritz)
        if (std::abs(z.imag()) <= 1e-12 * (1.0 + std::abs(z))) z = Complex(z.real(), 0.0);
    const std::vector<Complex> ordered = modified_leja(ritz);

    std::vector<Complex> shifts;
    shifts.reserve(static_cast<std::size_t>(s));
    if (ordered.empty()) {
        shifts.assign(static_cast<std::size_t>(s), Complex(0.0, 0.0));
        return shifts;
    }
    std::size_t idx = 0;
    std::size_t skipped = 0;
    while (shifts.size() < static_cast<std::size_t>(s)) {
        const Complex c = ordered[idx % ordered.size()];
        if (c.imag() == 0.0) {
            shifts.push_back(c);
            idx += 1;
            skipped = 0;
        } else if (static_cast<std::size_t>(s) - shifts.size() >= 2) {
            const double im = std::abs(c.imag());
            shifts.emplace_back(c.real(), im);
            shifts.emplace_back(c.real(), -im);
            idx += 2;
            skipped = 0;
        } else {
            // One slot left but the next value is a pair: look for a real
            // value; if a full pass finds none, fall back to the real part.
            idx += 2;
            skipped += 2;
            if (skipped > ordered.size()) shifts.emplace_back(c.real(), 0.0);
        }
    }
    return shifts;
}

namespace detail {

/// Generates one basis block: slice 0 of `w` holds the start vector on
/// entry; slices 1..shifts.size() receive the shifted powers, fused with
/// the preconditioner, sequentially or cache-blocked via `plan`.
inline void sstep_generate_block(const Precon& precon, const CsrMatrix& a,
                                 const std::vector<Complex>& shifts, VectorBlock& w,
                                 VectorBlock& z, VectorBlock& g,
                                 const ExecutionPlan* plan, int threads) {
    const std::size_t n = a.n_rows;
    const int sj = static_cast<int>(shifts.size());
    check_shift_chain(shifts, "sstep_gmres");
    switch (precon.kind) {
        case PreconKind::none: {
            std::vector<double> x0(w.slice(0), w.slice(0) + n);
            if (plan)
                mpk_shifted(*plan, a, x0, shifts, w, threads);
            else
                baseline_mpk_shifted(a, x0, shifts, w, threads);
            return;
        }
        case PreconKind::jacobi: {
            SstepJacobiChain chain{&a, &precon.jacobi, &shifts, &w,
                                   precon.jacobi.sweeps > 1 ? &z : nullptr};
            const int sub = JacobiOpChain::stages(precon.jacobi.sweeps);
            if (plan) {
                if (plan->sub_powers != sub)
                    throw std::invalid_argument("sstep_gmres: plan sub_powers mismatch");
                execute(*plan, chain, threads, sj);
            } else {
                run_chain_sequential(chain, sj, sub, n, threads);
            }
            return;
        }
        case PreconKind::gs2: {
            SstepGs2Chain chain{&a, &precon.gs2, &shifts, &w, &z, &g};
            const int sub = precon.gs2.gamma + 2;
            if (plan) {
                if (plan->sub_powers != sub)
                    throw std::invalid_argument("sstep_gmres: plan sub_powers mismatch");
                execute(*plan, chain, threads, sj * precon.gs2.sweeps);
            } else {
                run_chain_sequential(chain, sj * precon.gs2.sweeps, sub, n, threads);
            }
            return;
        }
        default:
            throw std::invalid_argument(
                "sstep_gmres: preconditioner cannot be fused into the s-step basis "
                "chain");
    }
}

}  // namespace detail

/// s-step GMRES with right preconditioning for A x = b. Interface, report
/// conventions, and restart/convergence logic match gmres(); cfg.s sets the
/// block size (s = 1 reproduces classical GMRES to rounding). Only
/// fuseable preconditioners (none, Jacobi, GS2) are accepted. When `plan`
/// is non-null the basis blocks are generated through the cache-blocked
/// executor; the plan must carry sub_powers == sstep_sub_powers(precon) and
/// a power budget of at least sstep_plan_powers(precon, cfg.s).
inline SolveReport sstep_gmres(const CsrMatrix& a, const std::vector<double>& b,
                               std::vector<double>& x, const SolverConfig& cfg,
                               const Precon& precon,
                               const ExecutionPlan* plan = nullptr, int threads = 0,
                               detail::CycleCapture* capture = nullptr) {
    detail::check_solver_inputs(a, b, x, cfg, "sstep_gmres");
    if (precon.kind != PreconKind::none && precon.kind != PreconKind::jacobi &&
        precon.kind != PreconKind::gs2)
        throw std::invalid_argument(
            "sstep_gmres: preconditioner cannot be fused into the s-step basis chain");
    const std::size_t n = a.n_rows;
    const int m = cfg.m;
    const int s = cfg.s;
    const std::size_t ld = static_cast<std::size_t>(m) + 1;
    if (plan) {
        if (plan->n_rows != n)
            throw std::invalid_argument("sstep_gmres: plan does not match matrix");
        if (plan->p_m < sstep_plan_powers(precon, s))
            throw std::invalid_argument("sstep_gmres: plan power budget too small");
    }

    SolveReport rep;
    rep.config = cfg;
    const detail::Stopwatch total;

    const double bnorm = nrm2(b);
    const double denom = bnorm > 0.0 ? bnorm : 1.0;
    const double op_cost = precon_op_cost(precon);

    bool x_zero = true;
    for (double v : x)
        if (v != 0.0) {
            x_zero = false;
            break;
        }

    std::vector<double> r;
    double rnorm;
    if (x_zero) {
        r = b;
        rnorm = bnorm;
    } else {
        const detail::Stopwatch sw;
        rnorm = detail::true_residual(a, b, x, r, threads);
        rep.timings.mpk += sw.stop();
        rep.effective_spmvs += 1.0;
    }
    rep.final_relres = rnorm / denom;
    rep.residual_history.push_back(rep.final_relres);
    if (!std::isfinite(rep.final_relres)) {
        rep.status = SolveStatus::diverged;
        rep.timings.misc = std::max(0.0, total.stop() - rep.timings.mpk);
        return rep;
    }
    if (rep.final_relres <= cfg.tol) {
        rep.converged = true;
        rep.status = SolveStatus::converged;
        rep.timings.misc = std::max(0.0, total.stop() - rep.timings.mpk);
        return rep;
    }

    int warmup_steps = 0;
    const std::vector<Complex> shifts = compute_newton_shifts(
        a, precon, s, std::min(2 * s, m), b, threads, &warmup_steps);
    rep.effective_spmvs += warmup_steps * op_cost;

    std::vector<double> q(ld * n);
    std::vector<double> h(ld * m, 0.0);
    std::vector<double> hraw(ld * m, 0.0);
    std::vector<double> g(ld, 0.0);
    std::vector<Givens> rot(static_cast<std::size_t>(m));

    VectorBlock wblk(n, static_cast<std::size_t>(s) + 1);
    const bool need_z = (precon.kind == PreconKind::jacobi && precon.jacobi.sweeps > 1) ||
                        precon.kind == PreconKind::gs2;
    VectorBlock zblk(need_z ? n : 0,
                     precon.kind == PreconKind::gs2
                         ? static_cast<std::size_t>(precon.gs2.sweeps) + 1
                         : (need_z ? static_cast<std::size_t>(precon.jacobi.sweeps) : 0));
    VectorBlock gblk(precon.kind == PreconKind::gs2 ? n : 0,
                     precon.kind == PreconKind::gs2
                         ? static_cast<std::size_t>(precon.gs2.gamma) + 1
                         : 0);
    std::vector<double> pristine(static_cast<std::size_t>(s) * n);
    std::vector<double> rfac(static_cast<std::size_t>(s) * s);

    bool done = false;
    bool first_cycle = true;
    while (!done && rep.iterations < cfg.max_iters) {
        if (!first_cycle) ++rep.restarts;
        first_cycle = false;

        const double beta = rnorm;
        for (std::size_t i = 0; i < n; ++i) q[i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;
        int jbase = 0;
        int cols = 0;
        bool cycle_stop = false;

        while (jbase < m && rep.iterations < cfg.max_iters && !cycle_stop) {
            int sj = std::min({s, m - jbase, cfg.max_iters - rep.iterations});
            std::vector<Complex> block_shifts(shifts.begin(), shifts.begin() + sj);
            // A conjugate pair cut by the block end degrades to its real part.
            if (block_shifts.back().imag() > 0.0)
                block_shifts.back() = Complex(block_shifts.back().real(), 0.0);

            const double* qj = q.data() + static_cast<std::size_t>(jbase) * n;
            std::copy(qj, qj + n, wblk.slice(0));
            {
                const detail::Stopwatch sw;
                detail::sstep_generate_block(precon, a, block_shifts, wblk, zblk, gblk,
                                             plan, threads);
                rep.timings.mpk += sw.stop();
            }
            rep.effective_spmvs += sj * op_cost;

            std::copy(wblk.slice(1), wblk.slice(1) + static_cast<std::size_t>(sj) * n,
                      pristine.begin());

            // Block orthogonalization with one shrink retry on rank
            // deficiency: the leading full-rank columns of the pristine
            // block are re-orthogonalized on their own.
            std::vector<double> coeff;
            int deficient_at = -1;
            bool happy = false;
            for (int attempt = 0;; ++attempt) {
                const detail::Stopwatch sw;
                coeff = icgs_block_orthogonalize(
                    q.data(), n, static_cast<std::size_t>(jbase) + 1, wblk.slice(1),
                    static_cast<std::size_t>(sj), cfg.ortho_sweeps + 1, threads);
                tsqr(wblk.slice(1), n, static_cast<std::size_t>(sj), rfac.data(), 4096,
                     threads);
                rep.timings.ortho += sw.stop();

                double fsq = 0.0;
                for (std::size_t i = 0; i < static_cast<std::size_t>(sj) * n; ++i)
                    fsq += pristine[i] * pristine[i];
                const double thresh = 1e-14 * std::sqrt(fsq);
                deficient_at = -1;
                for (int d = 0; d < sj; ++d) {
                    if (std::abs(rfac[static_cast<std::size_t>(d) * sj + d]) <= thresh) {
                        deficient_at = d;
                        break;
                    }
                }
                if (deficient_at < 0) break;  // full rank
                if (deficient_at == 0) {
                    // The first new direction already lies in the basis: fold
                    // this single column like a classical happy breakdown.
                    happy = true;
                    break;
                }
                if (attempt == 1) break;  // second failure: give up
                sj = deficient_at;
                block_shifts.resize(static_cast<std::size_t>(sj));
                std::copy(pristine.begin(),
                          pristine.begin() + static_cast<std::size_t>(sj) * n,
                          wblk.slice(1));
            }
            if (deficient_at > 0) {
                rep.status = SolveStatus::breakdown;
                done = true;
                break;
            }

            if (happy) {
                const int jc = jbase;
                double* rawcol = hraw.data() + static_cast<std::size_t>(jc) * ld;
                for (int i = 0; i <= jbase; ++i) rawcol[i] = coeff[static_cast<std::size_t>(i)];
                rawcol[jbase] += block_shifts[0].real();
                rawcol[jc + 1] = rfac[0];
                double* hcol = h.data() + static_cast<std::size_t>(jc) * ld;
                std::copy(rawcol, rawcol + static_cast<std::size_t>(jc) + 2, hcol);
                for (int i = 0; i < jc; ++i)
                    apply_givens(rot[static_cast<std::size_t>(i)], hcol[i], hcol[i + 1]);
                rot[static_cast<std::size_t>(jc)] = make_givens(hcol[jc], hcol[jc + 1]);
                apply_givens(rot[static_cast<std::size_t>(jc)], hcol[jc], hcol[jc + 1]);
                apply_givens(rot[static_cast<std::size_t>(jc)], g[jc], g[jc + 1]);
                ++rep.iterations;
                cols = jc + 1;
                const double est = std::abs(g[jc + 1]) / denom;
                rep.residual_history.push_back(est);
                if (!std::isfinite(est)) {
                    rep.status = SolveStatus::diverged;
                    done = true;
                }
                cycle_stop = true;
                break;
            }

            // Accept the block: new orthonormal columns into the basis.
            std::copy(wblk.slice(1), wblk.slice(1) + static_cast<std::size_t>(sj) * n,
                      q.begin() + (static_cast<std::size_t>(jbase) + 1) * n);

            // Recover the Arnoldi Hessenberg columns from the recurrence.
            // W = [w_0..w_sj] in the extended basis: T has e_{jbase} as
            // column 0 and [coeff; R] columns for the new powers; the
            // recurrence gives A_op W(:,0..sj-1) = W Bbar, and eliminating
            // W in favour of the basis columns yields the fold below.
            {
                const Eigen::Index ej = static_cast<Eigen::Index>(jbase);
                const Eigen::Index es = static_cast<Eigen::Index>(sj);
                Eigen::Map<const Eigen::MatrixXd> cmat(coeff.data(), ej + 1, es);
                Eigen::Map<const Eigen::MatrixXd, Eigen::Unaligned,
                           Eigen::OuterStride<>>
                    rmat(rfac.data(), es, es,
                         Eigen::OuterStride<>(static_cast<Eigen::Index>(sj)));

                Eigen::MatrixXd t = Eigen::MatrixXd::Zero(ej + 1 + es, es + 1);
                t(ej, 0) = 1.0;
                t.block(0, 1, ej + 1, es) = cmat;
                t.block(ej + 1, 1, es, es) = rmat;

                Eigen::MatrixXd bbar = Eigen::MatrixXd::Zero(es + 1, es);
                for (int c = 0; c < sj; ++c) {
                    const Complex sc = block_shifts[static_cast<std::size_t>(c)];
                    bbar(c, c) = sc.real();
                    bbar(c + 1, c) = 1.0;
                    const double bi = sc.imag();
                    if (bi < 0.0 && c >= 1) bbar(c - 1, c) = -bi * bi;
                }

                // S: rows jbase..jbase+sj of T; its leading sj x sj block is
                // upper triangular with diagonal (1, R00, ..) and is all the
                // fold needs, because column t of S^{-1} has no component on
                // the unknown power w_sj for t < sj.
                const Eigen::MatrixXd s_lead =
                    t.block(ej, 0, es, es).triangularView<Eigen::Upper>();
                const Eigen::MatrixXd sinv = s_lead.triangularView<Eigen::Upper>().solve(
                    Eigen::MatrixXd::Identity(es, es));

                const Eigen::MatrixXd gmat = t * bbar;           // coords of A_op w_c
                Eigen::MatrixXd hnew = gmat.leftCols(es) * sinv; // (jbase+1+sj) x sj
                if (jbase > 0) {
                    const Eigen::MatrixXd corr =
                        t.topRows(ej).leftCols(es) * sinv;  // (jbase x sj)
                    Eigen::Map<const Eigen::MatrixXd, Eigen::Unaligned,
                               Eigen::OuterStride<>>
                        hold(hraw.data(), ej + 1, ej,
                             Eigen::OuterStride<>(static_cast<Eigen::Index>(ld)));
                    hnew.topRows(ej + 1) -= hold * corr;
                }
                for (int tcol = 0; tcol < sj; ++tcol) {
                    const int jc = jbase + tcol;
                    double* rawcol = hraw.data() + static_cast<std::size_t>(jc) * ld;
                    for (int i = 0; i <= jc + 1; ++i)
                        rawcol[i] = hnew(i, tcol);
                }
            }

            // Per-column least-squares update and residual estimates.
            for (int tcol = 0; tcol < sj && !done; ++tcol) {
                const int jc = jbase + tcol;
                double* hcol = h.data() + static_cast<std::size_t>(jc) * ld;
                const double* rawcol = hraw.data() + static_cast<std::size_t>(jc) * ld;
                std::copy(rawcol, rawcol + static_cast<std::size_t>(jc) + 2, hcol);
                for (int i = 0; i < jc; ++i)
                    apply_givens(rot[static_cast<std::size_t>(i)], hcol[i], hcol[i + 1]);
                rot[static_cast<std::size_t>(jc)] = make_givens(hcol[jc], hcol[jc + 1]);
                apply_givens(rot[static_cast<std::size_t>(jc)], hcol[jc], hcol[jc + 1]);
                apply_givens(rot[static_cast<std::size_t>(jc)], g[jc], g[jc + 1]);
                ++rep.iterations;
                cols = jc + 1;
                const double est = std::abs(g[jc + 1]) / denom;
                rep.residual_history.push_back(est);
                if (!std::isfinite(est)) {
                    rep.status = SolveStatus::diverged;
                    done = true;
                    break;
                }
                if (est <= cfg.tol) cycle_stop = true;  // checked once per block
            }
            jbase += sj;
        }

        if (rep.status == SolveStatus::diverged) break;
        if (cols == 0) break;

        std::vector<double> y(g.begin(), g.begin() + cols);
        solve_upper(h.data(), static_cast<std::size_t>(cols), ld, y.data());
        rep.effective_spmvs += detail::apply_correction(
            precon, a, q.data(), n, cols, y.data(), x, threads, rep.timings);

        {
            const detail::Stopwatch sw;
            rnorm = detail::true_residual(a, b, x, r, threads);
            rep.timings.mpk += sw.stop();
        }
        rep.effective_spmvs += 1.0;
        rep.final_relres = rnorm / denom;
        if (!std::isfinite(rep.final_relres)) {
            rep.status = SolveStatus::diverged;
            done = true;
        } else if (rep.final_relres <= cfg.tol) {
            rep.converged = true;
            rep.status = SolveStatus::converged;
            done = true;
        }

        if (capture) {
            capture->rows = n;
            capture->cols = cols;
            capture->ld = static_cast<int>(ld);
            capture->q.assign(q.begin(),
                              q.begin() + (static_cast<std::size_t>(cols) + 1) * n);
            capture->h.assign(hraw.begin(),
                              hraw.begin() + static_cast<std::size_t>(cols) * ld);
        }
        std::fill(h.begin(), h.begin() + static_cast<std::size_t>(cols) * ld, 0.0);
    }

    rep.timings.misc =
        std::max(0.0, total.stop() - rep.timings.mpk - rep.timings.ortho);
    return rep;
}

}  // namespace mpk
