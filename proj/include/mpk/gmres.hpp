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
 * Restarted GMRES with right preconditioning: the Krylov space is built on
 * the composed operator w = A M^{-1} v, the least-squares problem is solved
 * incrementally with Givens rotations, and the update x += M^{-1} (Q y) is
 * applied at the end of each restart cycle. Convergence is decided on the
 * true residual ||b - A x|| / ||b||; the per-iteration history records the
 * Givens residual estimates (plus the initial true residual). Passing an
 * execution plan routes every operator application through the cache-blocked
 * kernels, which are bitwise equal to the sequential ones, so both modes
 * produce identical iterates.
 */

#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpk/csr.hpp"
#include "mpk/dense.hpp"
#include "mpk/ortho.hpp"
#include "mpk/plan.hpp"
#include "mpk/precon.hpp"
#include "mpk/threading.hpp"
#include "mpk/vector_block.hpp"

namespace mpk {

/// Cache-blocking knobs carried by the solver configuration. The solver
/// itself only consumes a prebuilt plan; these fields let the front end
/// decide whether and how to build one.
struct MpkConfig {
    bool enabled = false;
    std::size_t cache_bytes = 0;  ///< 0: front end picks a default
    int p_opt = 0;                ///< 0: tune automatically
};

struct SolverConfig {
    int m = 50;            ///< restart length
    int s = 1;             ///< step size (1 = classical GMRES)
    double tol = 1e-8;     ///< relative residual target
    int max_iters = 1000;  ///< iteration cap across restarts
    /// Iterated-classical-Gram-Schmidt sweeps per orthogonalization. One
    /// sweep means the initial projection plus one re-orthogonalization
    /// pass (the classical "twice is enough" iteration), which keeps the
    /// assembled basis orthonormal to ~1e-14; raw single-pass CGS would not.
    int ortho_sweeps = 1;
    PreconSpec precon;
    MpkConfig mpk;
};

enum class SolveStatus { converged, max_iterations, diverged, breakdown };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged:
            return "converged";
        case SolveStatus::max_iterations:
            return "max_iterations";
        case SolveStatus::diverged:
            return "diverged";
        default:
            return "breakdown";
    }
}

struct SolveTimings {
    double mpk = 0.0;    ///< operator / preconditioner kernel seconds
    double ortho = 0.0;  ///< orthogonalization kernel seconds
    double misc = 0.0;   ///< everything else inside the solver
};

struct SolveReport {
    bool converged = false;
    SolveStatus status = SolveStatus::max_iterations;
    int iterations = 0;
    int restarts = 0;
    double final_relres = std::numeric_limits<double>::infinity();
    std::vector<double> residual_history;  ///< iterations + 1 entries
    double effective_spmvs = 0.0;
    SolveTimings timings;
    SolverConfig config;  ///< echo of the configuration that produced this
};

namespace detail {

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double stop() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    }
};

/// Final restart cycle of a solve, exposed for diagnostics: the orthonormal
/// basis (cols+1 columns of length rows, column-major) and the unrotated
/// Hessenberg columns (leading dimension ld, cols columns).
struct CycleCapture {
    std::size_t rows = 0;
    int cols = 0;
    int ld = 0;
    std::vector<double> q;
    std::vector<double> h;
};

inline void check_solver_inputs(const CsrMatrix& a, const std::vector<double>& b,
                                std::vector<double>& x, const SolverConfig& cfg,
                                const char* who) {
    if (a.n_rows != a.n_cols)
        throw std::invalid_argument(std::string(who) + ": matrix must be square");
    if (b.size() != a.n_rows)
        throw std::invalid_argument(std::string(who) + ": rhs size mismatch");
    if (x.empty()) x.assign(a.n_rows, 0.0);
    if (x.size() != a.n_rows)
        throw std::invalid_argument(std::string(who) + ": guess size mismatch");
    if (cfg.m < 1) throw std::invalid_argument(std::string(who) + ": m must be >= 1");
    if (cfg.s < 1 || cfg.s > cfg.m)
        throw std::invalid_argument(std::string(who) + ": s must satisfy 1 <= s <= m");
    if (!(cfg.tol > 0.0))
        throw std::invalid_argument(std::string(who) + ": tol must be > 0");
    if (cfg.max_iters < 1)
        throw std::invalid_argument(std::string(who) + ": max_iters must be >= 1");
    if (cfg.ortho_sweeps < 1)
        throw std::invalid_argument(std::string(who) + ": ortho_sweeps must be >= 1");
}

/// r = b - A x and its 2-norm.
inline double true_residual(const CsrMatrix& a, const std::vector<double>& b,
                            const std::vector<double>& x, std::vector<double>& r,
                            int threads) {
    r.resize(a.n_rows);
    spmv(a, x, r, threads);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    return nrm2(r);
}

/// x += M^{-1} (Q(:, 0..cols-1) y); returns the preconditioner apply cost.
inline double apply_correction(const Precon& precon, const CsrMatrix& a,
                               const double* q, std::size_t n, int cols,
                               const double* y, std::vector<double>& x, int threads,
                               SolveTimings& t) {
    std::vector<double> u(n, 0.0);
    for (int c = 0; c < cols; ++c) axpy(n, y[c], q + static_cast<std::size_t>(c) * n, u.data());
    const Stopwatch sw;
    std::vector<double> z;
    precon_apply(precon, a, u, z, threads);
    t.mpk += sw.stop();
    for (std::size_t i = 0; i < n; ++i) x[i] += z[i];
    return precon_apply_cost(precon);
}

}  // namespace detail

/// Right-preconditioned restarted GMRES for A x = b. `x` carries the initial
/// guess in and the solution out. When `plan` is non-null all operator
/// applications run cache-blocked on the (already permuted) matrix.
inline SolveReport gmres(const CsrMatrix& a, const std::vector<double>& b,
                         std::vector<double>& x, const SolverConfig& cfg,
                         const Precon& precon, const ExecutionPlan* plan = nullptr,
                         int threads = 0, detail::CycleCapture* capture = nullptr) {
    detail::check_solver_inputs(a, b, x, cfg, "gmres");
    const std::size_t n = a.n_rows;
    const int m = cfg.m;
    const std::size_t ld = static_cast<std::size_t>(m) + 1;

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

    std::vector<double> q(ld * n);        // basis, column-major
    std::vector<double> h(ld * m, 0.0);   // rotated Hessenberg (R factor)
    std::vector<double> hraw(ld * m, 0.0);  // unrotated columns, for capture
    std::vector<double> g(ld, 0.0);
    std::vector<Givens> rot(static_cast<std::size_t>(m));
    std::vector<double> vin(n), w;

    bool done = false;
    bool first_cycle = true;
    while (!done && rep.iterations < cfg.max_iters) {
        if (!first_cycle) ++rep.restarts;
        first_cycle = false;

        const double beta = rnorm;
        for (std::size_t i = 0; i < n; ++i) q[i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;
        int cols = 0;
        bool cycle_stop = false;

        for (int jcol = 0; jcol < m && rep.iterations < cfg.max_iters && !cycle_stop;
             ++jcol) {
            const double* qj = q.data() + static_cast<std::size_t>(jcol) * n;
            std::copy(qj, qj + n, vin.begin());
            {
                const detail::Stopwatch sw;
                if (plan)
                    precon_op_blocked(precon, a, *plan, vin, w, threads);
                else
                    precon_op(precon, a, vin, w, threads);
                rep.timings.mpk += sw.stop();
            }
            rep.effective_spmvs += op_cost;

            double* hcol = h.data() + static_cast<std::size_t>(jcol) * ld;
            {
                const detail::Stopwatch sw;
                const std::vector<double> coeff = icgs_block_orthogonalize(
                    q.data(), n, static_cast<std::size_t>(jcol) + 1, w.data(), 1,
                    cfg.ortho_sweeps + 1, threads);
                std::copy(coeff.begin(), coeff.end(), hcol);
                const double hnext = nrm2(w);
                hcol[jcol + 1] = hnext;
                double colsq = hnext * hnext;
                for (int i = 0; i <= jcol; ++i) colsq += hcol[i] * hcol[i];
                const bool happy = hnext <= 1e-14 * std::sqrt(colsq);
                if (!happy) {
                    double* qn = q.data() + (static_cast<std::size_t>(jcol) + 1) * n;
                    for (std::size_t i = 0; i < n; ++i) qn[i] = w[i] / hnext;
                }
                if (happy) cycle_stop = true;
                rep.timings.ortho += sw.stop();
            }
            std::copy(hcol, hcol + static_cast<std::size_t>(jcol) + 2,
                      hraw.data() + static_cast<std::size_t>(jcol) * ld);

            for (int i = 0; i < jcol; ++i)
                apply_givens(rot[static_cast<std::size_t>(i)], hcol[i], hcol[i + 1]);
            rot[static_cast<std::size_t>(jcol)] =
                make_givens(hcol[jcol], hcol[jcol + 1]);
            apply_givens(rot[static_cast<std::size_t>(jcol)], hcol[jcol],
                         hcol[jcol + 1]);
            apply_givens(rot[static_cast<std::size_t>(jcol)], g[jcol], g[jcol + 1]);

            ++rep.iterations;
            cols = jcol + 1;
            const double est = std::abs(g[jcol + 1]) / denom;
            rep.residual_history.push_back(est);
            if (!std::isfinite(est)) {
                rep.status = SolveStatus::diverged;
                done = true;
                break;
            }
            if (est <= cfg.tol) cycle_stop = true;
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
