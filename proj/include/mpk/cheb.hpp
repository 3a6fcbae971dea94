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

/// @file cheb.hpp
/// First-kind Chebyshev polynomial smoother on the diagonally scaled system
/// D^{-1} A x = D^{-1} b, damping the interval [lambda_max*boost/eig_ratio,
/// lambda_max*boost] of D^{-1} A. Each step applies A once, so the smoother
/// maps directly onto power stages of the cache-blocked executor: step k
/// reads the previous iterate slice through the matrix and updates its own
/// row of the shared direction bank d and the next iterate slice,
///   d_i <- coef_prev_k * d_i + coef_r_k * d_inv_i * (b_i - (A x_{k-1})_i)
///   x_k,i = x_{k-1,i} + d_i.
/// A degenerate point interval (eig_ratio 1) turns every step into a
/// Richardson update with coefficient 1/theta.

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mpk/csr.hpp"
#include "mpk/execute.hpp"
#include "mpk/gs2.hpp"
#include "mpk/jacobi.hpp"
#include "mpk/plan.hpp"
#include "mpk/vector_block.hpp"

namespace mpk {

/// Chebyshev smoother state. The interval is expressed through the largest
/// eigenvalue estimate of D^{-1} A, the target ratio lambda_max/lambda_min
/// and a safety boost on the upper end.
struct ChebSmoother {
    DiagInfo diag;
    double lambda_max = 0.0;
    double eig_ratio = 30.0;
    double boost = 1.1;
    int degree = 1;
};

namespace detail {

/// Scalar three-term recurrence coefficients for every step: step k combines
/// the previous direction with coef_prev[k] and the scaled residual with
/// coef_r[k]. A point interval (delta == 0) yields pure Richardson steps.
inline void cheb_coefficients(double alpha, double beta, int degree,
                              std::vector<double>& coef_prev,
                              std::vector<double>& coef_r) {
    const double theta = 0.5 * (beta + alpha);
    const double delta = 0.5 * (beta - alpha);
    coef_prev.assign(static_cast<std::size_t>(degree), 0.0);
    coef_r.assign(static_cast<std::size_t>(degree), 1.0 / theta);
    if (delta == 0.0) return;
    const double sigma = theta / delta;
    double rho_prev = 1.0 / sigma;
    for (int k = 1; k < degree; ++k) {
        const double rho = 1.0 / (2.0 * sigma - rho_prev);
        coef_prev[static_cast<std::size_t>(k)] = rho * rho_prev;
        coef_r[static_cast<std::size_t>(k)] = 2.0 * rho / delta;
        rho_prev = rho;
    }
}

/// Stage dispatcher: powers 1..degree are Chebyshev steps, and with the
/// residual terminal enabled power degree+1 computes r = b - A x_degree.
/// The direction bank is a single vector updated in place (own-row
/// read-modify-write, deterministic under any cell schedule); iterates use
/// one slice per step so neighbouring rows can still read x_{k-1} while x_k
/// is written.
struct ChebChain {
    const CsrMatrix* a = nullptr;
    const ChebSmoother* s = nullptr;
    const double* b = nullptr;
    VectorBlock* x = nullptr;  ///< degree + 1 slices, slice 0 = initial guess
    double* d = nullptr;       ///< shared direction bank
    const double* coef_prev = nullptr;
    const double* coef_r = nullptr;
    bool residual = false;
    double* r_out = nullptr;

    void operator()(index_t row_s, index_t row_e, int power, int /*j*/) const {
        if (residual && power == s->degree + 1) {
            residual_rows(*a, b, x->slice(static_cast<std::size_t>(s->degree)),
                          r_out, row_s, row_e);
            return;
        }
        const double* xp = x->slice(static_cast<std::size_t>(power) - 1);
        double* xn = x->slice(static_cast<std::size_t>(power));
        const double cp = coef_prev[static_cast<std::size_t>(power) - 1];
        const double cr = coef_r[static_cast<std::size_t>(power) - 1];
        const double* d_inv = s->diag.inv.data();
        for (index_t r = row_s; r < row_e; ++r) {
            double acc = 0.0;
            for (index_t k = a->row_ptr[r]; k < a->row_ptr[r + 1]; ++k)
                acc += a->values[k] * xp[a->col_idx[k]];
            const double dn = cp * d[r] + cr * (d_inv[r] * (b[r] - acc));
            d[r] = dn;
            xn[r] = xp[r] + dn;
        }
    }
};

/// Shared sequential/blocked driver. x_io carries the initial guess in and
/// the smoothed iterate out; with residual set, r_out receives b - A x_out
/// as a fused final power stage.
inline void run_cheb_chain(const ChebSmoother& s, const CsrMatrix& a,
                           const std::vector<double>& b, std::vector<double>& x_io,
                           bool residual, double* r_out, const ExecutionPlan* plan,
                           int threads) {
    const std::size_t n = a.n_rows;
    if (a.n_rows != a.n_cols) throw std::invalid_argument("cheb: matrix must be square");
    if (b.size() != n || x_io.size() != n)
        throw std::invalid_argument("cheb: size mismatch");
    if (s.degree < 1) throw std::invalid_argument("cheb: degree must be >= 1");
    if (!(s.lambda_max > 0.0))
        throw std::invalid_argument("cheb: non-positive eigenvalue estimate");

    const double beta = s.lambda_max * s.boost;
    const double alpha = beta / s.eig_ratio;
    std::vector<double> coef_prev, coef_r;
    cheb_coefficients(alpha, beta, s.degree, coef_prev, coef_r);

    VectorBlock x(n, static_cast<std::size_t>(s.degree) + 1);
    std::copy(x_io.begin(), x_io.end(), x.slice(0));
    std::vector<double> d(n, 0.0);
    ChebChain chain{&a,           &s, b.data(), &x,       d.data(),
                    coef_prev.data(), coef_r.data(), residual, r_out};
    const int p_m = s.degree + (residual ? 1 : 0);
    if (plan) {
        if (plan->n_rows != n)
            throw std::invalid_argument("cheb: plan does not match matrix");
        if (plan->sub_powers != 1)
            throw std::invalid_argument("cheb: plan sub_powers mismatch");
        execute(*plan, chain, threads, p_m);
    } else {
        const int nt = resolve_threads(threads);
        for (int power = 1; power <= p_m; ++power) {
#pragma omp parallel for schedule(static) num_threads(nt)
            for (std::size_t r = 0; r < n; ++r)
                chain(static_cast<index_t>(r), static_cast<index_t>(r + 1), power, 0);
        }
    }
    const double* xd = x.slice(static_cast<std::size_t>(s.degree));
    std::copy(xd, xd + n, x_io.begin());
}

}  // namespace detail

/// Builds the smoother: estimates lambda_max of D^{-1} A with
/// `power_iters` (>= 20) normalized power-iteration steps from the all-ones
/// seed, using serial norms so the estimate is independent of threading.
inline ChebSmoother cheb_setup(const CsrMatrix& a, int degree,
                               double eig_ratio = 30.0, double boost = 1.1,
                               int power_iters = 20) {
    if (degree < 1) throw std::invalid_argument("cheb_setup: degree must be >= 1");
    if (!(eig_ratio >= 1.0))
        throw std::invalid_argument("cheb_setup: eig_ratio must be >= 1");
    if (!(boost > 0.0)) throw std::invalid_argument("cheb_setup: boost must be > 0");
    if (power_iters < 20) power_iters = 20;
    ChebSmoother s;
    s.diag = build_diag_info(a, "cheb_setup");
    s.eig_ratio = eig_ratio;
    s.boost = boost;
    s.degree = degree;

    const std::size_t n = a.n_rows;
    std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> y(n);
    double lambda = 0.0;
    for (int it = 0; it < power_iters; ++it) {
        spmv(a, x, y);
        for (std::size_t i = 0; i < n; ++i) y[i] *= s.diag.inv[i];
        lambda = nrm2(y);
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw std::runtime_error("cheb_setup: eigenvalue estimate failed");
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / lambda;
    }
    s.lambda_max = lambda;
    return s;
}

/// `degree` Chebyshev steps on A x = b from the guess in x (in/out).
inline void cheb_smooth(const ChebSmoother& s, const CsrMatrix& a,
                        const std::vector<double>& b, std::vector<double>& x,
                        int threads = 0) {
    detail::run_cheb_chain(s, a, b, x, false, nullptr, nullptr, threads);
}

/// Smoothing plus the fused residual r = b - A x_out.
inline void cheb_smooth_residual(const ChebSmoother& s, const CsrMatrix& a,
                                 const std::vector<double>& b,
                                 std::vector<double>& x, std::vector<double>& r,
                                 int threads = 0) {
    r.resize(a.n_rows);
    detail::run_cheb_chain(s, a, b, x, true, r.data(), nullptr, threads);
}

/// Cache-blocked twins on the permuted matrix (plan.sub_powers must be 1 and
/// plan.p_m at least degree, plus one for the fused residual).
inline void cheb_smooth_blocked(const ChebSmoother& s, const CsrMatrix& a_perm,
                                const ExecutionPlan& plan,
                                const std::vector<double>& b, std::vector<double>& x,
                                int threads = 0) {
    detail::run_cheb_chain(s, a_perm, b, x, false, nullptr, &plan, threads);
}

inline void cheb_smooth_residual_blocked(const ChebSmoother& s,
                                         const CsrMatrix& a_perm,
                                         const ExecutionPlan& plan,
                                         const std::vector<double>& b,
                                         std::vector<double>& x,
                                         std::vector<double>& r, int threads = 0) {
    r.resize(a_perm.n_rows);
    detail::run_cheb_chain(s, a_perm, b, x, true, r.data(), &plan, threads);
}

}  // namespace mpk
