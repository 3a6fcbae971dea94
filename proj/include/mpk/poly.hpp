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

/// @file poly.hpp
/// GMRES polynomial preconditioner in factored residual-polynomial form.
/// Setup runs a short Arnoldi process on the (optionally inner-preconditioned)
/// operator, takes the harmonic Ritz values as polynomial roots and orders
/// them by modified Leja ordering. Application evaluates z = p(A_op) v via
/// the product form 1 - t*p(t) = prod_i (1 - t/theta_i), where every root is
/// one shifted operator application: real roots update
///   acc += w/theta;  w <- w - (A_op w)/theta
/// and a conjugate pair (a +- b i) with mod = a^2 + b^2 uses the fused real
/// two-term update
///   u = 2a*w - A_op w;  acc += u/mod;  w <- w_prev - (A_op u)/mod.
/// Each root maps onto one power stage of the cache-blocked executor; the
/// final root never needs its w update, so only degree-1 operator stages run
/// (a trailing real root contributes its acc term in a pointwise epilogue).

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mpk/csr.hpp"
#include "mpk/dense.hpp"
#include "mpk/execute.hpp"
#include "mpk/gs2.hpp"
#include "mpk/jacobi.hpp"
#include "mpk/leja.hpp"
#include "mpk/ortho.hpp"
#include "mpk/plan.hpp"
#include "mpk/vector_block.hpp"

namespace mpk {

/// Optional inner preconditioner M^{-1} so the polynomial acts on the
/// combined operator A M^{-1}.
struct PolyInner {
    enum class Kind { none, jacobi, gs2 };
    Kind kind = Kind::none;
    JacobiPrecon jacobi;  ///< valid when kind == jacobi
    Gs2Precon gs2;        ///< valid when kind == gs2 (single sweep)
};

/// Polynomial preconditioner state: Leja-ordered harmonic Ritz roots with
/// conjugate pairs adjacent.
struct PolyPrecon {
    std::vector<Complex> theta;  ///< degree roots, Leja-ordered, pairs adjacent
    int degree = 0;
    bool truncated = false;  ///< Arnoldi broke down before the requested degree
    PolyInner inner;
};

namespace detail {

enum : std::uint8_t { kPolyReal = 0, kPolyPairFirst = 1, kPolyPairSecond = 2 };

/// Classifies every root as real or first/second member of a conjugate pair,
/// validating that pairs are exactly conjugate and adjacent.
inline std::vector<std::uint8_t> poly_roles(const std::vector<Complex>& theta) {
    std::vector<std::uint8_t> role(theta.size());
    std::size_t i = 0;
    while (i < theta.size()) {
        if (theta[i].imag() == 0.0) {
            role[i] = kPolyReal;
            ++i;
            continue;
        }
        if (i + 1 >= theta.size() || theta[i + 1] != std::conj(theta[i]))
            throw std::invalid_argument("poly: conjugate pair not adjacent");
        role[i] = kPolyPairFirst;
        role[i + 1] = kPolyPairSecond;
        i += 2;
    }
    return role;
}

/// z = M^{-1} v for the configured inner preconditioner (identity when none).
inline void poly_inner_apply(const PolyInner& inner, const CsrMatrix& a,
                             const std::vector<double>& v, std::vector<double>& z,
                             int threads) {
    switch (inner.kind) {
        case PolyInner::Kind::none:
            z = v;
            return;
        case PolyInner::Kind::jacobi:
            jacobi_apply(inner.jacobi, a, v, z, threads);
            return;
        case PolyInner::Kind::gs2:
            gs2_apply(inner.gs2, a, v, z, threads);
            return;
    }
}

/// Stage dispatcher for the factored-polynomial evaluation. Power p (plus
/// the slice offset power_base) selects root theta_p; the leading sub-power
/// stages run the inner preconditioner chain on the power's input vector and
/// the terminal stage applies A to its output row by row, finishing each row
/// with the root update. The w workspace keeps one slice per root so a
/// pair's second half may read the vector from two powers back; the acc and
/// inner banks are shared across powers (each row of acc is touched once per
/// power, and an inner bank is fully consumed before any adjacent row group
/// can reach the power that overwrites it).
struct PolyChain {
    const CsrMatrix* a = nullptr;
    const PolyPrecon* p = nullptr;
    const std::uint8_t* role = nullptr;
    VectorBlock* w = nullptr;      ///< degree slices; slice 0 holds v
    double* acc = nullptr;         ///< accumulated polynomial result
    VectorBlock* zbank = nullptr;  ///< jacobi: sweeps slices; gs2: {zero, z1}
    VectorBlock* gbank = nullptr;  ///< gs2: gamma + 1 slices
    int power_base = 0;

    /// Sub-power stages per root: inner chain length plus the terminal.
    static int stages(const PolyInner& inner) {
        switch (inner.kind) {
            case PolyInner::Kind::none:
                return 1;
            case PolyInner::Kind::jacobi:
                return JacobiOpChain::stages(inner.jacobi.sweeps);
            case PolyInner::Kind::gs2:
                return inner.gs2.gamma + 2;
        }
        return 1;
    }

    void operator()(index_t row_s, index_t row_e, int power, int j) const {
        const std::size_t pa = static_cast<std::size_t>(power_base + power);
        const double* w_in = w->slice(pa - 1);
        const double* z_src = w_in;
        bool fused_scaling = false;
        if (p->inner.kind == PolyInner::Kind::jacobi) {
            const JacobiPrecon& jp = p->inner.jacobi;
            const int k = jp.sweeps;
            if (k == 1) {
                fused_scaling = true;
            } else if (j == 0) {
                diag_scale_rows(jp.diag.inv.data(), w_in, zbank->slice(0), row_s,
                                row_e);
                return;
            } else if (j < k) {
                jacobi_sweep_rows(*a, jp.diag.pos.data(), jp.diag.inv.data(), w_in,
                                  zbank->slice(static_cast<std::size_t>(j) - 1),
                                  zbank->slice(static_cast<std::size_t>(j)), row_s,
                                  row_e);
                return;
            } else {
                z_src = zbank->slice(static_cast<std::size_t>(k) - 1);
            }
        } else if (p->inner.kind == PolyInner::Kind::gs2) {
            const Gs2Precon& gp = p->inner.gs2;
            const int gamma = gp.gamma;
            const bool fwd = gp.direction == SweepDirection::forward;
            const double* z0 = zbank->slice(0);  // stays all-zero
            double* z1 = zbank->slice(1);
            if (j == 0) {
                gs2_stage0_rows(*a, gp.diag.inv.data(), w_in, z0, gbank->slice(0),
                                gamma == 0 ? z1 : nullptr, row_s, row_e);
                return;
            }
            if (j <= gamma) {
                gs2_inner_rows(*a, gp.diag.pos.data(), gp.diag.inv.data(),
                               gbank->slice(0),
                               gbank->slice(static_cast<std::size_t>(j) - 1),
                               gbank->slice(static_cast<std::size_t>(j)), fwd, z0,
                               j == gamma ? z1 : nullptr, row_s, row_e);
                return;
            }
            z_src = z1;
        }
        // Terminal stage: t = A z_src per row, then the root update.
        const Complex th = p->theta[pa - 1];
        const std::uint8_t rr = role[pa - 1];
        const double re = th.real();
        const double mod = re * re + th.imag() * th.imag();
        const double* d_inv =
            fused_scaling ? p->inner.jacobi.diag.inv.data() : nullptr;
        double* w_out = w->slice(pa);
        const double* w_pm2 = rr == kPolyPairSecond ? w->slice(pa - 2) : nullptr;
        for (index_t r = row_s; r < row_e; ++r) {
            double t = 0.0;
            if (fused_scaling) {
                for (index_t k = a->row_ptr[r]; k < a->row_ptr[r + 1]; ++k) {
                    const index_t c = a->col_idx[k];
                    t += a->values[k] * (d_inv[c] * z_src[c]);
                }
            } else {
                for (index_t k = a->row_ptr[r]; k < a->row_ptr[r + 1]; ++k)
                    t += a->values[k] * z_src[a->col_idx[k]];
            }
            if (rr == kPolyReal) {
                acc[r] += w_in[r] / re;
                w_out[r] = w_in[r] - t / re;
            } else if (rr == kPolyPairFirst) {
                const double u = 2.0 * re * w_in[r] - t;
                w_out[r] = u;
                acc[r] += u / mod;
            } else {
                w_out[r] = w_pm2[r] - t / mod;
            }
        }
    }
};

/// Shared driver for the sequential and cache-blocked evaluations. Runs the
/// degree-1 operator stages (the last root's w update is never needed), then
/// adds a trailing real root's acc term pointwise.
inline void run_poly_chain(const PolyPrecon& p, const CsrMatrix& a,
                           const std::vector<double>& v, std::vector<double>& z,
                           const ExecutionPlan* plan, int threads) {
    const std::size_t n = a.n_rows;
    if (v.size() != n) throw std::invalid_argument("poly_apply: size mismatch");
    if (p.degree < 1 || p.theta.size() != static_cast<std::size_t>(p.degree))
        throw std::invalid_argument("poly_apply: preconditioner not set up");
    if (p.inner.kind == PolyInner::Kind::gs2 && p.inner.gs2.sweeps != 1)
        throw std::invalid_argument("poly_apply: gs2 inner must use a single sweep");
    const std::vector<std::uint8_t> role = poly_roles(p.theta);
    const int sub = PolyChain::stages(p.inner);
    const int n_powers = p.degree - 1;

    VectorBlock w(n, static_cast<std::size_t>(p.degree));
    std::copy(v.begin(), v.end(), w.slice(0));
    z.assign(n, 0.0);

    VectorBlock zbank, gbank;
    if (p.inner.kind == PolyInner::Kind::jacobi && p.inner.jacobi.sweeps >= 2)
        zbank = VectorBlock(n, static_cast<std::size_t>(p.inner.jacobi.sweeps));
    if (p.inner.kind == PolyInner::Kind::gs2) {
        zbank = VectorBlock(n, 2);
        gbank = VectorBlock(n, static_cast<std::size_t>(p.inner.gs2.gamma) + 1);
    }

    PolyChain chain{&a, &p, role.data(), &w, z.data(), &zbank, &gbank, 0};
    if (plan) {
        if (plan->n_rows != n)
            throw std::invalid_argument("poly_apply: plan does not match matrix");
        if (plan->sub_powers != sub)
            throw std::invalid_argument("poly_apply: plan sub_powers mismatch");
        for (int base = 0; base < n_powers; base += plan->p_m) {
            chain.power_base = base;
            execute(*plan, chain, threads, std::min(plan->p_m, n_powers - base));
        }
    } else {
        const int nt = resolve_threads(threads);
        for (int power = 1; power <= n_powers; ++power) {
            for (int j = 0; j < sub; ++j) {
#pragma omp parallel for schedule(static) num_threads(nt)
                for (std::size_t r = 0; r < n; ++r)
                    chain(static_cast<index_t>(r), static_cast<index_t>(r + 1),
                          power, j);
            }
        }
    }

    if (role[static_cast<std::size_t>(p.degree) - 1] == detail::kPolyReal) {
        const double th = p.theta[static_cast<std::size_t>(p.degree) - 1].real();
        const double* w_last = w.slice(static_cast<std::size_t>(p.degree) - 1);
        const int nt = resolve_threads(threads);
#pragma omp parallel for schedule(static) num_threads(nt)
        for (std::size_t r = 0; r < n; ++r) z[r] += w_last[r] / th;
    }
}

}  // namespace detail

/// Builds the polynomial preconditioner by running `degree` Arnoldi steps on
/// A M^{-1} from the given seed (two ICGS sweeps per step), computing the
/// harmonic Ritz values — eigenvalues of H_d + h_{d+1,d}^2 f e_d^T with
/// f = H_d^{-T} e_d — and Leja-ordering them. Arnoldi breakdown truncates
/// the degree to the invariant-subspace dimension and sets the truncated
/// flag (the subdiagonal term is then ~0, so the roots are plain Ritz
/// values, exact on that subspace).
inline PolyPrecon poly_setup_gmres(const CsrMatrix& a, int degree, PolyInner inner,
                                   const std::vector<double>& seed,
                                   int threads = 0) {
    if (degree < 1)
        throw std::invalid_argument("poly_setup_gmres: degree must be >= 1");
    if (a.n_rows != a.n_cols)
        throw std::invalid_argument("poly_setup_gmres: matrix must be square");
    const std::size_t n = a.n_rows;
    if (seed.size() != n)
        throw std::invalid_argument("poly_setup_gmres: seed size mismatch");
    if (inner.kind == PolyInner::Kind::gs2 && inner.gs2.sweeps != 1)
        throw std::invalid_argument(
            "poly_setup_gmres: gs2 inner must use a single sweep");
    const int d = std::min<int>(degree, static_cast<int>(n));

    std::vector<double> q(static_cast<std::size_t>(d + 1) * n);
    const double beta = nrm2(seed);
    if (!(beta > 0.0))
        throw std::invalid_argument("poly_setup_gmres: seed vector is zero");
    for (std::size_t i = 0; i < n; ++i) q[i] = seed[i] / beta;

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d + 1, d);
    std::vector<double> col(n), zin(n), wv(n);
    int steps = 0;
    bool truncated = false;
    for (int j = 0; j < d; ++j) {
        const double* qj = q.data() + static_cast<std::size_t>(j) * n;
        std::copy(qj, qj + n, col.begin());
        detail::poly_inner_apply(inner, a, col, zin, threads);
        spmv(a, zin, wv, threads);
        const std::vector<double> coeff = icgs_block_orthogonalize(
            q.data(), n, static_cast<std::size_t>(j) + 1, wv.data(), 1, 2, threads);
        for (int i = 0; i <= j; ++i) h(i, j) = coeff[static_cast<std::size_t>(i)];
        const double hnext = nrm2(wv);
        h(j + 1, j) = hnext;
        steps = j + 1;
        const double colnorm =
            std::sqrt(h.col(j).head(j + 1).squaredNorm() + hnext * hnext);
        if (hnext <= 1e-12 * colnorm) {
            truncated = steps < degree;
            break;
        }
        double* qn = q.data() + static_cast<std::size_t>(j + 1) * n;
        for (std::size_t i = 0; i < n; ++i) qn[i] = wv[i] / hnext;
    }
    if (d < degree) truncated = true;

    const int dd = steps;
    const Eigen::MatrixXd hd = h.topLeftCorner(dd, dd);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(hd.transpose());
    if (!lu.isInvertible())
        throw std::runtime_error(
            "poly_setup_gmres: operator is singular on the Krylov space");
    const Eigen::VectorXd f = lu.solve(Eigen::VectorXd::Unit(dd, dd - 1));
    Eigen::MatrixXd m = hd;
    m.col(dd - 1) += (h(dd, dd - 1) * h(dd, dd - 1)) * f;
    const std::vector<Complex> ritz = dense_eigenvalues(m);

    double maxmod = 0.0;
    for (const Complex& t : ritz) maxmod = std::max(maxmod, std::abs(t));
    for (const Complex& t : ritz)
        if (std::abs(t) <= 1e-14 * maxmod || maxmod == 0.0)
            throw std::runtime_error("poly_setup_gmres: zero harmonic Ritz value");

    PolyPrecon p;
    p.theta = modified_leja(ritz);
    p.degree = dd;
    p.truncated = truncated;
    p.inner = std::move(inner);
    detail::poly_roles(p.theta);  // validates pair adjacency
    return p;
}

/// z = p(A_op) v, sequential stage-by-stage evaluation.
inline void poly_apply(const PolyPrecon& p, const CsrMatrix& a,
                       const std::vector<double>& v, std::vector<double>& z,
                       int threads = 0) {
    detail::run_poly_chain(p, a, v, z, nullptr, threads);
}

/// z = p(A_op) v through the cache-blocked executor on the permuted matrix;
/// plans with p_m below degree-1 slice the roots into successive blocked
/// passes. Requires plan.sub_powers == poly_sub_powers(p).
inline void poly_apply_blocked(const PolyPrecon& p, const CsrMatrix& a_perm,
                               const ExecutionPlan& plan,
                               const std::vector<double>& v, std::vector<double>& z,
                               int threads = 0) {
    detail::run_poly_chain(p, a_perm, v, z, &plan, threads);
}

/// Sub-power stages per polynomial root for plan construction.
inline int poly_sub_powers(const PolyPrecon& p) {
    return detail::PolyChain::stages(p.inner);
}

}  // namespace mpk
