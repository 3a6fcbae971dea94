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
 * Tagged-union preconditioner front end for the solvers. A Precon bundles
 * one of the concrete preconditioners (or none) behind three uniform
 * entry points: apply (z = M^{-1} v), op (w = A M^{-1} v, the right-
 * preconditioned operator the Krylov methods iterate with), and a
 * cache-blocked op twin that is bitwise equal to the sequential op on the
 * level-permuted matrix. Also centralizes the plan-shape bookkeeping
 * (sub-power stage count, power budget) and the effective-SpMV accounting:
 * every full-matrix traversal counts 1, strictly triangular inner passes
 * count 1/2, pointwise work counts 0.
 */

#pragma once

#include <stdexcept>
#include <vector>

#include "mpk/amg.hpp"
#include "mpk/cheb.hpp"
#include "mpk/csr.hpp"
#include "mpk/gs2.hpp"
#include "mpk/jacobi.hpp"
#include "mpk/plan.hpp"
#include "mpk/poly.hpp"

namespace mpk {

enum class PreconKind { none, jacobi, gs2, poly, cheby, amg };

inline const char* to_string(PreconKind k) {
    switch (k) {
        case PreconKind::none: return "none";
        case PreconKind::jacobi: return "jacobi";
        case PreconKind::gs2: return "gs2";
        case PreconKind::poly: return "poly";
        case PreconKind::cheby: return "cheby";
        case PreconKind::amg: return "amg";
    }
    return "?";
}

/// Declarative preconditioner description, mirroring the config-file shape.
/// Unused members are ignored by the kinds that do not read them.
struct PreconSpec {
    PreconKind kind = PreconKind::none;
    int sweeps = 1;  ///< jacobi sweeps / gs2 outer sweeps / amg smoother sweeps
    int gamma = 1;   ///< gs2 (and amg-gs2) inner Jacobi-Richardson iterations
    int degree = 6;  ///< poly / cheby / amg-cheby degree
    PreconKind inner = PreconKind::none;  ///< poly inner: none, jacobi or gs2
    int inner_sweeps = 1;                 ///< poly inner jacobi sweeps
    int inner_gamma = 1;                  ///< poly inner gs2 iterations
    int max_levels = 10;                  ///< amg
    std::size_t coarse_threshold = 500;   ///< amg
    AmgSmootherSpec::Kind smoother = AmgSmootherSpec::Kind::gs2;  ///< amg
    double eig_ratio = 30.0;              ///< cheby / amg-cheby
    double boost = 1.1;                   ///< cheby / amg-cheby
};

/// One concrete preconditioner behind a uniform interface. Only the member
/// selected by `kind` is meaningful. The AMG member carries its own finest-
/// level plan; for the other kinds the blocked op takes the plan explicitly.
struct Precon {
    PreconKind kind = PreconKind::none;
    JacobiPrecon jacobi;
    Gs2Precon gs2;
    PolyPrecon poly;
    ChebSmoother cheb;
    AmgHierarchy amg;
};

/// Builds the concrete preconditioner a spec describes. `seed` feeds the
/// polynomial setup (the solvers pass the right-hand side); `amg_plan` wires
/// the AMG finest-level smoother to a cache-blocked plan and is ignored by
/// every other kind (their blocked paths take the plan at apply time).
inline Precon precon_setup(const CsrMatrix& a, const PreconSpec& spec,
                           const std::vector<double>& seed,
                           const ExecutionPlan* amg_plan = nullptr, int threads = 0) {
    Precon p;
    p.kind = spec.kind;
    switch (spec.kind) {
        case PreconKind::none:
            break;
        case PreconKind::jacobi:
            p.jacobi = jacobi_setup(a, spec.sweeps);
            break;
        case PreconKind::gs2:
            p.gs2 = gs2_setup(a, spec.gamma, spec.sweeps);
            break;
        case PreconKind::poly: {
            PolyInner inner;
            if (spec.inner == PreconKind::jacobi) {
                inner.kind = PolyInner::Kind::jacobi;
                inner.jacobi = jacobi_setup(a, spec.inner_sweeps);
            } else if (spec.inner == PreconKind::gs2) {
                inner.kind = PolyInner::Kind::gs2;
                inner.gs2 = gs2_setup(a, spec.inner_gamma, 1);
            } else if (spec.inner != PreconKind::none) {
                throw std::invalid_argument(
                    "precon_setup: poly inner must be none, jacobi or gs2");
            }
            p.poly = poly_setup_gmres(a, spec.degree, inner, seed, threads);
            break;
        }
        case PreconKind::cheby:
            p.cheb = cheb_setup(a, spec.degree, spec.eig_ratio, spec.boost);
            break;
        case PreconKind::amg: {
            AmgSmootherSpec sm;
            sm.kind = spec.smoother;
            sm.gamma = spec.gamma;
            sm.sweeps = spec.sweeps;
            sm.degree = spec.degree;
            sm.eig_ratio = spec.eig_ratio;
            sm.boost = spec.boost;
            p.amg = amg_setup(a, spec.max_levels, spec.coarse_threshold, sm, amg_plan);
            break;
        }
    }
    return p;
}

/// Sub-power stage count a plan must carry for precon_op_blocked.
inline int precon_sub_powers(const Precon& p) {
    switch (p.kind) {
        case PreconKind::jacobi:
            return detail::JacobiOpChain::stages(p.jacobi.sweeps);
        case PreconKind::gs2:
            return p.gs2.gamma + 2;
        case PreconKind::poly:
            return poly_sub_powers(p.poly);
        case PreconKind::amg:
            return amg_sub_powers(p.amg.smoother);
        default:
            return 1;  // none, cheby: plain power stages
    }
}

/// Minimum power budget (plan p_m) precon_op_blocked needs. Polynomial
/// root slicing accepts any budget >= 1, so 1 is reported there.
inline int precon_plan_powers(const Precon& p) {
    switch (p.kind) {
        case PreconKind::gs2:
            return p.gs2.sweeps;
        case PreconKind::cheby:
            return p.cheb.degree;
        case PreconKind::amg:
            return amg_plan_powers(p.amg.smoother);
        default:
            return 1;
    }
}

/// Effective SpMVs per preconditioner application z = M^{-1} v.
inline double precon_apply_cost(const Precon& p) {
    switch (p.kind) {
        case PreconKind::jacobi:
            return static_cast<double>(p.jacobi.sweeps - 1);
        case PreconKind::gs2:
            return p.gs2.sweeps * (1.0 + 0.5 * p.gs2.gamma);
        case PreconKind::poly: {
            double inner = 0.0;
            if (p.poly.inner.kind == PolyInner::Kind::jacobi)
                inner = static_cast<double>(p.poly.inner.jacobi.sweeps - 1);
            else if (p.poly.inner.kind == PolyInner::Kind::gs2)
                inner = 1.0 + 0.5 * p.poly.inner.gs2.gamma;
            return (p.poly.degree - 1) * (1.0 + inner);
        }
        case PreconKind::cheby:
            return static_cast<double>(p.cheb.degree);
        case PreconKind::amg:
            return amg_vcycle_cost(p.amg);
        default:
            return 0.0;
    }
}

/// Effective SpMVs per preconditioned operator application w = A M^{-1} v.
inline double precon_op_cost(const Precon& p) { return precon_apply_cost(p) + 1.0; }

/// z = M^{-1} v (identity when kind is none).
inline void precon_apply(const Precon& p, const CsrMatrix& a,
                         const std::vector<double>& v, std::vector<double>& z,
                         int threads = 0) {
    switch (p.kind) {
        case PreconKind::none:
            z = v;
            return;
        case PreconKind::jacobi:
            jacobi_apply(p.jacobi, a, v, z, threads);
            return;
        case PreconKind::gs2:
            gs2_apply(p.gs2, a, v, z, threads);
            return;
        case PreconKind::poly:
            poly_apply(p.poly, a, v, z, threads);
            return;
        case PreconKind::cheby:
            z.assign(a.n_rows, 0.0);
            cheb_smooth(p.cheb, a, v, z, threads);
            return;
        case PreconKind::amg:
            amg_vcycle(p.amg, v, z, threads);
            return;
    }
}

/// w = A M^{-1} v with sequential kernels.
inline void precon_op(const Precon& p, const CsrMatrix& a,
                      const std::vector<double>& v, std::vector<double>& w,
                      int threads = 0) {
    switch (p.kind) {
        case PreconKind::none:
            w.resize(a.n_rows);
            spmv(a, v, w, threads);
            return;
        case PreconKind::jacobi:
            jacobi_op(p.jacobi, a, v, w, threads);
            return;
        case PreconKind::gs2:
            gs2_op(p.gs2, a, v, w, threads);
            return;
        default: {
            std::vector<double> z;
            precon_apply(p, a, v, z, threads);
            w.resize(a.n_rows);
            spmv(a, z, w, threads);
            return;
        }
    }
}

/// Cache-blocked twin of precon_op on the level-permuted matrix; bitwise
/// equal to the sequential composition. Jacobi and GS2 fuse the closing
/// SpMV into their sub-power chains; the polynomial and Chebyshev kinds
/// block their internal power steps and close with a plain SpMV; AMG blocks
/// the finest-level smoother through the plan stored in the hierarchy. The
/// `none` kind is a single SpMV with no power structure to block.
inline void precon_op_blocked(const Precon& p, const CsrMatrix& a_perm,
                              const ExecutionPlan& plan, const std::vector<double>& v,
                              std::vector<double>& w, int threads = 0) {
    switch (p.kind) {
        case PreconKind::none:
            w.resize(a_perm.n_rows);
            spmv(a_perm, v, w, threads);
            return;
        case PreconKind::jacobi:
            jacobi_op_blocked(p.jacobi, a_perm, plan, v, w, threads);
            return;
        case PreconKind::gs2:
            gs2_op_blocked(p.gs2, a_perm, plan, v, w, threads);
            return;
        case PreconKind::poly: {
            std::vector<double> z;
            poly_apply_blocked(p.poly, a_perm, plan, v, z, threads);
            w.resize(a_perm.n_rows);
            spmv(a_perm, z, w, threads);
            return;
        }
        case PreconKind::cheby: {
            std::vector<double> z(a_perm.n_rows, 0.0);
            cheb_smooth_blocked(p.cheb, a_perm, plan, v, z, threads);
            w.resize(a_perm.n_rows);
            spmv(a_perm, z, w, threads);
            return;
        }
        case PreconKind::amg: {
            if (!p.amg.finest_plan.has_value())
                throw std::invalid_argument(
                    "precon_op_blocked: amg hierarchy was built without a plan");
            std::vector<double> z;
            amg_vcycle(p.amg, v, z, threads);
            w.resize(a_perm.n_rows);
            spmv(a_perm, z, w, threads);
            return;
        }
    }
}

}  // namespace mpk
