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

/// @file amg.hpp
/// Algebraic multigrid with plain (unsmoothed) greedy aggregation. The
/// hierarchy coarsens by aggregating strongly connected nodes
/// (|a_ij| >= 0.25 sqrt(|a_ii a_jj|)), prolongation is the piecewise-constant
/// indicator matrix, coarse operators are exact Galerkin triple products
/// R A P, and the coarsest level is solved with a dense LU factorization.
/// Levels are smoothed with two-stage Gauss-Seidel (forward pre-sweeps with
/// a fused residual, backward post-sweeps) or a Chebyshev smoother; on the
/// finest level the smoother can run through the cache-blocked executor.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mpk/cheb.hpp"
#include "mpk/csr.hpp"
#include "mpk/gs2.hpp"
#include "mpk/plan.hpp"

namespace mpk {

/// Smoother family and parameters shared by every level.
struct AmgSmootherSpec {
    enum class Kind { gs2, cheby };
    Kind kind = Kind::gs2;
    int gamma = 1;   ///< gs2 inner iterations
    int sweeps = 2;  ///< gs2 outer sweeps per pre/post application
    int degree = 2;  ///< chebyshev degree
    double eig_ratio = 30.0;
    double boost = 1.1;
};

/// One grid level. The coarsest level carries only its operator; every
/// other level also owns the transfer operators to the next level and its
/// smoothers.
struct AmgLevel {
    CsrMatrix a;
    std::vector<index_t> agg;  ///< row -> aggregate id
    CsrMatrix p;               ///< prolongation (indicator)
    CsrMatrix r;               ///< restriction = p^T
    Gs2Precon gs2_pre;
    Gs2Precon gs2_post;
    ChebSmoother cheb;
};

struct AmgHierarchy {
    std::vector<AmgLevel> levels;  ///< levels[0] is the finest
    Eigen::PartialPivLU<Eigen::MatrixXd> coarse_lu;
    AmgSmootherSpec smoother;
    std::size_t coarse_threshold = 500;
    int max_levels = 1;
    bool stagnated = false;  ///< aggregation stopped making progress
    std::optional<ExecutionPlan> finest_plan;
};

namespace detail {

struct Aggregation {
    std::vector<index_t> agg;
    index_t n_agg = 0;
};

/// Two-pass greedy aggregation. Pass 1 visits nodes in ascending index and
/// lets an unaggregated node with at least one unaggregated strong neighbor
/// found a new aggregate containing them all. Pass 2 joins each leftover to
/// the neighboring aggregate with the strongest connection (ties toward the
/// lower column index); a node with no aggregated neighbor becomes a
/// singleton, which later leftovers may then join.
inline Aggregation aggregate_greedy(const CsrMatrix& a) {
    const index_t n = a.n_rows;
    const std::vector<index_t> dpos = diagonal_positions(a);
    std::vector<double> dval(n, 0.0);
    for (index_t r = 0; r < n; ++r)
        if (dpos[r] != kNoDiag) dval[r] = a.values[dpos[r]];

    constexpr index_t kUnagg = kNoDiag;
    Aggregation out;
    out.agg.assign(n, kUnagg);
    auto strong = [&](index_t r, index_t k) {
        const index_t c = a.col_idx[k];
        if (c == r) return false;
        return std::abs(a.values[k]) >=
               0.25 * std::sqrt(std::abs(dval[r] * dval[c]));
    };

    for (index_t r = 0; r < n; ++r) {
        if (out.agg[r] != kUnagg) continue;
        bool any = false;
        for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
            if (out.agg[a.col_idx[k]] == kUnagg && strong(r, k)) {
                any = true;
                break;
            }
        }
        if (!any) continue;  // leftover, resolved in pass 2
        const index_t id = out.n_agg++;
        out.agg[r] = id;
        for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
            if (out.agg[a.col_idx[k]] == kUnagg && strong(r, k))
                out.agg[a.col_idx[k]] = id;
    }
    for (index_t r = 0; r < n; ++r) {
        if (out.agg[r] != kUnagg) continue;
        index_t best = kUnagg;
        double best_mag = -1.0;
        for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
            const index_t c = a.col_idx[k];
            if (c == r || out.agg[c] == kUnagg) continue;
            const double mag = std::abs(a.values[k]);
            if (mag > best_mag) {
                best_mag = mag;
                best = out.agg[c];
            }
        }
        out.agg[r] = best != kUnagg ? best : out.n_agg++;
    }
    return out;
}

/// Piecewise-constant prolongation: one unit entry per row.
inline CsrMatrix indicator_matrix(const std::vector<index_t>& agg, index_t n_agg) {
    std::vector<Triplet> t;
    t.reserve(agg.size());
    for (std::size_t r = 0; r < agg.size(); ++r)
        t.push_back({static_cast<index_t>(r), agg[r], 1.0});
    return from_coo(static_cast<index_t>(agg.size()), n_agg, t);
}

/// Exact Galerkin coarse operator R A P: every fine entry a_ij lands in
/// coarse cell (agg_i, agg_j); from_coo sums duplicates in input order, so
/// the result is deterministic.
inline CsrMatrix galerkin_product(const CsrMatrix& a, const std::vector<index_t>& agg,
                                  index_t n_agg) {
    std::vector<Triplet> t;
    t.reserve(a.values.size());
    for (index_t r = 0; r < a.n_rows; ++r)
        for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
            t.push_back({agg[r], agg[a.col_idx[k]], a.values[k]});
    return from_coo(n_agg, n_agg, t);
}

inline Eigen::MatrixXd dense_of(const CsrMatrix& a) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(a.n_rows, a.n_cols);
    for (index_t r = 0; r < a.n_rows; ++r)
        for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
            m(r, a.col_idx[k]) += a.values[k];
    return m;
}

/// Recursive V-cycle with a zero initial guess on every level: pre-smooth
/// with the fused residual, restrict, recurse, prolong-correct, post-smooth.
inline void amg_cycle_level(const AmgHierarchy& h, std::size_t k,
                            const std::vector<double>& b, std::vector<double>& x,
                            int threads) {
    const AmgLevel& lv = h.levels[k];
    const std::size_t n = lv.a.n_rows;
    if (k + 1 == h.levels.size()) {
        const Eigen::Map<const Eigen::VectorXd> be(b.data(),
                                                   static_cast<Eigen::Index>(n));
        const Eigen::VectorXd xe = h.coarse_lu.solve(be);
        x.assign(xe.data(), xe.data() + n);
        return;
    }
    x.assign(n, 0.0);
    std::vector<double> r;
    const bool blocked = k == 0 && h.finest_plan.has_value();
    const bool gs = h.smoother.kind == AmgSmootherSpec::Kind::gs2;
    if (gs) {
        if (blocked)
            gs2_smooth_residual_blocked(lv.gs2_pre, lv.a, *h.finest_plan, b, x, r,
                                        threads);
        else
            gs2_smooth_residual(lv.gs2_pre, lv.a, b, x, r, threads);
    } else {
        if (blocked)
            cheb_smooth_residual_blocked(lv.cheb, lv.a, *h.finest_plan, b, x, r,
                                         threads);
        else
            cheb_smooth_residual(lv.cheb, lv.a, b, x, r, threads);
    }

    std::vector<double> rc(lv.r.n_rows);
    spmv(lv.r, r, rc, threads);
    std::vector<double> cc;
    amg_cycle_level(h, k + 1, rc, cc, threads);
    std::vector<double> t(n);
    spmv(lv.p, cc, t, threads);
    const int nt = resolve_threads(threads);
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::size_t i = 0; i < n; ++i) x[i] += t[i];

    if (gs) {
        if (blocked)
            gs2_smooth_blocked(lv.gs2_post, lv.a, *h.finest_plan, b, x, threads);
        else
            gs2_smooth(lv.gs2_post, lv.a, b, x, threads);
    } else {
        if (blocked)
            cheb_smooth_blocked(lv.cheb, lv.a, *h.finest_plan, b, x, threads);
        else
            cheb_smooth(lv.cheb, lv.a, b, x, threads);
    }
}

}  // namespace detail

/// Sub-power stage count of the configured finest-level smoother chain.
inline int amg_sub_powers(const AmgSmootherSpec& s) {
    return s.kind == AmgSmootherSpec::Kind::gs2 ? s.gamma + 2 : 1;
}

/// Power stages the finest-level plan must accommodate (the pre-smoother
/// fuses one extra residual stage for the Chebyshev smoother; GS2 folds the
/// residual into the last sweep's terminal sub-stage).
inline int amg_plan_powers(const AmgSmootherSpec& s) {
    return s.kind == AmgSmootherSpec::Kind::gs2 ? s.sweeps : s.degree + 1;
}

/// Builds the aggregation hierarchy. Coarsening stops at `coarse_threshold`
/// rows (n below the threshold yields a single-level hierarchy: direct solve
/// only), at `max_levels`, or when aggregation stagnates (coarse size equals
/// fine size), which sets the `stagnated` warning flag. When `finest_plan`
/// is given, the finest level's smoothers run through the cache-blocked
/// executor; the matrix must then already be level-permuted to match.
inline AmgHierarchy amg_setup(const CsrMatrix& a, int max_levels,
                              std::size_t coarse_threshold = 500,
                              AmgSmootherSpec smoother = {},
                              const ExecutionPlan* finest_plan = nullptr) {
    if (a.n_rows != a.n_cols)
        throw std::invalid_argument("amg_setup: matrix must be square");
    if (max_levels < 1)
        throw std::invalid_argument("amg_setup: max_levels must be >= 1");
    if (smoother.kind == AmgSmootherSpec::Kind::gs2 &&
        (smoother.gamma < 0 || smoother.sweeps < 1))
        throw std::invalid_argument("amg_setup: invalid gs2 smoother parameters");
    if (smoother.kind == AmgSmootherSpec::Kind::cheby && smoother.degree < 1)
        throw std::invalid_argument("amg_setup: invalid chebyshev degree");

    AmgHierarchy h;
    h.smoother = smoother;
    h.coarse_threshold = coarse_threshold;
    h.max_levels = max_levels;
    h.levels.push_back(AmgLevel{});
    h.levels.back().a = a;

    while (static_cast<int>(h.levels.size()) < max_levels &&
           h.levels.back().a.n_rows > coarse_threshold) {
        AmgLevel& lv = h.levels.back();
        const detail::Aggregation ag = detail::aggregate_greedy(lv.a);
        if (ag.n_agg >= lv.a.n_rows) {
            h.stagnated = true;
            break;
        }
        lv.agg = ag.agg;
        lv.p = detail::indicator_matrix(ag.agg, ag.n_agg);
        lv.r = transpose(lv.p);
        CsrMatrix ac = detail::galerkin_product(lv.a, ag.agg, ag.n_agg);
        h.levels.push_back(AmgLevel{});
        h.levels.back().a = std::move(ac);
    }

    for (std::size_t k = 0; k + 1 < h.levels.size(); ++k) {
        AmgLevel& lv = h.levels[k];
        if (smoother.kind == AmgSmootherSpec::Kind::gs2) {
            lv.gs2_pre = gs2_setup(lv.a, smoother.gamma, smoother.sweeps,
                                   SweepDirection::forward);
            lv.gs2_post = gs2_setup(lv.a, smoother.gamma, smoother.sweeps,
                                    SweepDirection::backward);
        } else {
            lv.cheb = cheb_setup(lv.a, smoother.degree, smoother.eig_ratio,
                                 smoother.boost);
        }
    }

    h.coarse_lu.compute(detail::dense_of(h.levels.back().a));

    if (finest_plan) {
        if (finest_plan->n_rows != a.n_rows)
            throw std::invalid_argument("amg_setup: plan does not match matrix");
        if (finest_plan->sub_powers != amg_sub_powers(smoother))
            throw std::invalid_argument("amg_setup: plan sub_powers mismatch");
        if (finest_plan->p_m < amg_plan_powers(smoother))
            throw std::invalid_argument("amg_setup: plan power budget too small");
        h.finest_plan = *finest_plan;
    }
    return h;
}

/// One V-cycle approximating z = A^{-1} v from a zero guess.
inline void amg_vcycle(const AmgHierarchy& h, const std::vector<double>& v,
                       std::vector<double>& z, int threads = 0) {
    if (v.size() != h.levels.front().a.n_rows)
        throw std::invalid_argument("amg_vcycle: size mismatch");
    detail::amg_cycle_level(h, 0, v, z, threads);
}

/// Effective SpMV count of one V-cycle in finest-level operator units:
/// each level contributes its pre-sweeps, the fused residual and its
/// post-sweeps (Chebyshev: one operator apply per step), weighted by
/// nnz(A_k)/nnz(A_0). The coarsest direct solve counts as zero.
inline double amg_vcycle_cost(const AmgHierarchy& h) {
    if (h.levels.size() < 2) return 0.0;
    const double nnz0 = static_cast<double>(h.levels.front().a.values.size());
    // Per level: pre- and post-smoothing plus the fused pre-smoother
    // residual. A GS2 sweep traverses the full matrix once in stage 0 and
    // half of it per inner iteration; a Chebyshev step traverses it once.
    const double per_level =
        h.smoother.kind == AmgSmootherSpec::Kind::gs2
            ? 2.0 * h.smoother.sweeps * (1.0 + 0.5 * h.smoother.gamma) + 1.0
            : 2.0 * h.smoother.degree + 1.0;
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < h.levels.size(); ++k)
        total += per_level *
                 static_cast<double>(h.levels[k].a.values.size()) / nnz0;
    return total;
}

}  // namespace mpk
