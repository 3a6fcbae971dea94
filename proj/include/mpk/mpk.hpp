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
 * Matrix power kernels: y_p = A^p x for p = 1..p_m, in a baseline
 * power-by-power sweep and in the cache-blocked wavefront form, plus the
 * shifted (Newton basis) variant and the power-depth auto-tuner.
 *
 * Baseline and blocked variants perform the identical per-row arithmetic
 * in the identical accumulation order, so their results agree bitwise on
 * the same matrix ordering.
 */

#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "mpk/csr.hpp"
#include "mpk/execute.hpp"
#include "mpk/vector_block.hpp"

namespace mpk {

namespace detail {

inline void check_power_workspace(const CsrMatrix& A, const std::vector<double>& x,
                                  int p_m, const VectorBlock& block, const char* who) {
    if (A.n_rows != A.n_cols)
        throw std::invalid_argument(std::string(who) + ": matrix must be square");
    if (p_m < 1) throw std::invalid_argument(std::string(who) + ": p_m must be >= 1");
    if (x.size() != A.n_rows)
        throw std::invalid_argument(std::string(who) + ": input size mismatch");
    if (block.rows != A.n_rows || block.slices < static_cast<std::size_t>(p_m) + 1)
        throw std::invalid_argument(std::string(who) + ": workspace too small");
}

}  // namespace detail

/// Reference power sweep: for each power in turn, one full row-parallel
/// SpMV pass over the matrix. Slice 0 receives x, slice p receives A^p x.
inline void baseline_mpk(const CsrMatrix& A, const std::vector<double>& x, int p_m,
                         VectorBlock& block, int threads = 0) {
    detail::check_power_workspace(A, x, p_m, block, "baseline_mpk");
    std::copy(x.begin(), x.end(), block.slice(0));
    const int nt = resolve_threads(threads);
    for (int p = 1; p <= p_m; ++p) {
        const double* src = block.slice(p - 1);
        double* dst = block.slice(p);
#pragma omp parallel for schedule(static) num_threads(nt)
        for (std::int64_t r = 0; r < static_cast<std::int64_t>(A.n_rows); ++r) {
            double acc = 0.0;
            for (index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
                acc += A.values[k] * src[A.col_idx[k]];
            dst[r] = acc;
        }
    }
}

/// Cache-blocked power sweep over a level-permuted matrix. The plan must
/// have been built for this matrix's level structure; x is expected in the
/// same permuted ordering. Results are bitwise equal to baseline_mpk on
/// the permuted matrix.
inline void mpk(const ExecutionPlan& plan, const CsrMatrix& A_perm,
                const std::vector<double>& x, int p_m, VectorBlock& block,
                int threads = 0) {
    detail::check_power_workspace(A_perm, x, p_m, block, "mpk");
    if (plan.n_rows != A_perm.n_rows)
        throw std::invalid_argument("mpk: plan does not match matrix");
    std::copy(x.begin(), x.end(), block.slice(0));
    const double* vals = A_perm.values.data();
    const index_t* cols = A_perm.col_idx.data();
    const index_t* rp = A_perm.row_ptr.data();
    double* data = block.data.data();
    const std::size_t n = block.rows;
    execute(
        plan,
        [=](index_t row_s, index_t row_e, int p, int /*j*/) {
            const double* src = data + (p - 1) * n;
            double* dst = data + p * n;
            for (index_t r = row_s; r < row_e; ++r) {
                double acc = 0.0;
                for (index_t k = rp[r]; k < rp[r + 1]; ++k)
                    acc += vals[k] * src[cols[k]];
                dst[r] = acc;
            }
        },
        threads, p_m);
}

/// Validates a Newton-basis shift sequence: complex entries must form
/// adjacent conjugate pairs (positive imaginary part first), and a pair
/// must not straddle the end of the sequence.
inline void check_shift_chain(const std::vector<std::complex<double>>& shifts,
                              const char* who) {
    for (std::size_t i = 0; i < shifts.size(); ++i) {
        const double b = shifts[i].imag();
        if (b == 0.0) continue;
        if (b < 0.0)
            throw std::invalid_argument(std::string(who) +
                                        ": conjugate pair member without its partner");
        if (i + 1 == shifts.size())
            throw std::invalid_argument(std::string(who) +
                                        ": conjugate pair straddles the block end");
        if (shifts[i + 1] != std::conj(shifts[i]))
            throw std::invalid_argument(std::string(who) +
                                        ": conjugate pairs must be stored adjacently");
        ++i;  // skip the partner
    }
}

namespace detail {

/// Per-row shifted power step shared verbatim by the baseline and blocked
/// variants. For a real shift: y_p = A y_{p-1} - a y_{p-1}. For the second
/// member of a conjugate pair a +- bi, the two-step real formulation adds
/// the b^2 correction: y_p = A y_{p-1} - a y_{p-1} + b^2 y_{p-2}.
inline void shifted_rows(const CsrMatrix& A, double* dst, const double* src,
                         const double* src2, double a, double b2, index_t row_s,
                         index_t row_e) {
    if (b2 == 0.0) {
        for (index_t r = row_s; r < row_e; ++r) {
            double acc = 0.0;
            for (index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
                acc += A.values[k] * src[A.col_idx[k]];
            dst[r] = acc - a * src[r];
        }
    } else {
        for (index_t r = row_s; r < row_e; ++r) {
            double acc = 0.0;
            for (index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
                acc += A.values[k] * src[A.col_idx[k]];
            dst[r] = acc - a * src[r] + b2 * src2[r];
        }
    }
}

}  // namespace detail

/// Sequential reference for the shifted power sequence
/// y_p = (A - lambda_p I) y_{p-1}, conjugate pairs via the real two-step
/// formulation. The number of powers run equals shifts.size().
inline void baseline_mpk_shifted(const CsrMatrix& A, const std::vector<double>& x,
                                 const std::vector<std::complex<double>>& shifts,
                                 VectorBlock& block, int threads = 0) {
    const int p_m = static_cast<int>(shifts.size());
    detail::check_power_workspace(A, x, p_m, block, "baseline_mpk_shifted");
    check_shift_chain(shifts, "baseline_mpk_shifted");
    std::copy(x.begin(), x.end(), block.slice(0));
    const int nt = resolve_threads(threads);
    for (int p = 1; p <= p_m; ++p) {
        const double a = shifts[p - 1].real();
        const double bi = shifts[p - 1].imag();
        const double b2 = bi < 0.0 ? bi * bi : 0.0;
        const double* src = block.slice(p - 1);
        const double* src2 = p >= 2 ? block.slice(p - 2) : nullptr;
        double* dst = block.slice(p);
#pragma omp parallel for schedule(static) num_threads(nt)
        for (std::int64_t r = 0; r < static_cast<std::int64_t>(A.n_rows); ++r)
            detail::shifted_rows(A, dst, src, src2, a, b2, static_cast<index_t>(r),
                                 static_cast<index_t>(r + 1));
    }
}

/// Cache-blocked shifted power sweep; bitwise equal to
/// baseline_mpk_shifted on the same (permuted) matrix.
inline void mpk_shifted(const ExecutionPlan& plan, const CsrMatrix& A_perm,
                        const std::vector<double>& x,
                        const std::vector<std::complex<double>>& shifts,
                        VectorBlock& block, int threads = 0) {
    const int p_m = static_cast<int>(shifts.size());
    detail::check_power_workspace(A_perm, x, p_m, block, "mpk_shifted");
    if (plan.n_rows != A_perm.n_rows)
        throw std::invalid_argument("mpk_shifted: plan does not match matrix");
    check_shift_chain(shifts, "mpk_shifted");
    std::copy(x.begin(), x.end(), block.slice(0));
    double* data = block.data.data();
    const std::size_t n = block.rows;
    execute(
        plan,
        [&, data, n](index_t row_s, index_t row_e, int p, int /*j*/) {
            const double a = shifts[p - 1].real();
            const double bi = shifts[p - 1].imag();
            const double b2 = bi < 0.0 ? bi * bi : 0.0;
            const double* src = data + (p - 1) * n;
            const double* src2 = p >= 2 ? data + (p - 2) * n : nullptr;
            detail::shifted_rows(A_perm, data + p * n, src, src2, a, b2, row_s, row_e);
        },
        threads, p_m);
}

/// Power-depth tuning result: the chosen depth and the measured throughput
/// (GF/s) per candidate.
struct TuneResult {
    int p_opt = 1;
    std::vector<std::pair<int, double>> table;
};

/// Selects the power depth with the highest throughput as reported by
/// trial(p); ties break toward the smaller depth. The candidate range is
/// scanned ascending.
template <typename TrialFn>
TuneResult tune_p(int p_lo, int p_hi, TrialFn&& trial) {
    if (p_lo < 1 || p_hi < p_lo) throw std::invalid_argument("tune_p: bad range");
    TuneResult res;
    double best = -1.0;
    for (int p = p_lo; p <= p_hi; ++p) {
        const double gflops = trial(p);
        res.table.emplace_back(p, gflops);
        if (gflops > best) {
            best = gflops;
            res.p_opt = p;
        }
    }
    return res;
}

/// Measures the cache-blocked power kernel at each candidate depth: one
/// warm-up run, then the median of `reps` timed runs; throughput counts
/// 2 * nnz * p flops per sweep.
inline TuneResult tune_p(const LevelStructure& ls, const CsrMatrix& A_perm,
                         std::size_t cache_bytes, int p_lo, int p_hi,
                         int threads = 0, int reps = 3) {
    if (reps < 3) reps = 3;
    std::vector<double> x(A_perm.n_rows, 1.0);
    return tune_p(p_lo, p_hi, [&](int p) {
        const ExecutionPlan plan = group_levels(ls, A_perm, cache_bytes, p);
        VectorBlock block(A_perm.n_rows, static_cast<std::size_t>(p) + 1);
        mpk(plan, A_perm, x, p, block, threads);  // warm-up
        std::vector<double> times(reps);
        for (int rep = 0; rep < reps; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            mpk(plan, A_perm, x, p, block, threads);
            const auto t1 = std::chrono::steady_clock::now();
            times[rep] = std::chrono::duration<double>(t1 - t0).count();
        }
        std::nth_element(times.begin(), times.begin() + reps / 2, times.end());
        const double median = times[reps / 2];
        return 2.0 * A_perm.nnz() * p / median * 1e-9;
    });
}

}  // namespace mpk
