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
 * Slice-major multivector storage for power-kernel workspaces, plus the
 * small dense vector helpers used by the solvers.
 *
 * Dense reductions are deliberately sequential: they cost nothing at the
 * scales the sparse kernels dominate, and keeping them serial makes whole
 * solver runs bitwise independent of the worker-thread count.
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mpk {

/// rows x slices storage with each slice contiguous; slice p of a power
/// workspace holds y_p (slice 0 being the input / initial state).
struct VectorBlock {
    std::size_t rows = 0;
    std::size_t slices = 0;
    std::vector<double> data;

    VectorBlock() = default;
    VectorBlock(std::size_t rows_, std::size_t slices_)
        : rows(rows_), slices(slices_), data(rows_ * slices_, 0.0) {}

    double* slice(std::size_t p) {
        if (p >= slices) throw std::out_of_range("VectorBlock::slice");
        return data.data() + p * rows;
    }
    const double* slice(std::size_t p) const {
        if (p >= slices) throw std::out_of_range("VectorBlock::slice");
        return data.data() + p * rows;
    }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

inline double dot(std::size_t n, const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
    return dot(a.size(), a.data(), b.data());
}

inline double nrm2(std::size_t n, const double* a) { return std::sqrt(dot(n, a, a)); }

inline double nrm2(const std::vector<double>& a) { return nrm2(a.size(), a.data()); }

/// y += alpha * x
inline void axpy(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: size mismatch");
    axpy(x.size(), alpha, x.data(), y.data());
}

inline void scal(std::size_t n, double alpha, double* x) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

}  // namespace mpk
