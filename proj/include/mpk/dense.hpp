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
 * Small dense linear-algebra helpers: eigenvalues of little matrices,
 * Givens rotations, and triangular back-substitution. These back the
 * least-squares updates and Ritz-value extraction in the solvers.
 */

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mpk {

using Complex = std::complex<double>;

// Eigenvalues of a small dense square matrix. Used for Ritz-value extraction
// from Hessenberg matrices; the input need not be symmetric.
inline std::vector<Complex> dense_eigenvalues(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("dense_eigenvalues: matrix must be square");
    }
    if (a.rows() == 0) {
        return {};
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("dense_eigenvalues: eigensolver failed to converge");
    }
    std::vector<Complex> out(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = es.eigenvalues()[i];
    }
    return out;
}

// Plane rotation G = [c s; -s c] chosen so that G * [a, b]^T = [r, 0]^T.
struct Givens {
    double c = 1.0;
    double s = 0.0;
};

inline Givens make_givens(double a, double b) {
    if (b == 0.0) {
        return {1.0, 0.0};
    }
    const double r = std::hypot(a, b);
    return {a / r, b / r};
}

inline void apply_givens(const Givens& g, double& a, double& b) {
    const double t = g.c * a + g.s * b;
    b = -g.s * a + g.c * b;
    a = t;
}

// Back-substitution for an upper-triangular system R y = b. R is column-major
// with leading dimension ld (ld >= n); b is overwritten with the solution.
inline void solve_upper(const double* r, std::size_t n, std::size_t ld, double* b) {
    for (std::size_t jj = n; jj-- > 0;) {
        const double d = r[jj * ld + jj];
        if (d == 0.0) {
            throw std::runtime_error("solve_upper: zero diagonal entry");
        }
        b[jj] /= d;
        for (std::size_t i = 0; i < jj; ++i) {
            b[i] -= r[jj * ld + i] * b[jj];
        }
    }
}

}  // namespace mpk
