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
 * Independent dense-arithmetic reference implementations ("oracles") that
 * the unit and acceptance tests compare the sparse library against. These
 * deliberately avoid every sparse kernel under test: everything here runs
 * on Eigen dense matrices with straightforward textbook algorithms.
 */

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "mpk/csr.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense matrix from coordinate entries (duplicates summed).
inline MatrixXd dense_from_triplets(std::size_t n_rows, std::size_t n_cols,
                                    const std::vector<mpk::Triplet>& ts) {
    MatrixXd A = MatrixXd::Zero(static_cast<Eigen::Index>(n_rows),
                                static_cast<Eigen::Index>(n_cols));
    for (const auto& t : ts) A(t.row, t.col) += t.val;
    return A;
}

/// Dense copy of a CSR matrix (conversion only; no kernel logic involved).
inline MatrixXd dense_from_csr(const mpk::CsrMatrix& A) {
    MatrixXd D = MatrixXd::Zero(A.n_rows, A.n_cols);
    for (mpk::index_t r = 0; r < A.n_rows; ++r)
        for (mpk::index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
            D(r, A.col_idx[k]) += A.values[k];
    return D;
}

inline VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> from_eigen(const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

/// y_p = A^p x for p = 1..p_m, computed densely.
inline std::vector<VectorXd> dense_power_apply(const MatrixXd& A, const VectorXd& x,
                                               int p_m) {
    std::vector<VectorXd> out;
    VectorXd cur = x;
    for (int p = 1; p <= p_m; ++p) {
        cur = A * cur;
        out.push_back(cur);
    }
    return out;
}

/// Shifted power sequence y_p = (A - lambda_p I) y_{p-1} with adjacent
/// conjugate pairs evaluated by the two-step real formulation.
inline std::vector<VectorXd> dense_shifted_power_apply(
    const MatrixXd& A, const VectorXd& x, const std::vector<std::complex<double>>& shifts) {
    std::vector<VectorXd> out;
    VectorXd prev2, prev = x;
    for (std::size_t p = 0; p < shifts.size(); ++p) {
        const double a = shifts[p].real();
        const double b = shifts[p].imag();
        VectorXd next;
        if (b == 0.0) {
            next = A * prev - a * prev;
        } else if (b > 0.0) {
            // First member of a conjugate pair.
            next = A * prev - a * prev;
        } else {
            // Second member: y_{p+1} = (A - a I) y_p + b^2 y_{p-1}.
            next = A * prev - a * prev + (b * b) * prev2;
        }
        prev2 = prev;
        prev = next;
        out.push_back(next);
    }
    return out;
}

/// Reference BFS level assignment on the symmetrised pattern: one BFS per
/// connected component from its minimum-degree (tie: minimum index) node,
/// component levels merged by distance. Dense adjacency, O(n^2).
inline std::vector<int> bfs_levels_reference(const MatrixXd& A) {
    const std::size_t n = static_cast<std::size_t>(A.rows());
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && (A(i, j) != 0.0 || A(j, i) != 0.0)) adj[i].push_back(j);

    std::vector<int> level(n, -1);
    std::vector<char> assigned(n, 0);
    for (;;) {
        // Next component root: unassigned node of minimum degree, then index.
        std::size_t root = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (assigned[i]) continue;
            if (root == n || adj[i].size() < adj[root].size()) root = i;
        }
        if (root == n) break;
        std::deque<std::size_t> q{root};
        level[root] = 0;
        assigned[root] = 1;
        while (!q.empty()) {
            const std::size_t u = q.front();
            q.pop_front();
            for (std::size_t v : adj[u]) {
                if (!assigned[v]) {
                    assigned[v] = 1;
                    level[v] = level[u] + 1;
                    q.push_back(v);
                }
            }
        }
    }
    return level;
}

/// Dense restarted GMRES with right preconditioning by an explicit dense
/// inverse-apply (identity by default). Returns the relative residual
/// history (initial entry included) and the iteration count.
struct DenseGmresResult {
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
    VectorXd x;
};

inline DenseGmresResult dense_gmres(const MatrixXd& A, const VectorXd& b, int m,
                                    double tol, int max_iters,
                                    const MatrixXd* right_pinv = nullptr) {
    const Eigen::Index n = A.rows();
    DenseGmresResult res;
    res.x = VectorXd::Zero(n);
    const double bnorm = b.norm();
    const double denom = bnorm > 0.0 ? bnorm : 1.0;
    VectorXd r = b - A * res.x;
    res.history.push_back(r.norm() / denom);
    if (res.history.back() <= tol) {
        res.converged = true;
        return res;
    }
    while (res.iterations < max_iters) {
        const double beta = r.norm();
        MatrixXd Q(n, m + 1);
        MatrixXd H = MatrixXd::Zero(m + 1, m);
        Q.col(0) = r / beta;
        int j = 0;
        for (; j < m && res.iterations < max_iters; ++j) {
            VectorXd w = Q.col(j);
            if (right_pinv) w = (*right_pinv) * w;
            w = A * w;
            for (int i = 0; i <= j; ++i) {
                H(i, j) = Q.col(i).dot(w);
                w -= H(i, j) * Q.col(i);
            }
            H(j + 1, j) = w.norm();
            if (H(j + 1, j) > 0.0) Q.col(j + 1) = w / H(j + 1, j);
            ++res.iterations;

            VectorXd rhs = VectorXd::Zero(j + 2);
            rhs(0) = beta;
            const VectorXd y =
                H.topLeftCorner(j + 2, j + 1).colPivHouseholderQr().solve(rhs);
            const double rel =
                (rhs - H.topLeftCorner(j + 2, j + 1) * y).norm() / denom;
            res.history.push_back(rel);
            if (rel <= tol || H(j + 1, j) == 0.0) {
                ++j;
                break;
            }
        }
        // Form the restart iterate from the last least-squares solution.
        VectorXd rhs = VectorXd::Zero(j + 1);
        rhs(0) = beta;
        const VectorXd y = H.topLeftCorner(j + 1, j).colPivHouseholderQr().solve(rhs);
        VectorXd upd = Q.leftCols(j) * y;
        if (right_pinv) upd = (*right_pinv) * upd;
        res.x += upd;
        r = b - A * res.x;
        if (r.norm() / denom <= tol) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

/// Dense mirror of the first-kind Chebyshev smoother recurrence on the
/// diagonally scaled system, interval [alpha, beta].
inline VectorXd cheb_recurrence_dense(const MatrixXd& A, const VectorXd& dinv,
                                      double alpha, double beta, int degree,
                                      const VectorXd& b, const VectorXd& x0) {
    const double theta = 0.5 * (beta + alpha);
    const double delta = 0.5 * (beta - alpha);
    VectorXd x = x0;
    VectorXd r = b - A * x;
    VectorXd z = dinv.cwiseProduct(r);
    if (delta == 0.0) {
        // Point interval: plain Richardson with step 1/theta.
        for (int k = 0; k < degree; ++k) {
            x += z / theta;
            if (k + 1 < degree) {
                r = b - A * x;
                z = dinv.cwiseProduct(r);
            }
        }
        return x;
    }
    const double sigma = theta / delta;
    VectorXd d = z / theta;
    x += d;
    double rho_prev = 1.0 / sigma;
    for (int k = 1; k < degree; ++k) {
        r -= A * d;
        z = dinv.cwiseProduct(r);
        const double rho = 1.0 / (2.0 * sigma - rho_prev);
        d = rho * rho_prev * d + (2.0 * rho / delta) * z;
        x += d;
        rho_prev = rho;
    }
    return x;
}

/// Reference modified Leja ordering: start at max modulus, then repeatedly
/// pick the candidate maximising the product of distances to everything
/// already chosen (log-sum form); conjugate pairs stay adjacent. Ties break
/// toward the earlier candidate.
inline std::vector<std::complex<double>> leja_order_reference(
    std::vector<std::complex<double>> vals) {
    std::vector<std::complex<double>> out;
    std::vector<char> taken(vals.size(), 0);
    auto take_with_conjugate = [&](std::size_t i) {
        out.push_back(vals[i]);
        taken[i] = 1;
        if (vals[i].imag() != 0.0) {
            const std::complex<double> conj = std::conj(vals[i]);
            for (std::size_t k = 0; k < vals.size(); ++k) {
                if (!taken[k] && vals[k] == conj) {
                    out.push_back(vals[k]);
                    taken[k] = 1;
                    break;
                }
            }
        }
    };
    // Seed: maximum modulus.
    std::size_t best = vals.size();
    for (std::size_t i = 0; i < vals.size(); ++i)
        if (!taken[i] && (best == vals.size() || std::abs(vals[i]) > std::abs(vals[best])))
            best = i;
    if (best == vals.size()) return out;
    take_with_conjugate(best);
    while (out.size() < vals.size()) {
        best = vals.size();
        long double best_score = -std::numeric_limits<long double>::infinity();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (taken[i]) continue;
            long double score = 0.0L;
            for (const auto& c : out) {
                const long double dist = std::abs(vals[i] - c);
                score += dist > 0.0L ? std::log10(dist)
                                     : -std::numeric_limits<long double>::infinity();
            }
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        if (best == vals.size()) break;
        take_with_conjugate(best);
    }
    return out;
}

/// Frobenius-norm defect of the Arnoldi relation A Q_j = Q_{j+1} Hbar.
inline double arnoldi_defect(const MatrixXd& A, const MatrixXd& Q_jp1,
                             const MatrixXd& Hbar) {
    const Eigen::Index j = Hbar.cols();
    return (A * Q_jp1.leftCols(j) - Q_jp1 * Hbar).norm();
}

}  // namespace oracle
