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

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "mpk/generators.hpp"
#include "mpk/gmres.hpp"
#include "mpk/levels.hpp"
#include "mpk/sstep.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using mpk::Complex;
using mpk::CsrMatrix;
using mpk::index_t;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

CsrMatrix diag_csr(const std::vector<double>& d) {
    std::vector<mpk::Triplet> t;
    for (index_t i = 0; i < d.size(); ++i) t.push_back({i, i, d[i]});
    return mpk::from_coo(d.size(), d.size(), t);
}

// 1D convection-diffusion with strong convection: tridiag(-1-c, 2, -1+c).
// For c > 1 the spectrum is complex, exercising the conjugate-pair shifts.
CsrMatrix convection1d(index_t n, double c) {
    std::vector<mpk::Triplet> t;
    for (index_t i = 0; i < n; ++i) {
        if (i > 0) t.push_back({i, i - 1, -1.0 - c});
        t.push_back({i, i, 2.0});
        if (i + 1 < n) t.push_back({i, i + 1, -1.0 + c});
    }
    return mpk::from_coo(n, n, t);
}

double true_relres(const CsrMatrix& a, const std::vector<double>& x,
                   const std::vector<double>& b) {
    std::vector<double> w(a.n_rows);
    mpk::spmv(a, x, w);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        num += (b[i] - w[i]) * (b[i] - w[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::sqrt(den);
}

}  // namespace

TEST(Sstep, RejectsUnfuseablePreconditioners) {
    const CsrMatrix a = mpk::poisson2d(8, 8);
    const std::vector<double> b = random_vector(a.n_rows, 3);
    mpk::SolverConfig cfg;
    cfg.s = 2;

    for (mpk::PreconKind kind :
         {mpk::PreconKind::poly, mpk::PreconKind::cheby, mpk::PreconKind::amg}) {
        mpk::PreconSpec spec;
        spec.kind = kind;
        spec.degree = 2;
        spec.max_levels = 2;
        spec.coarse_threshold = 16;
        const mpk::Precon p = mpk::precon_setup(a, spec, b);
        std::vector<double> x;
        EXPECT_THROW(mpk::sstep_gmres(a, b, x, cfg, p), std::invalid_argument);
        EXPECT_THROW(mpk::sstep_sub_powers(p), std::invalid_argument);
        EXPECT_THROW(mpk::sstep_plan_powers(p, 2), std::invalid_argument);
    }
}

TEST(Sstep, SubAndPlanPowerHelpers) {
    const CsrMatrix a = mpk::poisson1d(16);
    const std::vector<double> b(16, 1.0);

    mpk::Precon none;
    EXPECT_EQ(mpk::sstep_sub_powers(none), 1);
    EXPECT_EQ(mpk::sstep_plan_powers(none, 4), 4);

    mpk::PreconSpec jspec;
    jspec.kind = mpk::PreconKind::jacobi;
    jspec.sweeps = 3;
    const mpk::Precon jac = mpk::precon_setup(a, jspec, b);
    EXPECT_EQ(mpk::sstep_sub_powers(jac), 4);  // k + 1 stages for k >= 2
    EXPECT_EQ(mpk::sstep_plan_powers(jac, 4), 4);

    mpk::PreconSpec gspec;
    gspec.kind = mpk::PreconKind::gs2;
    gspec.gamma = 2;
    gspec.sweeps = 2;
    const mpk::Precon gs = mpk::precon_setup(a, gspec, b);
    EXPECT_EQ(mpk::sstep_sub_powers(gs), 4);  // gamma + 2
    EXPECT_EQ(mpk::sstep_plan_powers(gs, 4), 8);  // s * sweeps
}

TEST(Sstep, NewtonShiftsOnScaledIdentity) {
    const CsrMatrix a = diag_csr(std::vector<double>(10, 2.0));
    const std::vector<double> b = random_vector(10, 5);
    const std::vector<Complex> shifts =
        mpk::compute_newton_shifts(a, mpk::Precon{}, 4, 8, b);
    ASSERT_EQ(shifts.size(), 4u);
    for (const Complex& s : shifts) {
        EXPECT_NEAR(s.real(), 2.0, 1e-12);
        EXPECT_EQ(s.imag(), 0.0);
    }
    EXPECT_NO_THROW(mpk::check_shift_chain(shifts, "test"));
}

TEST(Sstep, NewtonShiftsOnDiagonalMatrix) {
    const CsrMatrix a = diag_csr({1.0, 2.0, 3.0, 4.0});
    const std::vector<double> b(4, 1.0);  // equal weight on every eigenvector
    const std::vector<Complex> shifts =
        mpk::compute_newton_shifts(a, mpk::Precon{}, 2, 4, b);
    ASSERT_EQ(shifts.size(), 2u);
    // Leja ordering starts at the extreme eigenvalue and then takes the most
    // distant one.
    EXPECT_NEAR(shifts[0].real(), 4.0, 1e-8);
    EXPECT_NEAR(shifts[1].real(), 1.0, 1e-8);
}

TEST(Sstep, ShiftWarmupRespectsConjugatePairs) {
    const CsrMatrix a = convection1d(32, 1.5);
    const std::vector<double> b = random_vector(32, 7);
    for (int s : {2, 3, 5}) {
        const std::vector<Complex> shifts =
            mpk::compute_newton_shifts(a, mpk::Precon{}, s, 10, b);
        ASSERT_EQ(shifts.size(), static_cast<std::size_t>(s));
        EXPECT_NO_THROW(mpk::check_shift_chain(shifts, "test"));
        for (std::size_t i = 0; i < shifts.size(); ++i) {
            if (shifts[i].imag() != 0.0) {
                ASSERT_GT(shifts[i].imag(), 0.0);
                ASSERT_LT(i + 1, shifts.size());
                EXPECT_EQ(shifts[i + 1], std::conj(shifts[i]));
                ++i;
            }
        }
    }
}

TEST(Sstep, SingleStepMatchesClassicalGmres) {
    const CsrMatrix a = mpk::poisson2d(24, 24);
    const std::vector<double> b = random_vector(a.n_rows, 11);
    mpk::SolverConfig cfg;
    cfg.m = 60;
    cfg.tol = 1e-8;
    cfg.max_iters = 600;

    mpk::PreconSpec jspec;
    jspec.kind = mpk::PreconKind::jacobi;
    jspec.sweeps = 2;
    for (const bool use_jacobi : {false, true}) {
        const mpk::Precon precon =
            use_jacobi ? mpk::precon_setup(a, jspec, b) : mpk::Precon{};
        std::vector<double> xc, xs;
        const mpk::SolveReport rc = mpk::gmres(a, b, xc, cfg, precon);
        mpk::SolverConfig scfg = cfg;
        scfg.s = 1;
        const mpk::SolveReport rs = mpk::sstep_gmres(a, b, xs, scfg, precon);
        ASSERT_TRUE(rc.converged);
        ASSERT_TRUE(rs.converged);
        EXPECT_LE(std::abs(rc.iterations - rs.iterations), 1);
        const std::size_t common =
            std::min(rc.residual_history.size(), rs.residual_history.size());
        for (std::size_t k = 0; k < common; ++k)
            EXPECT_NEAR(rc.residual_history[k], rs.residual_history[k], 1e-8)
                << "entry " << k << " jacobi=" << use_jacobi;
    }
}

TEST(Sstep, IterationCountsTrackClassicalWithinBlockSize) {
    const CsrMatrix a = mpk::poisson2d(32, 32);
    const std::vector<double> b = random_vector(a.n_rows, 13);
    mpk::SolverConfig cfg;
    cfg.m = 200;
    cfg.tol = 1e-8;
    cfg.max_iters = 400;

    std::vector<double> xc;
    const mpk::SolveReport rc = mpk::gmres(a, b, xc, cfg, mpk::Precon{});
    ASSERT_TRUE(rc.converged);

    for (int s : {2, 4}) {
        mpk::SolverConfig scfg = cfg;
        scfg.s = s;
        std::vector<double> xs;
        const mpk::SolveReport rs = mpk::sstep_gmres(a, b, xs, scfg, mpk::Precon{});
        EXPECT_TRUE(rs.converged) << "s=" << s;
        EXPECT_LE(true_relres(a, xs, b), cfg.tol) << "s=" << s;
        EXPECT_LE(std::abs(rs.iterations - rc.iterations), s) << "s=" << s;
    }
}

TEST(Sstep, HistoryMonotoneWithinCycleAndOvershootBounded) {
    const CsrMatrix a = mpk::poisson2d(20, 20);
    const std::vector<double> b = random_vector(a.n_rows, 17);
    mpk::SolverConfig cfg;
    cfg.m = 80;
    cfg.s = 4;
    cfg.tol = 1e-8;
    cfg.max_iters = 300;
    std::vector<double> x;
    const mpk::SolveReport rep = mpk::sstep_gmres(a, b, x, cfg, mpk::Precon{});
    ASSERT_TRUE(rep.converged);
    EXPECT_EQ(rep.restarts, 0);
    ASSERT_EQ(rep.residual_history.size(),
              static_cast<std::size_t>(rep.iterations) + 1);
    for (int it = 1; it < rep.iterations; ++it)
        EXPECT_LE(rep.residual_history[static_cast<std::size_t>(it) + 1],
                  rep.residual_history[static_cast<std::size_t>(it)] + 1e-12)
            << "at iteration " << it;
    // Convergence is only checked at block boundaries, so at most s - 1
    // columns run past the first estimate that crossed the tolerance.
    std::size_t first = 0;
    while (first < rep.residual_history.size() &&
           rep.residual_history[first] > cfg.tol)
        ++first;
    EXPECT_LE(static_cast<std::size_t>(rep.iterations), first + cfg.s - 1);
}

TEST(Sstep, ArnoldiRelationAndBasisOrthonormality) {
    const CsrMatrix a = mpk::poisson2d(16, 16);
    const std::size_t n = a.n_rows;
    const std::vector<double> b = random_vector(n, 19);
    mpk::PreconSpec jspec;
    jspec.kind = mpk::PreconKind::jacobi;
    jspec.sweeps = 2;
    const mpk::Precon precon = mpk::precon_setup(a, jspec, b);

    mpk::SolverConfig cfg;
    cfg.m = 40;
    cfg.s = 3;
    cfg.tol = 1e-8;
    mpk::detail::CycleCapture cap;
    std::vector<double> x;
    const mpk::SolveReport rep =
        mpk::sstep_gmres(a, b, x, cfg, precon, nullptr, 0, &cap);
    ASSERT_TRUE(rep.converged);
    ASSERT_GE(cap.cols, 3);

    const int cols = cap.cols;
    Eigen::MatrixXd q(n, cols + 1);
    for (int c = 0; c <= cols; ++c)
        for (std::size_t i = 0; i < n; ++i)
            q(static_cast<Eigen::Index>(i), c) =
                cap.q[static_cast<std::size_t>(c) * n + i];
    Eigen::MatrixXd hbar = Eigen::MatrixXd::Zero(cols + 1, cols);
    for (int c = 0; c < cols; ++c)
        for (int i = 0; i <= c + 1; ++i)
            hbar(i, c) = cap.h[static_cast<std::size_t>(c) * cap.ld + i];

    Eigen::MatrixXd a_op(n, n);
    std::vector<double> e(n, 0.0), w;
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        mpk::precon_op(precon, a, e, w);
        for (std::size_t i = 0; i < n; ++i)
            a_op(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w[i];
        e[j] = 0.0;
    }

    const double defect = oracle::arnoldi_defect(a_op, q, hbar);
    EXPECT_LE(defect, 1e-10 * a_op.norm() * std::sqrt(static_cast<double>(cols)));

    const Eigen::MatrixXd gram =
        q.transpose() * q - Eigen::MatrixXd::Identity(cols + 1, cols + 1);
    EXPECT_LE(gram.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Sstep, BlockedBasisPathIsBitwiseIdentical) {
    const CsrMatrix a0 = mpk::poisson2d(32, 32);
    const mpk::LevelStructure ls = mpk::build_levels(a0);
    const CsrMatrix a = mpk::permute(a0, ls.perm);
    const std::vector<double> b = random_vector(a.n_rows, 23);
    mpk::SolverConfig cfg;
    cfg.m = 30;
    cfg.s = 4;
    cfg.tol = 1e-8;
    cfg.max_iters = 600;

    struct Case {
        const char* name;
        mpk::PreconSpec spec;
    };
    std::vector<Case> cases;
    {
        Case c{"none", {}};
        cases.push_back(c);
    }
    {
        Case c{"jacobi1", {}};
        c.spec.kind = mpk::PreconKind::jacobi;
        c.spec.sweeps = 1;
        cases.push_back(c);
    }
    {
        Case c{"jacobi2", {}};
        c.spec.kind = mpk::PreconKind::jacobi;
        c.spec.sweeps = 2;
        cases.push_back(c);
    }
    {
        Case c{"gs2_g1k1", {}};
        c.spec.kind = mpk::PreconKind::gs2;
        c.spec.gamma = 1;
        c.spec.sweeps = 1;
        cases.push_back(c);
    }
    {
        Case c{"gs2_g2k2", {}};
        c.spec.kind = mpk::PreconKind::gs2;
        c.spec.gamma = 2;
        c.spec.sweeps = 2;
        cases.push_back(c);
    }

    for (const Case& c : cases) {
        const mpk::Precon precon = mpk::precon_setup(a, c.spec, b);
        mpk::ExecutionPlan plan = mpk::group_levels(
            ls, a, 32 * 1024, mpk::sstep_plan_powers(precon, cfg.s));
        plan.sub_powers = mpk::sstep_sub_powers(precon);

        std::vector<double> xs, xb;
        const mpk::SolveReport rs = mpk::sstep_gmres(a, b, xs, cfg, precon);
        const mpk::SolveReport rb = mpk::sstep_gmres(a, b, xb, cfg, precon, &plan);
        EXPECT_TRUE(rs.converged) << c.name;
        EXPECT_EQ(rs.iterations, rb.iterations) << c.name;
        EXPECT_TRUE(testutil::bitwise_equal(rs.residual_history, rb.residual_history))
            << c.name;
        EXPECT_TRUE(testutil::bitwise_equal(xs, xb)) << c.name;
        for (int threads : {2, 4}) {
            std::vector<double> xt;
            const mpk::SolveReport rt =
                mpk::sstep_gmres(a, b, xt, cfg, precon, &plan, threads);
            EXPECT_TRUE(testutil::bitwise_equal(xs, xt)) << c.name << " t" << threads;
        }
    }
}

TEST(Sstep, ComplexShiftPairsOnNonsymmetricMatrix) {
    const CsrMatrix a = convection1d(48, 1.5);
    const std::vector<double> b = random_vector(48, 29);

    // Confirm the warm-up actually produces conjugate pairs here, so the
    // two-term recurrence correction is exercised.
    const std::vector<Complex> shifts =
        mpk::compute_newton_shifts(a, mpk::Precon{}, 6, 12, b);
    bool has_pair = false;
    for (const Complex& s : shifts) has_pair = has_pair || s.imag() != 0.0;
    EXPECT_TRUE(has_pair);

    mpk::SolverConfig cfg;
    cfg.m = 48;
    cfg.s = 6;
    cfg.tol = 1e-8;
    cfg.max_iters = 300;
    std::vector<double> x;
    const mpk::SolveReport rep = mpk::sstep_gmres(a, b, x, cfg, mpk::Precon{});
    EXPECT_TRUE(rep.converged);
    EXPECT_LE(true_relres(a, x, b), cfg.tol);

    // A restart length that cuts blocks (and possibly pairs) mid-sequence
    // must still work: the cut member degrades to its real part.
    cfg.m = 10;
    cfg.s = 4;
    std::vector<double> x2;
    const mpk::SolveReport rep2 = mpk::sstep_gmres(a, b, x2, cfg, mpk::Precon{});
    EXPECT_TRUE(rep2.converged);
    EXPECT_LE(true_relres(a, x2, b), cfg.tol);
}

TEST(Sstep, IdentityConvergesViaHappyBreakdownFold) {
    const CsrMatrix a = diag_csr(std::vector<double>(16, 1.0));
    const std::vector<double> b = random_vector(16, 31);
    mpk::SolverConfig cfg;
    cfg.m = 8;
    cfg.s = 4;
    cfg.tol = 1e-10;
    std::vector<double> x;
    const mpk::SolveReport rep = mpk::sstep_gmres(a, b, x, cfg, mpk::Precon{});
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.iterations, 1);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(x[i], b[i], 1e-12);
}

TEST(Sstep, RankDeficientBlockShrinksAndConverges) {
    std::vector<double> d(20, 1.0);
    for (std::size_t i = 10; i < 20; ++i) d[i] = 2.0;
    const CsrMatrix a = diag_csr(d);
    const std::vector<double> b = random_vector(20, 37);
    mpk::SolverConfig cfg;
    cfg.m = 10;
    cfg.s = 4;
    cfg.tol = 1e-10;
    std::vector<double> x;
    const mpk::SolveReport rep = mpk::sstep_gmres(a, b, x, cfg, mpk::Precon{});
    // The Krylov space has dimension two: the first block must shrink, the
    // second degenerates into the happy-breakdown fold.
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.iterations, 2);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(x[i], b[i] / d[i], 1e-12);
}

TEST(Sstep, ZeroRhsReturnsImmediately) {
    const CsrMatrix a = mpk::poisson1d(12);
    const std::vector<double> b(12, 0.0);
    mpk::SolverConfig cfg;
    cfg.s = 3;
    cfg.m = 6;
    std::vector<double> x;
    const mpk::SolveReport rep = mpk::sstep_gmres(a, b, x, cfg, mpk::Precon{});
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.iterations, 0);
    EXPECT_EQ(rep.effective_spmvs, 0.0);
    for (double v : x) EXPECT_EQ(v, 0.0);
}

TEST(Sstep, PlanValidationRejectsMismatch) {
    const CsrMatrix a0 = mpk::poisson2d(12, 12);
    const mpk::LevelStructure ls = mpk::build_levels(a0);
    const CsrMatrix a = mpk::permute(a0, ls.perm);
    const std::vector<double> b = random_vector(a.n_rows, 41);
    mpk::SolverConfig cfg;
    cfg.m = 12;
    cfg.s = 4;

    // Power budget below s.
    mpk::ExecutionPlan small = mpk::group_levels(ls, a, 32 * 1024, cfg.s - 1);
    std::vector<double> x;
    EXPECT_THROW(mpk::sstep_gmres(a, b, x, cfg, mpk::Precon{}, &small),
                 std::invalid_argument);

    // Wrong sub-power stage count for the fused GS2 chain.
    mpk::PreconSpec gspec;
    gspec.kind = mpk::PreconKind::gs2;
    gspec.gamma = 1;
    const mpk::Precon gs = mpk::precon_setup(a, gspec, b);
    mpk::ExecutionPlan plan =
        mpk::group_levels(ls, a, 32 * 1024, mpk::sstep_plan_powers(gs, cfg.s));
    plan.sub_powers = 2;  // chain needs gamma + 2 == 3
    std::vector<double> x2;
    EXPECT_THROW(mpk::sstep_gmres(a, b, x2, cfg, gs, &plan), std::invalid_argument);
}
