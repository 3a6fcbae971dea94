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
 * Command-line driver for the cache-blocked power-kernel solver library.
 *
 * Subcommands:
 *   mpk-bench  time the plain power kernel, baseline vs. cache-blocked,
 *              over a power range; verifies bitwise agreement per power
 *   solve      run the configured solver twice (baseline kernels, then
 *              cache-blocked kernels), require bitwise agreement, and
 *              report per-phase timings and the speedup
 *   levels     dump the BFS level structure and grouping statistics as JSON
 *   tune       sweep the power range and persist the best power to a
 *              sidecar JSON keyed by matrix hash and cache budget
 *
 * Matrices come from Matrix Market files or generator specs
 * (poisson1d:N, poisson2d:NX,NY, poisson3d:NX,NY,NZ, random:N,K[,SEED]).
 * Thread count: --threads beats the config "threads" key, which beats the
 * MPK_NUM_THREADS environment variable, which beats hardware concurrency.
 *
 * Exit codes: 0 success, 1 numerical failure (divergence or verification
 * mismatch), 2 usage, I/O or configuration error.
 */

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mpk/config.hpp"
#include "mpk/csr.hpp"
#include "mpk/generators.hpp"
#include "mpk/gmres.hpp"
#include "mpk/levels.hpp"
#include "mpk/matrix_market.hpp"
#include "mpk/mpk.hpp"
#include "mpk/plan.hpp"
#include "mpk/precon.hpp"
#include "mpk/sstep.hpp"
#include "mpk/threading.hpp"
#include "mpk/vector_block.hpp"

namespace {

using ojson = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared options
// ---------------------------------------------------------------------------

struct DriverOptions {
    std::string matrix;
    std::string config_path;
    int cache_mb = 0;  ///< 0: config value, then 32 MiB default
    int threads = 0;   ///< 0: config value, then MPK_NUM_THREADS, then hardware
    std::string out;   ///< empty: stdout
    std::string format;
};

void add_common_options(CLI::App* cmd, DriverOptions& opt) {
    cmd->add_option("--matrix", opt.matrix,
                    "Matrix Market file or generator spec: poisson1d:N, "
                    "poisson2d:NX,NY, poisson3d:NX,NY,NZ, random:N,K[,SEED]")
        ->required();
    cmd->add_option("--config", opt.config_path, "JSON run configuration file");
    cmd->add_option("--cache-mb", opt.cache_mb,
                    "Cache budget in MiB for the blocking plan (overrides config)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--threads", opt.threads,
                    "Worker threads (overrides config and MPK_NUM_THREADS)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", opt.out, "Write the report to this file instead of stdout");
    cmd->add_option("--format", opt.format, "Report format")
        ->check(CLI::IsMember({"csv", "json"}));
}

mpk::RunConfig load_run(const DriverOptions& opt) {
    if (opt.config_path.empty()) return mpk::RunConfig{};
    return mpk::load_config(opt.config_path);
}

int effective_threads(const DriverOptions& opt, const mpk::RunConfig& run) {
    return opt.threads > 0 ? opt.threads : run.threads;
}

std::size_t effective_cache(const DriverOptions& opt, const mpk::RunConfig& run) {
    if (opt.cache_mb > 0) return static_cast<std::size_t>(opt.cache_mb) << 20;
    if (run.config.mpk.cache_bytes > 0) return run.config.mpk.cache_bytes;
    return std::size_t{32} << 20;
}

void emit(const DriverOptions& opt, const std::string& text) {
    if (opt.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(opt.out);
    if (!f) throw std::invalid_argument("cannot open output file " + opt.out);
    f << text;
}

// ---------------------------------------------------------------------------
// Matrix loading
// ---------------------------------------------------------------------------

std::vector<long long> parse_int_list(const std::string& args, const std::string& spec) {
    std::vector<long long> vals;
    std::stringstream ss(args);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            vals.push_back(std::stoll(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad matrix spec \"" + spec + "\": \"" + tok +
                                        "\" is not an integer");
        }
    }
    for (long long v : vals)
        if (v < 1)
            throw std::invalid_argument("bad matrix spec \"" + spec +
                                        "\": dimensions must be >= 1");
    return vals;
}

bool is_generator_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) return false;
    const std::string name = spec.substr(0, colon);
    return name == "poisson1d" || name == "poisson2d" || name == "poisson3d" ||
           name == "random";
}

mpk::CsrMatrix load_matrix(const std::string& spec) {
    if (!is_generator_spec(spec)) return mpk::read_matrix_market(spec);
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    const std::vector<long long> v = parse_int_list(spec.substr(colon + 1), spec);
    auto expect = [&](std::size_t lo, std::size_t hi) {
        if (v.size() < lo || v.size() > hi)
            throw std::invalid_argument("bad matrix spec \"" + spec +
                                        "\": wrong number of arguments");
    };
    if (name == "poisson1d") {
        expect(1, 1);
        return mpk::poisson1d(static_cast<mpk::index_t>(v[0]));
    }
    if (name == "poisson2d") {
        expect(2, 2);
        return mpk::poisson2d(static_cast<mpk::index_t>(v[0]),
                              static_cast<mpk::index_t>(v[1]));
    }
    if (name == "poisson3d") {
        expect(3, 3);
        return mpk::poisson3d(static_cast<mpk::index_t>(v[0]),
                              static_cast<mpk::index_t>(v[1]),
                              static_cast<mpk::index_t>(v[2]));
    }
    expect(2, 3);  // random:N,K[,SEED]; symmetrized so BFS levels stay valid
    const unsigned seed = v.size() == 3 ? static_cast<unsigned>(v[2]) : 1u;
    return mpk::random_spd(static_cast<mpk::index_t>(v[0]), static_cast<int>(v[1]), seed);
}

// ---------------------------------------------------------------------------
// Matrix hashing (FNV-1a over dimensions, structure and values)
// ---------------------------------------------------------------------------

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string matrix_hash(const mpk::CsrMatrix& a) {
    std::uint64_t h = 1469598103934665603ull;
    const std::int64_t dims[2] = {a.n_rows, a.n_cols};
    h = fnv1a(dims, sizeof(dims), h);
    h = fnv1a(a.row_ptr.data(), a.row_ptr.size() * sizeof(a.row_ptr[0]), h);
    h = fnv1a(a.col_idx.data(), a.col_idx.size() * sizeof(a.col_idx[0]), h);
    h = fnv1a(a.values.data(), a.values.size() * sizeof(double), h);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string default_sidecar(const std::string& spec) {
    if (!is_generator_spec(spec)) return spec + ".tune.json";
    std::string s = spec;
    for (char& c : s)
        if (c == ':' || c == ',') c = '_';
    return s + ".tune.json";
}

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

template <typename Fn>
double time_median(Fn&& fn, int reps) {
    fn();  // warm-up: faults pages and loads caches
    std::vector<double> t(reps);
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        fn();
        t[i] = seconds_since(t0);
    }
    std::nth_element(t.begin(), t.begin() + reps / 2, t.end());
    return t[reps / 2];
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

ojson matrix_json(const std::string& spec, const mpk::CsrMatrix& a) {
    return ojson{{"spec", spec},
                 {"n_rows", a.n_rows},
                 {"nnz", a.nnz()},
                 {"hash", matrix_hash(a)}};
}

ojson precon_json(const mpk::PreconSpec& spec) {
    using mpk::PreconKind;
    ojson j{{"type", mpk::to_string(spec.kind)}};
    switch (spec.kind) {
        case PreconKind::none:
            break;
        case PreconKind::jacobi:
            j["sweeps"] = spec.sweeps;
            break;
        case PreconKind::gs2:
            j["sweeps"] = spec.sweeps;
            j["gamma"] = spec.gamma;
            break;
        case PreconKind::poly:
            j["degree"] = spec.degree;
            if (spec.inner != PreconKind::none) {
                ojson inner{{"type", mpk::to_string(spec.inner)}};
                if (spec.inner == PreconKind::jacobi) inner["sweeps"] = spec.inner_sweeps;
                if (spec.inner == PreconKind::gs2) {
                    inner["sweeps"] = spec.inner_sweeps;
                    inner["gamma"] = spec.inner_gamma;
                }
                j["inner"] = inner;
            }
            break;
        case PreconKind::cheby:
            j["degree"] = spec.degree;
            j["eig_ratio"] = spec.eig_ratio;
            j["boost"] = spec.boost;
            break;
        case PreconKind::amg:
            j["smoother"] = spec.smoother == mpk::AmgSmootherSpec::Kind::gs2 ? "gs2" : "cheby";
            if (spec.smoother == mpk::AmgSmootherSpec::Kind::gs2) {
                j["sweeps"] = spec.sweeps;
                j["gamma"] = spec.gamma;
            } else {
                j["degree"] = spec.degree;
            }
            j["max_levels"] = spec.max_levels;
            j["coarse_threshold"] = spec.coarse_threshold;
            break;
    }
    return j;
}

ojson report_json(const mpk::SolveReport& rep, double solve_s, double extra_misc = 0.0) {
    return ojson{{"converged", rep.converged},
                 {"status", mpk::to_string(rep.status)},
                 {"iterations", rep.iterations},
                 {"restarts", rep.restarts},
                 {"final_relres", rep.final_relres},
                 {"effective_spmvs", rep.effective_spmvs},
                 {"mpk_s", rep.timings.mpk},
                 {"ortho_s", rep.timings.ortho},
                 {"misc_s", rep.timings.misc + extra_misc},
                 {"solve_s", solve_s}};
}

// ---------------------------------------------------------------------------
// levels
// ---------------------------------------------------------------------------

int run_levels(const DriverOptions& opt) {
    if (opt.format == "csv")
        throw std::invalid_argument("the levels report is JSON only");
    const mpk::RunConfig run = load_run(opt);
    const std::size_t cache = effective_cache(opt, run);
    const mpk::CsrMatrix a = load_matrix(opt.matrix);

    const auto t0 = Clock::now();
    const mpk::LevelStructure ls = mpk::build_levels(a);
    const mpk::CsrMatrix a_perm = mpk::permute(a, ls.perm);
    // Grouping depends on the power depth; use the configured optimum when
    // one is given, otherwise a representative mid-range depth.
    const int p_m = run.config.mpk.p_opt > 0 ? run.config.mpk.p_opt : 4;
    const mpk::ExecutionPlan plan = mpk::group_levels(ls, a_perm, cache, p_m);
    const double prep_s = seconds_since(t0);

    const bool valid = mpk::validate_levels(a_perm, ls);

    const mpk::index_t n_levels = ls.n_levels();
    std::size_t min_sz = a.n_rows, max_sz = 0;
    for (mpk::index_t l = 0; l < n_levels; ++l) {
        const std::size_t sz = ls.level_ptr[l + 1] - ls.level_ptr[l];
        min_sz = std::min(min_sz, sz);
        max_sz = std::max(max_sz, sz);
    }
    // Histogram over power-of-two size buckets; empty buckets are omitted.
    std::vector<std::size_t> buckets;
    for (mpk::index_t l = 0; l < n_levels; ++l) {
        const std::size_t sz = ls.level_ptr[l + 1] - ls.level_ptr[l];
        std::size_t b = 0, top = 1;
        while (top < sz) {
            top *= 2;
            ++b;
        }
        if (buckets.size() <= b) buckets.resize(b + 1, 0);
        ++buckets[b];
    }
    ojson hist = ojson::array();
    for (std::size_t b = 0; b < buckets.size(); ++b)
        if (buckets[b] > 0)
            hist.push_back(ojson{{"size_max", std::size_t{1} << b}, {"levels", buckets[b]}});

    std::size_t min_fp = plan.group_footprint.empty() ? 0 : plan.group_footprint[0];
    std::size_t max_fp = 0, sum_fp = 0;
    for (std::size_t fp : plan.group_footprint) {
        min_fp = std::min(min_fp, fp);
        max_fp = std::max(max_fp, fp);
        sum_fp += fp;
    }
    const double n_groups = std::max<double>(1.0, plan.n_groups());

    ojson doc{{"matrix", matrix_json(opt.matrix, a)},
              {"levels",
               ojson{{"count", n_levels},
                     {"min_size", n_levels ? min_sz : 0},
                     {"max_size", max_sz},
                     {"mean_size", n_levels ? double(a.n_rows) / n_levels : 0.0},
                     {"histogram", hist}}},
              {"groups",
               ojson{{"count", plan.n_groups()},
                     {"cache_mb", cache >> 20},
                     {"p_m", p_m},
                     {"target_bytes", plan.target_bytes},
                     {"footprint", ojson{{"min", min_fp},
                                         {"max", max_fp},
                                         {"mean", double(sum_fp) / n_groups}}}}},
              {"valid", valid},
              {"preprocessing_s", prep_s}};
    emit(opt, doc.dump(2) + "\n");
    return valid ? 0 : 1;
}

// ---------------------------------------------------------------------------
// mpk-bench
// ---------------------------------------------------------------------------

int run_mpk_bench(const DriverOptions& opt) {
    const mpk::RunConfig run = load_run(opt);
    const int threads = effective_threads(opt, run);
    const std::size_t cache = effective_cache(opt, run);
    const mpk::CsrMatrix a = load_matrix(opt.matrix);
    const mpk::LevelStructure ls = mpk::build_levels(a);
    const mpk::CsrMatrix a_perm = mpk::permute(a, ls.perm);
    const std::vector<double> x(a_perm.n_rows, 1.0);

    struct Row {
        int p;
        double baseline_gflops, race_gflops;
        bool verified;
    };
    std::vector<Row> rows;
    bool all_verified = true;
    for (int p = run.p_lo; p <= run.p_hi; ++p) {
        const mpk::ExecutionPlan plan = mpk::group_levels(ls, a_perm, cache, p);
        mpk::VectorBlock base(a_perm.n_rows, static_cast<std::size_t>(p) + 1);
        mpk::VectorBlock race(a_perm.n_rows, static_cast<std::size_t>(p) + 1);
        const double base_s = time_median(
            [&] { mpk::baseline_mpk(a_perm, x, p, base, threads); }, run.repetitions);
        const double race_s = time_median(
            [&] { mpk::mpk(plan, a_perm, x, p, race, threads); }, run.repetitions);
        const bool verified = std::memcmp(base.slice(0), race.slice(0),
                                          base.rows * base.slices * sizeof(double)) == 0;
        all_verified = all_verified && verified;
        const double flops = 2.0 * a_perm.nnz() * p;
        rows.push_back({p, flops / base_s * 1e-9, flops / race_s * 1e-9, verified});
    }

    if (opt.format == "json") {
        ojson doc{{"matrix", matrix_json(opt.matrix, a)},
                  {"cache_mb", cache >> 20},
                  {"threads", mpk::resolve_threads(threads)},
                  {"repetitions", run.repetitions},
                  {"rows", ojson::array()}};
        for (const Row& r : rows)
            doc["rows"].push_back(ojson{{"p", r.p},
                                        {"baseline_gflops", r.baseline_gflops},
                                        {"race_gflops", r.race_gflops},
                                        {"verified", r.verified}});
        emit(opt, doc.dump(2) + "\n");
    } else {
        std::ostringstream csv;
        csv << "p,baseline_gflops,race_gflops,verified\n" << std::fixed;
        for (const Row& r : rows)
            csv << r.p << ',' << std::setprecision(3) << r.baseline_gflops << ','
                << r.race_gflops << ',' << (r.verified ? 1 : 0) << '\n';
        emit(opt, csv.str());
    }
    return all_verified ? 0 : 1;
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

int run_tune(const DriverOptions& opt) {
    const mpk::RunConfig run = load_run(opt);
    const int threads = effective_threads(opt, run);
    const std::size_t cache = effective_cache(opt, run);
    const mpk::CsrMatrix a = load_matrix(opt.matrix);
    const mpk::LevelStructure ls = mpk::build_levels(a);
    const mpk::CsrMatrix a_perm = mpk::permute(a, ls.perm);

    const mpk::TuneResult res =
        mpk::tune_p(ls, a_perm, cache, run.p_lo, run.p_hi, threads, run.repetitions);

    const std::string sidecar = opt.out.empty() ? default_sidecar(opt.matrix) : opt.out;
    ojson doc{{"matrix", opt.matrix},
              {"matrix_hash", matrix_hash(a)},
              {"cache_mb", cache >> 20},
              {"p_opt", res.p_opt},
              {"table", ojson::array()},
              {"sidecar", sidecar}};
    for (const auto& [p, gflops] : res.table)
        doc["table"].push_back(ojson{{"p", p}, {"gflops", gflops}});

    {
        std::ofstream f(sidecar);
        if (!f) throw std::invalid_argument("cannot open output file " + sidecar);
        f << doc.dump(2) << "\n";
    }
    if (opt.format == "csv") {
        std::ostringstream csv;
        csv << "p,gflops\n" << std::fixed << std::setprecision(3);
        for (const auto& [p, gflops] : res.table) csv << p << ',' << gflops << '\n';
        std::cout << csv.str();
    } else {
        std::cout << doc.dump(2) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

mpk::SolveReport dispatch_solve(mpk::SolverKind kind, const mpk::CsrMatrix& a,
                                const std::vector<double>& b, std::vector<double>& x,
                                const mpk::SolverConfig& cfg, const mpk::Precon& pre,
                                const mpk::ExecutionPlan* plan, int threads) {
    return kind == mpk::SolverKind::gmres
               ? mpk::gmres(a, b, x, cfg, pre, plan, threads)
               : mpk::sstep_gmres(a, b, x, cfg, pre, plan, threads);
}

/// Resolves the s-step block size when the config leaves it at 0 (auto):
/// an explicit p_opt wins, then a matching tuner sidecar, then an inline
/// power-range sweep on this matrix.
int resolve_block_size(const mpk::RunConfig& run, const DriverOptions& opt,
                       const mpk::CsrMatrix& a, const mpk::LevelStructure& ls,
                       const mpk::CsrMatrix& a_perm, std::size_t cache, int threads,
                       std::string& source) {
    auto clamp = [&](int s) { return std::max(1, std::min(s, run.config.m)); };
    if (run.config.mpk.p_opt > 0) {
        source = "config";
        return clamp(run.config.mpk.p_opt);
    }
    const std::string sidecar = default_sidecar(opt.matrix);
    std::ifstream in(sidecar);
    if (in) {
        try {
            const nlohmann::json j = nlohmann::json::parse(in);
            if (j.value("matrix_hash", std::string()) == matrix_hash(a) &&
                j.value("cache_mb", std::size_t{0}) == (cache >> 20)) {
                source = "sidecar " + sidecar;
                return clamp(j.at("p_opt").get<int>());
            }
        } catch (const nlohmann::json::exception&) {
            // stale or foreign file: fall through to inline tuning
        }
    }
    const mpk::TuneResult res =
        mpk::tune_p(ls, a_perm, cache, run.p_lo, run.p_hi, threads, run.repetitions);
    source = "tuned";
    return clamp(res.p_opt);
}

int run_solve_single(const DriverOptions& opt, const mpk::RunConfig& run,
                     const mpk::CsrMatrix& a, const std::vector<double>& b) {
    const int threads = effective_threads(opt, run);
    const std::size_t cache = effective_cache(opt, run);

    // Level preprocessing: BFS levels, permutation, grouping. Charged to the
    // blocked run's misc bucket, since only that run needs it.
    const auto tp0 = Clock::now();
    const mpk::LevelStructure ls = mpk::build_levels(a);
    const mpk::CsrMatrix a_perm = mpk::permute(a, ls.perm);
    const std::vector<double> b_perm = mpk::permute_vector(b, ls.perm);
    double prep_s = seconds_since(tp0);

    mpk::SolverConfig cfg = run.config;
    std::string s_source = "config";
    if (run.solver == mpk::SolverKind::sstep_gmres && cfg.s == 0)
        cfg.s = resolve_block_size(run, opt, a, ls, a_perm, cache, threads, s_source);
    if (run.solver == mpk::SolverKind::gmres && cfg.s < 1) cfg.s = 1;

    const auto ts0 = Clock::now();
    const mpk::Precon pre = mpk::precon_setup(a_perm, cfg.precon, b_perm, nullptr, threads);
    double setup_s = seconds_since(ts0);

    const bool sstep = run.solver == mpk::SolverKind::sstep_gmres;
    const int p_need =
        sstep ? mpk::sstep_plan_powers(pre, cfg.s) : mpk::precon_plan_powers(pre);
    const int sub = sstep ? mpk::sstep_sub_powers(pre) : mpk::precon_sub_powers(pre);

    const auto tp1 = Clock::now();
    mpk::ExecutionPlan plan = mpk::group_levels(ls, a_perm, cache, p_need);
    plan.sub_powers = sub;
    prep_s += seconds_since(tp1);

    // AMG bakes the finest-level plan into its smoother at setup time; the
    // other kinds take the plan at apply time and can share one instance.
    const mpk::Precon* pre_blocked = &pre;
    mpk::Precon pre_amg;
    if (cfg.precon.kind == mpk::PreconKind::amg) {
        const auto ts1 = Clock::now();
        pre_amg = mpk::precon_setup(a_perm, cfg.precon, b_perm, &plan, threads);
        setup_s += seconds_since(ts1);
        pre_blocked = &pre_amg;
    }

    std::vector<double> x_base, x_blk;
    const auto tb0 = Clock::now();
    const mpk::SolveReport rep_base =
        dispatch_solve(run.solver, a_perm, b_perm, x_base, cfg, pre, nullptr, threads);
    const double base_s = seconds_since(tb0);
    const auto tk0 = Clock::now();
    const mpk::SolveReport rep_blk =
        dispatch_solve(run.solver, a_perm, b_perm, x_blk, cfg, *pre_blocked, &plan, threads);
    const double blk_s = seconds_since(tk0);

    const bool bitwise = bitwise_equal(rep_base.residual_history, rep_blk.residual_history) &&
                         bitwise_equal(x_base, x_blk) &&
                         rep_base.iterations == rep_blk.iterations;

    const std::vector<double> x = mpk::unpermute_vector(x_blk, ls.perm);
    double err_inf = 0.0;  // b is A*ones, so the exact solution is all-ones
    for (double xi : x) err_inf = std::max(err_inf, std::abs(xi - 1.0));

    const double speedup = base_s / (blk_s + prep_s);
    const double kernel_speedup = base_s / blk_s;

    if (opt.format == "csv") {
        std::ostringstream csv;
        csv << "converged,iterations,restarts,final_relres,eff_spmvs,base_solve_s,"
               "blk_mpk_s,blk_ortho_s,blk_misc_s,blk_solve_s,prep_s,speedup,"
               "kernel_speedup,bitwise\n";
        csv << (rep_blk.converged ? 1 : 0) << ',' << rep_blk.iterations << ','
            << rep_blk.restarts << ',' << std::scientific << std::setprecision(3)
            << rep_blk.final_relres << std::fixed << std::setprecision(6) << ','
            << std::setprecision(1) << rep_blk.effective_spmvs << std::setprecision(6)
            << ',' << base_s << ',' << rep_blk.timings.mpk << ',' << rep_blk.timings.ortho
            << ',' << rep_blk.timings.misc + prep_s << ',' << blk_s << ',' << prep_s << ','
            << std::setprecision(3) << speedup << ',' << kernel_speedup << ','
            << (bitwise ? 1 : 0) << '\n';
        emit(opt, csv.str());
    } else {
        ojson solver_j{{"type", mpk::to_string(run.solver)},
                       {"m", cfg.m},
                       {"s", cfg.s},
                       {"tol", cfg.tol},
                       {"max_iters", cfg.max_iters},
                       {"ortho_sweeps", cfg.ortho_sweeps}};
        if (sstep) solver_j["s_source"] = s_source;
        ojson doc{{"matrix", matrix_json(opt.matrix, a)},
                  {"solver", solver_j},
                  {"precon", precon_json(cfg.precon)},
                  {"threads", mpk::resolve_threads(threads)},
                  {"plan",
                   ojson{{"cache_mb", cache >> 20},
                         {"p_m", plan.p_m},
                         {"sub_powers", plan.sub_powers},
                         {"n_levels", ls.n_levels()},
                         {"n_groups", plan.n_groups()}}},
                  {"level_preprocessing_s", prep_s},
                  {"precon_setup_s", setup_s},
                  {"baseline", report_json(rep_base, base_s)},
                  {"blocked", report_json(rep_blk, blk_s, prep_s)},
                  {"bitwise_match", bitwise},
                  {"speedup", speedup},
                  {"kernel_speedup", kernel_speedup},
                  {"error_inf", err_inf},
                  {"residual_history", rep_blk.residual_history}};
        emit(opt, doc.dump(2) + "\n");
    }
    return (rep_blk.converged && rep_base.converged && bitwise) ? 0 : 1;
}

/// Jacobi sweep study: solves the same system with k = 1..k_max Jacobi
/// sweeps as the preconditioner (blocked kernels) and emits one row per k.
/// total_s adds level preprocessing and preconditioner setup to the solve.
int run_sweep_study(const DriverOptions& opt, const mpk::RunConfig& run,
                    const mpk::CsrMatrix& a, const std::vector<double>& b, int k_max) {
    const int threads = effective_threads(opt, run);
    const std::size_t cache = effective_cache(opt, run);

    struct Row {
        int k, iters;
        double eff_spmvs, solve_s, total_s;
        bool converged;
    };
    std::vector<Row> rows;
    bool all_converged = true;
    for (int k = 1; k <= k_max; ++k) {
        // Each row is an independent experiment, so it pays the full
        // preprocessing cost: levels, permutation, plan, setup.
        const auto t0 = Clock::now();
        const mpk::LevelStructure ls = mpk::build_levels(a);
        const mpk::CsrMatrix a_perm = mpk::permute(a, ls.perm);
        const std::vector<double> b_perm = mpk::permute_vector(b, ls.perm);

        mpk::SolverConfig cfg = run.config;
        if (cfg.s < 1) cfg.s = 1;
        cfg.precon = mpk::PreconSpec{};
        cfg.precon.kind = mpk::PreconKind::jacobi;
        cfg.precon.sweeps = k;
        const mpk::Precon pre = mpk::precon_setup(a_perm, cfg.precon, b_perm, nullptr, threads);

        const bool sstep = run.solver == mpk::SolverKind::sstep_gmres;
        const int p_need =
            sstep ? mpk::sstep_plan_powers(pre, cfg.s) : mpk::precon_plan_powers(pre);
        mpk::ExecutionPlan plan = mpk::group_levels(ls, a_perm, cache, p_need);
        plan.sub_powers = sstep ? mpk::sstep_sub_powers(pre) : mpk::precon_sub_powers(pre);

        std::vector<double> x;
        const auto t1 = Clock::now();
        const mpk::SolveReport rep =
            dispatch_solve(run.solver, a_perm, b_perm, x, cfg, pre, &plan, threads);
        const double solve_s = seconds_since(t1);
        const double total_s = seconds_since(t0);
        rows.push_back({k, rep.iterations, rep.effective_spmvs, solve_s, total_s,
                        rep.converged});
        all_converged = all_converged && rep.converged;
    }

    if (opt.format == "json") {
        ojson doc{{"matrix", matrix_json(opt.matrix, a)},
                  {"study", "jacobi_sweeps"},
                  {"solver", mpk::to_string(run.solver)},
                  {"rows", ojson::array()}};
        for (const Row& r : rows)
            doc["rows"].push_back(ojson{{"k", r.k},
                                        {"iters", r.iters},
                                        {"eff_spmvs", r.eff_spmvs},
                                        {"solve_s", r.solve_s},
                                        {"total_s", r.total_s},
                                        {"converged", r.converged}});
        emit(opt, doc.dump(2) + "\n");
    } else {
        std::ostringstream csv;
        csv << "k,iters,eff_spmvs,solve_s,total_s\n" << std::fixed;
        for (const Row& r : rows)
            csv << r.k << ',' << r.iters << ',' << std::setprecision(1) << r.eff_spmvs
                << ',' << std::setprecision(6) << r.solve_s << ',' << r.total_s << '\n';
        emit(opt, csv.str());
    }
    return all_converged ? 0 : 1;
}

int run_solve(const DriverOptions& opt, int sweep_study) {
    const mpk::RunConfig run = load_run(opt);
    const mpk::CsrMatrix a = load_matrix(opt.matrix);
    // Consistent right-hand side with known solution: b = A * ones.
    const std::vector<double> ones(a.n_rows, 1.0);
    std::vector<double> b(a.n_rows);
    mpk::spmv(a, ones, b);
    if (sweep_study > 0) return run_sweep_study(opt, run, a, b, sweep_study);
    return run_solve_single(opt, run, a, b);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Cache-blocked sparse power-kernel toolkit: benchmark the kernel, run "
        "the solvers, inspect level structures, tune the power depth."};
    app.require_subcommand(1);

    DriverOptions opt;
    int sweep_study = 0;

    CLI::App* bench = app.add_subcommand(
        "mpk-bench", "Time baseline vs. cache-blocked power kernel over a power range");
    add_common_options(bench, opt);
    CLI::App* solve = app.add_subcommand(
        "solve", "Run the configured solver with baseline and blocked kernels");
    add_common_options(solve, opt);
    solve->add_option("--sweep-study", sweep_study,
                      "Run a Jacobi sweep study for k = 1..N instead of a single solve "
                      "(blocked kernels; emits one row per k)")
        ->check(CLI::PositiveNumber);
    CLI::App* levels = app.add_subcommand(
        "levels", "Dump BFS level structure and grouping statistics as JSON");
    add_common_options(levels, opt);
    CLI::App* tune = app.add_subcommand(
        "tune", "Find the best power depth and persist it to a sidecar JSON");
    add_common_options(tune, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(bench)) return run_mpk_bench(opt);
        if (app.got_subcommand(solve)) return run_solve(opt, sweep_study);
        if (app.got_subcommand(levels)) return run_levels(opt);
        return run_tune(opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
