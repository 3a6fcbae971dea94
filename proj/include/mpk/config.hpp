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
 * JSON run configuration for the command-line driver.
 *
 * A configuration file holds up to four top-level objects:
 *
 *     {
 *       "solver": {"type": "gmres", "m": 50, "s": 4, "tol": 1e-8,
 *                  "max_iters": 1000, "ortho_sweeps": 1},
 *       "precon": {"type": "jacobi", "sweeps": 2, "gamma": 1, "degree": 6,
 *                  "inner": {"type": "gs2", "sweeps": 1, "gamma": 1},
 *                  "max_levels": 10, "coarse_threshold": 500,
 *                  "smoother": "gs2", "eig_ratio": 30.0, "boost": 1.1},
 *       "mpk": {"enabled": true, "cache_mb": 32, "p_opt": 0,
 *               "p_range": [1, 8], "repetitions": 3},
 *       "threads": 0
 *     }
 *
 * Every key is optional and falls back to the library default. Unknown keys
 * are rejected so that a typo cannot silently run a different experiment.
 */

#pragma once

#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "mpk/gmres.hpp"
#include "mpk/precon.hpp"

namespace mpk {

enum class SolverKind { gmres, sstep_gmres };

inline const char* to_string(SolverKind k) {
    return k == SolverKind::gmres ? "gmres" : "sstep_gmres";
}

/// Everything a driver run needs beyond the matrix itself. The benchmark
/// knobs (p_range, repetitions) ride along with the solver configuration so
/// one file can describe both a solve and the kernel sweep on its matrix.
struct RunConfig {
    SolverKind solver = SolverKind::gmres;
    SolverConfig config;  ///< includes the preconditioner spec and MPK knobs
    int threads = 0;      ///< 0: environment / hardware decide
    int p_lo = 1;         ///< mpk-bench / tune power range
    int p_hi = 8;
    int repetitions = 3;  ///< timing repetitions (median is reported)
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const char* where,
                       std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw std::invalid_argument(std::string("config: unknown key \"") + item.key() +
                                        "\" in " + where);
    }
}

inline PreconKind parse_precon_kind(const std::string& s, const char* where) {
    if (s == "none") return PreconKind::none;
    if (s == "jacobi") return PreconKind::jacobi;
    if (s == "gs2") return PreconKind::gs2;
    if (s == "poly") return PreconKind::poly;
    if (s == "cheby") return PreconKind::cheby;
    if (s == "amg") return PreconKind::amg;
    throw std::invalid_argument(std::string("config: unknown preconditioner type \"") + s +
                                "\" in " + where +
                                " (expected none|jacobi|gs2|poly|cheby|amg)");
}

}  // namespace detail

/// Parses the "precon" object. Accepts the full key set regardless of type;
/// keys that do not apply to the selected type are simply ignored by setup.
inline PreconSpec parse_precon(const nlohmann::json& j) {
    PreconSpec spec;
    detail::check_keys(j, "precon",
                       {"type", "sweeps", "gamma", "degree", "inner", "max_levels",
                        "coarse_threshold", "smoother", "eig_ratio", "boost"});
    if (j.contains("type")) spec.kind = detail::parse_precon_kind(j.at("type"), "precon.type");
    if (j.contains("sweeps")) spec.sweeps = j.at("sweeps").get<int>();
    if (j.contains("gamma")) spec.gamma = j.at("gamma").get<int>();
    if (j.contains("degree")) spec.degree = j.at("degree").get<int>();
    if (j.contains("inner")) {
        const nlohmann::json& inner = j.at("inner");
        detail::check_keys(inner, "precon.inner", {"type", "sweeps", "gamma"});
        if (inner.contains("type"))
            spec.inner = detail::parse_precon_kind(inner.at("type"), "precon.inner.type");
        if (inner.contains("sweeps")) spec.inner_sweeps = inner.at("sweeps").get<int>();
        if (inner.contains("gamma")) spec.inner_gamma = inner.at("gamma").get<int>();
        if (spec.inner == PreconKind::poly || spec.inner == PreconKind::cheby ||
            spec.inner == PreconKind::amg)
            throw std::invalid_argument(
                "config: precon.inner.type must be none, jacobi or gs2");
    }
    if (j.contains("max_levels")) spec.max_levels = j.at("max_levels").get<int>();
    if (j.contains("coarse_threshold"))
        spec.coarse_threshold = j.at("coarse_threshold").get<std::size_t>();
    if (j.contains("smoother")) {
        const std::string s = j.at("smoother");
        if (s == "gs2")
            spec.smoother = AmgSmootherSpec::Kind::gs2;
        else if (s == "cheby")
            spec.smoother = AmgSmootherSpec::Kind::cheby;
        else
            throw std::invalid_argument(std::string("config: unknown smoother \"") + s +
                                        "\" (expected gs2|cheby)");
    }
    if (j.contains("eig_ratio")) spec.eig_ratio = j.at("eig_ratio").get<double>();
    if (j.contains("boost")) spec.boost = j.at("boost").get<double>();
    return spec;
}

/// Parses a full run configuration. Values are range-checked lightly here;
/// the solvers re-validate on entry.
inline RunConfig parse_config(const nlohmann::json& j) {
    RunConfig run;
    detail::check_keys(j, "the top-level object", {"solver", "precon", "mpk", "threads"});

    if (j.contains("solver")) {
        const nlohmann::json& s = j.at("solver");
        detail::check_keys(s, "solver", {"type", "m", "s", "tol", "max_iters", "ortho_sweeps"});
        if (s.contains("type")) {
            const std::string t = s.at("type");
            if (t == "gmres")
                run.solver = SolverKind::gmres;
            else if (t == "sstep_gmres")
                run.solver = SolverKind::sstep_gmres;
            else
                throw std::invalid_argument(std::string("config: unknown solver type \"") + t +
                                            "\" (expected gmres|sstep_gmres)");
        }
        if (s.contains("m")) run.config.m = s.at("m").get<int>();
        if (s.contains("s")) run.config.s = s.at("s").get<int>();
        if (s.contains("tol")) run.config.tol = s.at("tol").get<double>();
        if (s.contains("max_iters")) run.config.max_iters = s.at("max_iters").get<int>();
        if (s.contains("ortho_sweeps")) run.config.ortho_sweeps = s.at("ortho_sweeps").get<int>();
    }
    if (j.contains("precon")) run.config.precon = parse_precon(j.at("precon"));
    if (j.contains("mpk")) {
        const nlohmann::json& m = j.at("mpk");
        detail::check_keys(m, "mpk", {"enabled", "cache_mb", "p_opt", "p_range", "repetitions"});
        if (m.contains("enabled")) run.config.mpk.enabled = m.at("enabled").get<bool>();
        if (m.contains("cache_mb"))
            run.config.mpk.cache_bytes = m.at("cache_mb").get<std::size_t>() << 20;
        if (m.contains("p_opt")) run.config.mpk.p_opt = m.at("p_opt").get<int>();
        if (m.contains("p_range")) {
            const nlohmann::json& r = m.at("p_range");
            if (!r.is_array() || r.size() != 2)
                throw std::invalid_argument("config: mpk.p_range must be [lo, hi]");
            run.p_lo = r[0].get<int>();
            run.p_hi = r[1].get<int>();
            if (run.p_lo < 1 || run.p_hi < run.p_lo)
                throw std::invalid_argument("config: mpk.p_range requires 1 <= lo <= hi");
        }
        if (m.contains("repetitions")) {
            run.repetitions = m.at("repetitions").get<int>();
            if (run.repetitions < 1)
                throw std::invalid_argument("config: mpk.repetitions must be >= 1");
        }
    }
    if (j.contains("threads")) {
        run.threads = j.at("threads").get<int>();
        if (run.threads < 0) throw std::invalid_argument("config: threads must be >= 0");
    }
    return run;
}

/// Loads and parses a configuration file. I/O and JSON syntax problems both
/// surface as std::invalid_argument with the offending path in the message.
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config: " + path + ": " + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: " + path + ": expected an object");
    return parse_config(j);
}

}  // namespace mpk
