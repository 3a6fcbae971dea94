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
 * Matrix Market coordinate-format reader.
 *
 * Supports banner `%%MatrixMarket matrix coordinate <real|integer|pattern>
 * <general|symmetric|skew-symmetric>`. Indices are 1-based in the file;
 * symmetric/skew storage holds one triangle and is expanded on read
 * (off-diagonal mirror only). Anything else in the banner is rejected.
 */

#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mpk/csr.hpp"

namespace mpk {

namespace detail {
inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}
}  // namespace detail

inline CsrMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_matrix_market: cannot open " + path);

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("read_matrix_market: empty file " + path);

    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (tag != "%%MatrixMarket")
        throw std::runtime_error("read_matrix_market: missing banner in " + path);
    object = detail::lower(object);
    format = detail::lower(format);
    field = detail::lower(field);
    symmetry = detail::lower(symmetry);
    if (object != "matrix" || format != "coordinate")
        throw std::runtime_error("read_matrix_market: unsupported banner '" + line + "'");
    const bool pattern = field == "pattern";
    if (field != "real" && field != "integer" && !pattern)
        throw std::runtime_error("read_matrix_market: unsupported field '" + field + "'");
    const bool symmetric = symmetry == "symmetric";
    const bool skew = symmetry == "skew-symmetric";
    if (symmetry != "general" && !symmetric && !skew)
        throw std::runtime_error("read_matrix_market: unsupported symmetry '" + symmetry + "'");

    // Size line: first non-comment, non-blank line after the banner.
    std::uint64_t rows = 0, cols = 0, count = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '%') continue;
        std::istringstream sz(line);
        if (!(sz >> rows >> cols >> count))
            throw std::runtime_error("read_matrix_market: malformed size line");
        break;
    }
    if (rows == 0 || cols == 0)
        throw std::runtime_error("read_matrix_market: empty dimensions");
    constexpr std::uint64_t kMaxDim = std::numeric_limits<index_t>::max();
    if (rows > kMaxDim || cols > kMaxDim)
        throw std::runtime_error("read_matrix_market: dimensions exceed 32-bit range");

    std::vector<Triplet> t;
    t.reserve(symmetric || skew ? 2 * count : count);
    std::uint64_t seen = 0;
    while (seen < count && std::getline(in, line)) {
        if (line.empty() || line[0] == '%') continue;
        std::istringstream entry(line);
        std::uint64_t r1 = 0, c1 = 0;
        double v = 1.0;
        if (!(entry >> r1 >> c1))
            throw std::runtime_error("read_matrix_market: malformed entry line '" + line + "'");
        if (!pattern && !(entry >> v))
            throw std::runtime_error("read_matrix_market: missing value in '" + line + "'");
        if (r1 == 0 || c1 == 0 || r1 > rows || c1 > cols)
            throw std::runtime_error("read_matrix_market: entry index out of range");
        const index_t r = static_cast<index_t>(r1 - 1);
        const index_t c = static_cast<index_t>(c1 - 1);
        t.push_back({r, c, v});
        if ((symmetric || skew) && r != c) t.push_back({c, r, skew ? -v : v});
        ++seen;
    }
    if (seen != count)
        throw std::runtime_error("read_matrix_market: fewer entries than declared");
    return from_coo(static_cast<index_t>(rows), static_cast<index_t>(cols), std::move(t));
}

}  // namespace mpk
