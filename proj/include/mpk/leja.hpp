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

/// @file leja.hpp
/// Modified Leja ordering of polynomial roots / Newton shifts. Roots of a
/// factored residual polynomial (and the shifts of a Newton Krylov basis)
/// are numerically stable only when successive points are far apart; the
/// modified Leja ordering greedily maximises the product of distances to the
/// already-chosen points while keeping complex-conjugate pairs adjacent so
/// that real fused two-term updates stay possible.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

namespace mpk {

using Complex = std::complex<double>;

/// Modified Leja ordering. The first point is the one of maximum modulus;
/// each subsequent point maximises the product of distances to everything
/// already chosen (accumulated as a long-double log10 sum so large degrees
/// cannot overflow). Whenever a point with nonzero imaginary part is taken,
/// its exact conjugate (if still unchosen) is taken immediately after, so
/// conjugate pairs are adjacent in the output. Ties break toward the earlier
/// input index, making the ordering deterministic.
inline std::vector<Complex> modified_leja(const std::vector<Complex>& vals) {
    std::vector<Complex> out;
    out.reserve(vals.size());
    std::vector<char> taken(vals.size(), 0);

    auto take_with_conjugate = [&](std::size_t i) {
        out.push_back(vals[i]);
        taken[i] = 1;
        if (vals[i].imag() != 0.0) {
            const Complex conj = std::conj(vals[i]);
            for (std::size_t k = 0; k < vals.size(); ++k) {
                if (!taken[k] && vals[k] == conj) {
                    out.push_back(vals[k]);
                    taken[k] = 1;
                    break;
                }
            }
        }
    };

    std::size_t best = vals.size();
    for (std::size_t i = 0; i < vals.size(); ++i)
        if (!taken[i] &&
            (best == vals.size() || std::abs(vals[i]) > std::abs(vals[best])))
            best = i;
    if (best == vals.size()) return out;
    take_with_conjugate(best);

    while (out.size() < vals.size()) {
        best = vals.size();
        long double best_score = -std::numeric_limits<long double>::infinity();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (taken[i]) continue;
            long double score = 0.0L;
            for (const Complex& c : out) {
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

}  // namespace mpk
