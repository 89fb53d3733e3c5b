// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include "errors.hpp"
#include "tensor.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace vnsde {

namespace detail {

    constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;

    // SplitMix64 finalizer; full avalanche on 64 bits.
    constexpr std::uint64_t mix64(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform double strictly inside (0, 1); never 0, so log() is safe.
    constexpr double to_unit_open(std::uint64_t w)
    {
        return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
    }

} // namespace detail

/// Counter-based random stream: the draw at any position is a pure
/// function of (seed, stream, position), so a copied stream replays the
/// same sequence and streams never share state.
///
/// Stream-id layout used across the project (documented for the CLI):
///   bits 56..63  purpose  (0 init, 1 eps, 2 increments, 3 synthesis,
///                          4 prediction, 5 verification/tests)
///   bits 24..55  epoch (training) or free
///   bits  8..23  district index
///   bits  0..7   Monte Carlo sample index
struct RngStream {
    std::uint64_t seed{ 0 };
    std::uint64_t stream{ 0 };
    std::uint64_t pos{ 0 }; // draws consumed so far

    [[nodiscard]] std::uint64_t word_at(std::uint64_t i) const
    {
        const std::uint64_t base =
            detail::mix64(seed + detail::mix64(stream + detail::golden));
        return detail::mix64(base + (i + 1) * detail::golden);
    }

    double next_uniform()
    {
        return detail::to_unit_open(word_at(pos++));
    }

    /// Box-Muller (cosine branch) on two counter words per draw.
    double next_normal()
    {
        const std::uint64_t i = pos++;
        const double u1 = detail::to_unit_open(word_at(2 * i));
        const double u2 = detail::to_unit_open(word_at(2 * i + 1));
        return std::sqrt(-2.0 * std::log(u1))
               * std::cos(2.0 * std::numbers::pi * u2);
    }

    void fill_normal(std::span<double> out)
    {
        for (double& x : out) x = next_normal();
    }
};

namespace stream_purpose {
    constexpr std::uint64_t init = 0;
    constexpr std::uint64_t eps = 1;
    constexpr std::uint64_t increments = 2;
    constexpr std::uint64_t synthesis = 3;
    constexpr std::uint64_t prediction = 4;
    constexpr std::uint64_t verification = 5;
} // namespace stream_purpose

inline std::uint64_t make_stream_id(std::uint64_t purpose,
                                    std::uint64_t epoch = 0,
                                    std::uint64_t district = 0,
                                    std::uint64_t sample = 0)
{
    return (purpose << 56) | ((epoch & 0xFFFFFFFFULL) << 24)
           | ((district & 0xFFFFULL) << 8) | (sample & 0xFFULL);
}

/// count i.i.d. N(0,1) draws.
inline Tensor standard_normal(RngStream& rng, std::size_t count)
{
    Tensor out({ count });
    rng.fill_normal(out.view());
    return out;
}

/// steps x dim matrix of independent N(0, dt) Brownian increments.
inline Tensor brownian_increments(RngStream& rng,
                                  std::size_t steps,
                                  double dt,
                                  std::size_t dim)
{
    if (!(dt > 0.0)) {
        throw ContractError("brownian_increments: dt must be positive, got "
                            + std::to_string(dt));
    }
    if (steps < 1 || dim < 1) {
        throw ContractError("brownian_increments: steps and dim must be >= 1");
    }
    Tensor out({ steps, dim });
    const double sd = std::sqrt(dt);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = sd * rng.next_normal();
    }
    return out;
}

} // namespace vnsde
