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
#include "rng.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace vnsde {

/// A Brownian bridge pinned at (t_a, x_a) and (t_b, x_b) with volatility
/// sigma (value units per sqrt(time unit)).
struct BridgeSpec {
    double t_a{ 0.0 };
    double t_b{ 1.0 };
    double x_a{ 0.0 };
    double x_b{ 0.0 };
    double sigma{ 0.0 };

    void validate() const
    {
        if (!(t_b > t_a)) {
            throw ContractError("BridgeSpec: t_b must exceed t_a ("
                                + std::to_string(t_a) + " >= "
                                + std::to_string(t_b) + ")");
        }
        if (sigma < 0.0) {
            throw ContractError("BridgeSpec: sigma must be >= 0");
        }
    }
};

/// Samples the bridge at the requested times:
///
///   x(t) = x_a + r (x_b - x_a) + sigma [ W(t - t_a) - r W(t_b - t_a) ],
///   r = (t - t_a) / (t_b - t_a),
///
/// with one shared Brownian path per call, realized as the cumulative sum
/// of N(0, gap) increments over the grid (exact in distribution on the
/// grid). Endpoints are returned exactly.
inline std::vector<double> brownian_bridge(const BridgeSpec& spec,
                                           std::span<const double> times,
                                           RngStream& rng)
{
    spec.validate();
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < spec.t_a || times[i] > spec.t_b) {
            throw ContractError("brownian_bridge: time "
                                + std::to_string(times[i])
                                + " outside [" + std::to_string(spec.t_a)
                                + ", " + std::to_string(spec.t_b) + "]");
        }
        if (i > 0 && times[i] < times[i - 1]) {
            throw ContractError("brownian_bridge: times must be ascending");
        }
    }

    const double span_t = spec.t_b - spec.t_a;

    // W(t_i - t_a) on the grid, plus W(t_b - t_a) at the end.
    std::vector<double> w(times.size(), 0.0);
    double prev_t = spec.t_a;
    double acc = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double gap = times[i] - prev_t;
        if (gap > 0.0) acc += std::sqrt(gap) * rng.next_normal();
        w[i] = acc;
        prev_t = times[i];
    }
    double w_end = acc;
    if (spec.t_b > prev_t) {
        w_end = acc + std::sqrt(spec.t_b - prev_t) * rng.next_normal();
    }

    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double r = (times[i] - spec.t_a) / span_t;
        // (1-r) x_a + r x_b is bit-exact at both endpoints, unlike
        // x_a + r (x_b - x_a).
        out[i] = (1.0 - r) * spec.x_a + r * spec.x_b
                 + spec.sigma * (w[i] - r * w_end);
    }
    return out;
}

} // namespace vnsde
