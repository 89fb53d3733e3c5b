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

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace vnsde {

inline std::string shape_str(std::span<const std::size_t> shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) os << " x ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

/// Dense row-major tensor of 64-bit floats. No broadcasting, no views;
/// the shape is fixed at construction.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)),
          values_(std::accumulate(shape_.begin(),
                                  shape_.end(),
                                  std::size_t{1},
                                  std::multiplies<>()),
                  0.0)
    {
    }

    Tensor(std::vector<std::size_t> shape, std::vector<double> values)
        : shape_(std::move(shape)), values_(std::move(values))
    {
        const auto n = std::accumulate(shape_.begin(),
                                       shape_.end(),
                                       std::size_t{1},
                                       std::multiplies<>());
        if (n != values_.size()) {
            throw DimensionError("tensor shape " + shape_str(shape_)
                                 + " does not match value count "
                                 + std::to_string(values_.size()));
        }
    }

    static Tensor zeros(std::vector<std::size_t> shape)
    {
        return Tensor(std::move(shape));
    }

    static Tensor scalar(double v) { return Tensor({ 1 }, { v }); }

    [[nodiscard]] const std::vector<std::size_t>& shape() const
    {
        return shape_;
    }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] bool empty() const { return values_.empty(); }

    [[nodiscard]] double* data() { return values_.data(); }
    [[nodiscard]] const double* data() const { return values_.data(); }
    [[nodiscard]] std::span<double> view()
    {
        return { values_.data(), values_.size() };
    }
    [[nodiscard]] std::span<const double> view() const
    {
        return { values_.data(), values_.size() };
    }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    [[nodiscard]] bool all_finite() const
    {
        for (const double v : values_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    void fill(double v) { values_.assign(values_.size(), v); }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

inline bool same_shape(const Tensor& a, const Tensor& b)
{
    return a.shape() == b.shape();
}

inline void require_same_shape(const Tensor& a,
                               const Tensor& b,
                               const char* where)
{
    if (!same_shape(a, b)) {
        throw DimensionError(std::string(where) + ": shape "
                             + shape_str(a.shape()) + " vs "
                             + shape_str(b.shape()));
    }
}

inline double squared_norm(std::span<const double> v)
{
    double s = 0.0;
    for (const double x : v) s += x * x;
    return s;
}

inline double norm(std::span<const double> v)
{
    return std::sqrt(squared_norm(v));
}

} // namespace vnsde
