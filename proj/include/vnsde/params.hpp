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

#include <string>
#include <vector>

namespace vnsde {

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Ordered collection of named parameter tensors. Order is the identity:
/// gradients, optimizer state, and checkpoints all align by index.
struct ParamSet {
    std::vector<NamedTensor> items;

    int add(std::string name, Tensor value)
    {
        items.push_back({ std::move(name), std::move(value) });
        return static_cast<int>(items.size()) - 1;
    }

    [[nodiscard]] int index_of(const std::string& name) const
    {
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (items[i].name == name) return static_cast<int>(i);
        }
        throw ContractError("no parameter named '" + name + "'");
    }

    [[nodiscard]] std::size_t count() const { return items.size(); }

    [[nodiscard]] std::size_t total_values() const
    {
        std::size_t n = 0;
        for (const auto& it : items) n += it.value.size();
        return n;
    }

    /// Zero tensors shaped like every parameter (gradient accumulators).
    [[nodiscard]] std::vector<Tensor> zeros_like() const
    {
        std::vector<Tensor> out;
        out.reserve(items.size());
        for (const auto& it : items) out.push_back(Tensor(it.value.shape()));
        return out;
    }
};

} // namespace vnsde
