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

#include <stdexcept>
#include <string>

namespace vnsde {

/// Violation of an API precondition (bad shapes, out-of-range index,
/// non-scalar loss, ...).
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Tensor shape mismatch; message names both shapes.
class DimensionError : public ContractError {
public:
    explicit DimensionError(const std::string& what) : ContractError(what) {}
};

/// Malformed or inconsistent input data (anchor files, configs).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what)
        : std::runtime_error(what) {}
};

/// Numerical failure at run time: divergent integration, non-finite
/// gradients, replay checksum mismatch.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what)
        : std::runtime_error(what) {}
};

} // namespace vnsde
