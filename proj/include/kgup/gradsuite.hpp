// Copyright 2026 The kgup Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgup/gradcheck.hpp"

namespace kgup {

/// Names of the differentiable blocks covered by the finite-difference
/// suite, from the embedding layer up to full tiny models of each variant.
const std::vector<std::string>& gradient_suite_blocks();

/// Builds the named block with random inputs and parameters drawn from
/// `seed` (H = 8, 3-node graphs) and checks its gradients. Throws
/// std::invalid_argument for an unknown block name.
ad::GradCheckReport check_block(const std::string& block, std::uint64_t seed);

}  // namespace kgup
