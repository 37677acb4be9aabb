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

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgup/model.hpp"
#include "kgup/optim.hpp"

namespace kgup {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimizerState {
  ad::AdamConfig config;
  std::size_t step_count = 0;
  // Moments in ParameterStore order.
  std::vector<std::vector<float>> first;
  std::vector<std::vector<float>> second;
};

OptimizerState capture_optimizer(ad::Adam& adam);
/// Throws CheckpointError if the moment shapes do not match the optimizer.
void restore_optimizer(ad::Adam& adam, const OptimizerState& state);

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  std::optional<OptimizerState> optimizer;
  std::size_t step = 0;
};

// Layout: "KGUPCKPT", u32 version, u64 header length, JSON header (model
// config, vocabulary, step, optimizer hyperparameters), then tensor records
// u32 name length, name, u32 rank, u64 dims[rank], float32 data. All
// integers and floats little-endian. Adam moments follow the parameters as
// "adam.m/<name>" and "adam.v/<name>".
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const OptimizerState* optimizer = nullptr, std::size_t step = 0);
/// Throws CheckpointError on I/O failure or a malformed file.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Names and shapes of the stored tensors, in file order.
std::vector<std::pair<std::string, ad::Shape>> checkpoint_tensors(const std::filesystem::path& path);

}  // namespace kgup
