// Copyright 2026 The U-Convert Authors. All Rights Reserved.
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

#include <filesystem>
#include <optional>

#include "uconvert/models.hpp"
#include "uconvert/training.hpp"

namespace uconvert {

/// A checkpoint is one torch serialisation archive holding
///   "metadata"            JSON string: format, version, model id, architecture,
///                         config, epoch, run seed, view, training history
///   "model/<name>"        every parameter and buffer of the converter
///   "discriminator/<name>" the SRGAN discriminator, when present
/// where <name> is the dotted registration path (see Model::named_state).
struct Checkpoint {
  ModelKind kind;
  Model model;
  std::optional<Model> discriminator;
  TrainHistory history;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const Model* discriminator, const TrainHistory& history);

/// Rebuilds the models described by the metadata and restores their state.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Restores state into already-built models. Throws "checkpoint/config
/// mismatch" if architecture or configuration differ.
TrainHistory load_checkpoint_into(const std::filesystem::path& path, Model& model,
                                  Model* discriminator = nullptr);

}  // namespace uconvert
