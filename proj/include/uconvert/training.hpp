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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "uconvert/models.hpp"
#include "uconvert/phantom.hpp"
#include "uconvert/volume.hpp"

namespace uconvert {

/// Model family selectable from the command line.
enum class ModelKind { kUConvert, kSrgan, kEspcn };

std::string_view model_kind_name(ModelKind kind);
/// "uconvert", "srgan" or "espcn". PRSR is rejected as out of scope.
ModelKind parse_model_kind(std::string_view name);
ModelKind model_kind_of(Architecture architecture);

struct TrainConfig {
  ModelKind model = ModelKind::kUConvert;
  Axis view = Axis::kSagittal;
  double learning_rate = 0.001;
  int batch_size = 4;
  int epochs = 40;
  uint64_t seed = 0;
  double adversarial_weight = 1e-3;  // SRGAN only

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // generator objective for SRGAN
  double seconds = 0.0;
  std::optional<double> discriminator_loss;
  std::optional<double> adversarial_loss;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

struct TrainHistory {
  TrainConfig config;
  std::string optimizer = "adam";
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::vector<EpochRecord> epochs;

  nlohmann::json to_json() const;
  static TrainHistory from_json(const nlohmann::json& j);
  /// One JSON object per line, one line per epoch.
  void write_jsonl(const std::filesystem::path& path) const;
};

/// Called after every completed epoch.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// All slices of all pairs along one view, as [S, 1, rows, cols] tensors.
struct SliceDataset {
  torch::Tensor source;
  torch::Tensor target;

  int64_t size() const { return source.size(0); }
};

SliceDataset make_slice_dataset(std::span<const SubjectPair> pairs, Axis view);

/// Seeded permutation of 0..n-1 used as the slice order of one epoch.
std::vector<int64_t> epoch_order(int64_t n, uint64_t seed, int epoch);

/// Adam on pixel MSE. The model is updated in place.
TrainHistory train_mse(Model& model, std::span<const SubjectPair> pairs, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

/// Alternating discriminator / generator updates, one each per batch. The
/// generator minimises MSE + adversarial_weight * -log D(G(x)).
TrainHistory train_gan(Model& generator, Model& discriminator, std::span<const SubjectPair> pairs,
                       const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Probability clamp applied to discriminator outputs before taking logs.
inline constexpr double kProbabilityEpsilon = 1e-7;

/// Slice-wise eval-mode conversion along `view`, outputs clamped to [0, 1].
Volume convert_volume(const Model& model, const Volume& source, Axis view);

/// Conversion of a stack of slices; input and output are [N, 1, H, W].
torch::Tensor convert_slices(const Model& model, const torch::Tensor& batch);

}  // namespace uconvert
