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

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "uconvert/models.hpp"
#include "uconvert/volume.hpp"

namespace uconvert {

/// One converter per anatomical view, indexed by array_axis(view).
class ViewEnsemble {
 public:
  /// Models in sagittal, coronal, axial order. All must share one architecture.
  explicit ViewEnsemble(std::array<Model, 3> models);

  const Model& model(Axis view) const { return models_[array_axis(view)]; }
  Architecture architecture() const { return models_[0].architecture(); }

 private:
  std::array<Model, 3> models_;
};

/// Voxelwise mean of volumes with identical geometry. With `weights` (one per
/// volume, non-negative, summing to one) a weighted mean is taken instead.
Volume fuse(std::span<const Volume> volumes,
            std::optional<std::span<const double>> weights = std::nullopt);

struct MultiViewResult {
  Volume fused;
  std::vector<Volume> per_view;  // sagittal, coronal, axial
};

MultiViewResult multi_view_convert(const ViewEnsemble& ensemble, const Volume& source);

}  // namespace uconvert
