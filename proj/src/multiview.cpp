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

#include "uconvert/multiview.hpp"

#include <cmath>
#include <string>

#include "uconvert/errors.hpp"
#include "uconvert/training.hpp"

namespace uconvert {

ViewEnsemble::ViewEnsemble(std::array<Model, 3> models) : models_(std::move(models)) {
  for (const Model& m : models_) {
    if (m.architecture() != models_[0].architecture()) {
      throw ValidationError("view ensemble models must share one architecture");
    }
    if (m.architecture() == Architecture::kSrganDiscriminator) {
      throw ValidationError("a discriminator cannot be part of a view ensemble");
    }
  }
}

Volume fuse(std::span<const Volume> volumes, std::optional<std::span<const double>> weights) {
  if (volumes.empty()) throw ValidationError("fuse needs at least one volume");
  const Volume& first = volumes.front();
  for (const Volume& v : volumes) {
    if (!v.same_geometry(first)) throw ShapeError("geometry mismatch between fused volumes");
  }
  if (weights) {
    if (weights->size() != volumes.size()) {
      throw ValidationError("fuse weights must match the number of volumes");
    }
    double total = 0.0;
    for (double w : *weights) {
      if (!(w >= 0.0)) throw ValidationError("fuse weights must be non-negative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("fuse weights must sum to 1");
  }

  Volume out(first.shape(), first.spacing(), first.intensity_range());
  auto dst = out.data();
  const auto k = static_cast<double>(volumes.size());
  for (std::size_t i = 0; i < dst.size(); ++i) {
    double acc = 0.0;
    if (weights) {
      for (std::size_t j = 0; j < volumes.size(); ++j) acc += (*weights)[j] * volumes[j].data()[i];
      dst[i] = static_cast<float>(acc);
    } else {
      for (const Volume& v : volumes) acc += v.data()[i];
      dst[i] = static_cast<float>(acc / k);
    }
  }
  return out;
}

MultiViewResult multi_view_convert(const ViewEnsemble& ensemble, const Volume& source) {
  std::vector<Volume> per_view;
  per_view.reserve(kAllAxes.size());
  for (Axis view : kAllAxes) per_view.push_back(convert_volume(ensemble.model(view), source, view));
  Volume fused = fuse(per_view);
  return {std::move(fused), std::move(per_view)};
}

}  // namespace uconvert
