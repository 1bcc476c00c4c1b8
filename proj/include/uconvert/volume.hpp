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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace uconvert {

/// Anatomical viewing axis. The mapping to array axes is fixed:
/// sagittal = 0 (D), coronal = 1 (H), axial = 2 (W).
enum class Axis : int { kSagittal = 0, kCoronal = 1, kAxial = 2 };

inline constexpr std::array<Axis, 3> kAllAxes = {Axis::kSagittal, Axis::kCoronal,
                                                 Axis::kAxial};

constexpr int array_axis(Axis axis) { return static_cast<int>(axis); }

std::string_view axis_name(Axis axis);
/// Parses "sagittal", "coronal" or "axial"; throws ValidationError otherwise.
Axis parse_axis(std::string_view name);

using Shape3 = std::array<int64_t, 3>;
using Spacing3 = std::array<double, 3>;
using IntensityRange = std::array<double, 2>;

/// Dense 3D scalar image of shape (D, H, W) stored C-contiguously as float32.
class Volume {
 public:
  Volume(Shape3 shape, Spacing3 spacing = {1.0, 1.0, 1.0},
         IntensityRange intensity_range = {0.0, 1.0});
  Volume(Shape3 shape, std::vector<float> data, Spacing3 spacing = {1.0, 1.0, 1.0},
         IntensityRange intensity_range = {0.0, 1.0});

  const Shape3& shape() const { return shape_; }
  int64_t extent(Axis axis) const { return shape_[array_axis(axis)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  const Spacing3& spacing() const { return spacing_; }
  const IntensityRange& intensity_range() const { return intensity_range_; }
  void set_intensity_range(IntensityRange range) { intensity_range_ = range; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  int64_t offset(int64_t d, int64_t h, int64_t w) const {
    return (d * shape_[1] + h) * shape_[2] + w;
  }
  float& at(int64_t d, int64_t h, int64_t w) { return data_[offset(d, h, w)]; }
  float at(int64_t d, int64_t h, int64_t w) const { return data_[offset(d, h, w)]; }

  bool same_geometry(const Volume& other) const {
    return shape_ == other.shape_ && spacing_ == other.spacing_;
  }

  /// Bitwise comparison of shape, spacing, range and voxel data.
  friend bool operator==(const Volume& a, const Volume& b);

 private:
  Shape3 shape_;
  std::vector<float> data_;
  Spacing3 spacing_;
  IntensityRange intensity_range_;
};

/// One hyperplane of a volume. Rows/cols are the two remaining array axes in
/// ascending order, e.g. an axial slice is (D, H).
struct Slice2D {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<float> data;
  Axis source_axis = Axis::kSagittal;
  int64_t index = 0;

  float at(int64_t r, int64_t c) const { return data[r * cols + c]; }
};

/// Shape of the slices produced along `axis`.
std::array<int64_t, 2> slice_shape(const Shape3& shape, Axis axis);

std::vector<Slice2D> extract_slices(const Volume& vol, Axis axis);

/// Inverse of extract_slices. Slices may arrive in any order but must carry
/// each index 0..n-1 exactly once.
Volume stack_slices(std::span<const Slice2D> slices, Axis axis, Spacing3 spacing,
                    IntensityRange intensity_range = {0.0, 1.0});

/// Min-max normalisation to [0, 1].
Volume normalize(const Volume& vol);

/// Writes the MVOL format: "MVOL0001", u32 LE header length, JSON header,
/// then D*H*W little-endian float32 in C order.
void write_mvol(const Volume& vol, const std::filesystem::path& path);
Volume read_mvol(const std::filesystem::path& path);

}  // namespace uconvert
