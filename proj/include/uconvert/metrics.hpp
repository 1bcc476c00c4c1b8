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
#include <span>
#include <vector>

#include <json.hpp>

#include "uconvert/volume.hpp"

namespace uconvert {

/// Read-only row-major 2D view.
struct ImageView {
  std::span<const float> data;
  int64_t rows = 0;
  int64_t cols = 0;

  float at(int64_t r, int64_t c) const { return data[static_cast<std::size_t>(r * cols + c)]; }
};

inline ImageView view_of(const Slice2D& s) { return {s.data, s.rows, s.cols}; }

struct SSIMParams {
  int window_size = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  void validate() const;
  /// Normalised separable Gaussian taps (length window_size, sum 1).
  std::vector<double> window_1d() const;
};

/// Mean squared difference, accumulated in double.
double mse(std::span<const float> a, std::span<const float> b);
double mse(const Volume& a, const Volume& b);

/// 10 log10(max^2 / mse); +infinity when the inputs are identical.
double psnr(std::span<const float> pred, std::span<const float> target, double max_value = 1.0);

/// Mean SSIM over all fully overlapping window positions.
double ssim_2d(const ImageView& pred, const ImageView& target, const SSIMParams& params = {});

struct MetricsReport {
  Axis axis = Axis::kSagittal;
  std::vector<double> psnr_per_slice;
  std::vector<double> ssim_per_slice;
  double psnr_mean = 0.0;  // over finite per-slice values; +inf if none are finite
  double ssim_mean = 0.0;
  int64_t n_infinite_psnr = 0;

  int64_t n_slices() const { return static_cast<int64_t>(ssim_per_slice.size()); }
  /// {axis, n_slices, psnr_per_slice, ssim_per_slice, psnr_mean, ssim_mean,
  /// n_infinite_psnr}; infinite PSNR values are written as the string "inf".
  nlohmann::json to_json() const;
};

MetricsReport evaluate_volume(const Volume& pred, const Volume& target,
                              Axis axis = Axis::kSagittal, const SSIMParams& params = {});

}  // namespace uconvert
