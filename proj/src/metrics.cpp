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

#include "uconvert/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "uconvert/errors.hpp"

namespace uconvert {
namespace {

nlohmann::json finite_or_inf(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  return v;
}

// Valid-mode separable filtering of a row-major image.
std::vector<double> filter_valid(const std::vector<double>& img, int64_t rows, int64_t cols,
                                 const std::vector<double>& taps) {
  const auto k = static_cast<int64_t>(taps.size());
  const int64_t out_rows = rows - k + 1;
  const int64_t out_cols = cols - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(rows * out_cols));
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < out_cols; ++c) {
      double acc = 0.0;
      for (int64_t t = 0; t < k; ++t) acc += taps[t] * img[r * cols + c + t];
      tmp[r * out_cols + c] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_rows * out_cols));
  for (int64_t r = 0; r < out_rows; ++r) {
    for (int64_t c = 0; c < out_cols; ++c) {
      double acc = 0.0;
      for (int64_t t = 0; t < k; ++t) acc += taps[t] * tmp[(r + t) * out_cols + c];
      out[r * out_cols + c] = acc;
    }
  }
  return out;
}

}  // namespace

void SSIMParams::validate() const {
  if (window_size < 1 || window_size % 2 == 0) {
    throw ValidationError("SSIM window size must be odd and positive");
  }
  if (!(sigma > 0.0) || !(dynamic_range > 0.0)) {
    throw ValidationError("SSIM sigma and dynamic range must be positive");
  }
}

std::vector<double> SSIMParams::window_1d() const {
  validate();
  std::vector<double> taps(static_cast<std::size_t>(window_size));
  const int half = window_size / 2;
  double total = 0.0;
  for (int i = 0; i < window_size; ++i) {
    const double x = i - half;
    taps[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
    total += taps[static_cast<std::size_t>(i)];
  }
  for (double& t : taps) t /= total;
  return taps;
}

double mse(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ShapeError("shape mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + " elements");
  }
  if (a.empty()) throw ShapeError("mse of empty arrays");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double mse(const Volume& a, const Volume& b) {
  if (a.shape() != b.shape()) throw ShapeError("geometry mismatch");
  return mse(a.data(), b.data());
}

double psnr(std::span<const float> pred, std::span<const float> target, double max_value) {
  if (!(max_value > 0.0)) throw ValidationError("PSNR max_value must be positive");
  const double err = mse(pred, target);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / err);
}

double ssim_2d(const ImageView& pred, const ImageView& target, const SSIMParams& params) {
  if (pred.rows != target.rows || pred.cols != target.cols) {
    throw ShapeError("shape mismatch: " + std::to_string(pred.rows) + "x" +
                     std::to_string(pred.cols) + " vs " + std::to_string(target.rows) + "x" +
                     std::to_string(target.cols));
  }
  const std::vector<double> taps = params.window_1d();
  if (pred.rows < params.window_size || pred.cols < params.window_size) {
    throw ShapeError("image smaller than SSIM window (" + std::to_string(pred.rows) + "x" +
                     std::to_string(pred.cols) + " < " + std::to_string(params.window_size) + ")");
  }

  const auto n = static_cast<std::size_t>(pred.rows * pred.cols);
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = pred.data[i];
    y[i] = target.data[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mu_x = filter_valid(x, pred.rows, pred.cols, taps);
  const auto mu_y = filter_valid(y, pred.rows, pred.cols, taps);
  const auto e_xx = filter_valid(xx, pred.rows, pred.cols, taps);
  const auto e_yy = filter_valid(yy, pred.rows, pred.cols, taps);
  const auto e_xy = filter_valid(xy, pred.rows, pred.cols, taps);

  const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
  const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i];
    const double my = mu_y[i];
    const double var_x = e_xx[i] - mx * mx;
    const double var_y = e_yy[i] - my * my;
    const double cov = e_xy[i] - mx * my;
    total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
             ((mx * mx + my * my + c1) * (var_x + var_y + c2));
  }
  return total / static_cast<double>(mu_x.size());
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json psnr_json = nlohmann::json::array();
  for (double v : psnr_per_slice) psnr_json.push_back(finite_or_inf(v));
  return {{"axis", axis_name(axis)},
          {"n_slices", n_slices()},
          {"psnr_per_slice", psnr_json},
          {"ssim_per_slice", ssim_per_slice},
          {"psnr_mean", finite_or_inf(psnr_mean)},
          {"ssim_mean", ssim_mean},
          {"n_infinite_psnr", n_infinite_psnr}};
}

MetricsReport evaluate_volume(const Volume& pred, const Volume& target, Axis axis,
                              const SSIMParams& params) {
  if (!pred.same_geometry(target)) throw ShapeError("geometry mismatch");
  const auto pred_slices = extract_slices(pred, axis);
  const auto target_slices = extract_slices(target, axis);

  MetricsReport report;
  report.axis = axis;
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  int64_t finite = 0;
  for (std::size_t k = 0; k < pred_slices.size(); ++k) {
    const double p = psnr(pred_slices[k].data, target_slices[k].data);
    const double s = ssim_2d(view_of(pred_slices[k]), view_of(target_slices[k]), params);
    report.psnr_per_slice.push_back(p);
    report.ssim_per_slice.push_back(s);
    if (std::isfinite(p)) {
      psnr_sum += p;
      ++finite;
    } else {
      ++report.n_infinite_psnr;
    }
    ssim_sum += s;
  }
  report.psnr_mean = finite > 0 ? psnr_sum / static_cast<double>(finite)
                                : std::numeric_limits<double>::infinity();
  report.ssim_mean = ssim_sum / static_cast<double>(pred_slices.size());
  return report;
}

}  // namespace uconvert
