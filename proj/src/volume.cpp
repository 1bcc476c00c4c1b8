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

#include "uconvert/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

#include "uconvert/errors.hpp"

namespace uconvert {
namespace {

constexpr char kMagic[8] = {'M', 'V', 'O', 'L', '0', '0', '0', '1'};
constexpr std::size_t kPreambleBytes = 12;

void validate_geometry(const Shape3& shape, const Spacing3& spacing) {
  for (int i = 0; i < 3; ++i) {
    if (shape[i] < 1) {
      throw ShapeError("invalid volume shape: dimension " + std::to_string(i) + " is " +
                       std::to_string(shape[i]));
    }
    if (!std::isfinite(spacing[i]) || spacing[i] <= 0.0) {
      throw ValidationError("invalid spacing: component " + std::to_string(i) +
                            " must be positive and finite");
    }
  }
}

int64_t voxel_count(const Shape3& shape) { return shape[0] * shape[1] * shape[2]; }

uint32_t load_u32_le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void store_u32_le(uint32_t v, char* p) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
}

// Strides of the two in-plane array axes for a slice along `axis`.
struct PlaneLayout {
  int64_t slice_stride;
  int64_t row_stride;
  int64_t col_stride;
};

PlaneLayout plane_layout(const Shape3& shape, Axis axis) {
  const int64_t s0 = shape[1] * shape[2];
  const int64_t s1 = shape[2];
  switch (axis) {
    case Axis::kSagittal:
      return {s0, s1, 1};
    case Axis::kCoronal:
      return {s1, s0, 1};
    case Axis::kAxial:
      return {1, s0, s1};
  }
  throw ValidationError("unknown axis");
}

}  // namespace

std::string_view axis_name(Axis axis) {
  switch (axis) {
    case Axis::kSagittal:
      return "sagittal";
    case Axis::kCoronal:
      return "coronal";
    case Axis::kAxial:
      return "axial";
  }
  return "unknown";
}

Axis parse_axis(std::string_view name) {
  for (Axis a : kAllAxes) {
    if (axis_name(a) == name) return a;
  }
  throw ValidationError("unknown axis '" + std::string(name) +
                        "' (expected sagittal, coronal or axial)");
}

Volume::Volume(Shape3 shape, Spacing3 spacing, IntensityRange intensity_range)
    : shape_(shape), spacing_(spacing), intensity_range_(intensity_range) {
  validate_geometry(shape_, spacing_);
  data_.assign(static_cast<std::size_t>(voxel_count(shape_)), 0.0f);
}

Volume::Volume(Shape3 shape, std::vector<float> data, Spacing3 spacing,
               IntensityRange intensity_range)
    : shape_(shape), data_(std::move(data)), spacing_(spacing), intensity_range_(intensity_range) {
  validate_geometry(shape_, spacing_);
  if (static_cast<int64_t>(data_.size()) != voxel_count(shape_)) {
    throw ShapeError("volume data has " + std::to_string(data_.size()) + " elements, shape needs " +
                     std::to_string(voxel_count(shape_)));
  }
}

bool operator==(const Volume& a, const Volume& b) {
  if (a.shape_ != b.shape_ || a.spacing_ != b.spacing_ ||
      a.intensity_range_ != b.intensity_range_) {
    return false;
  }
  return std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
}

std::array<int64_t, 2> slice_shape(const Shape3& shape, Axis axis) {
  switch (axis) {
    case Axis::kSagittal:
      return {shape[1], shape[2]};
    case Axis::kCoronal:
      return {shape[0], shape[2]};
    case Axis::kAxial:
      return {shape[0], shape[1]};
  }
  throw ValidationError("unknown axis");
}

std::vector<Slice2D> extract_slices(const Volume& vol, Axis axis) {
  const auto [rows, cols] = slice_shape(vol.shape(), axis);
  const PlaneLayout layout = plane_layout(vol.shape(), axis);
  const auto src = vol.data();
  const int64_t n = vol.extent(axis);

  std::vector<Slice2D> slices;
  slices.reserve(static_cast<std::size_t>(n));
  for (int64_t k = 0; k < n; ++k) {
    Slice2D s{rows, cols, std::vector<float>(static_cast<std::size_t>(rows * cols)), axis, k};
    const int64_t base = k * layout.slice_stride;
    for (int64_t r = 0; r < rows; ++r) {
      const int64_t row_base = base + r * layout.row_stride;
      for (int64_t c = 0; c < cols; ++c) {
        s.data[r * cols + c] = src[row_base + c * layout.col_stride];
      }
    }
    slices.push_back(std::move(s));
  }
  return slices;
}

Volume stack_slices(std::span<const Slice2D> slices, Axis axis, Spacing3 spacing,
                    IntensityRange intensity_range) {
  if (slices.empty()) throw ShapeError("no slices");
  const int64_t rows = slices.front().rows;
  const int64_t cols = slices.front().cols;
  const auto n = static_cast<int64_t>(slices.size());
  std::vector<bool> seen(slices.size(), false);
  for (const Slice2D& s : slices) {
    if (s.rows != rows || s.cols != cols || static_cast<int64_t>(s.data.size()) != rows * cols) {
      throw ShapeError("inconsistent slice shapes");
    }
    if (s.source_axis != axis) {
      throw ShapeError("slice " + std::to_string(s.index) + " was taken along " +
                       std::string(axis_name(s.source_axis)) + ", not " +
                       std::string(axis_name(axis)));
    }
    if (s.index < 0 || s.index >= n) {
      throw ShapeError("missing slice indices: index " + std::to_string(s.index) +
                       " outside 0.." + std::to_string(n - 1));
    }
    if (seen[static_cast<std::size_t>(s.index)]) {
      throw ShapeError("duplicate slice index " + std::to_string(s.index));
    }
    seen[static_cast<std::size_t>(s.index)] = true;
  }

  Shape3 shape{};
  switch (axis) {
    case Axis::kSagittal:
      shape = {n, rows, cols};
      break;
    case Axis::kCoronal:
      shape = {rows, n, cols};
      break;
    case Axis::kAxial:
      shape = {rows, cols, n};
      break;
  }

  Volume vol(shape, spacing, intensity_range);
  const PlaneLayout layout = plane_layout(shape, axis);
  auto dst = vol.data();
  for (const Slice2D& s : slices) {
    const int64_t base = s.index * layout.slice_stride;
    for (int64_t r = 0; r < rows; ++r) {
      const int64_t row_base = base + r * layout.row_stride;
      for (int64_t c = 0; c < cols; ++c) {
        dst[row_base + c * layout.col_stride] = s.data[r * cols + c];
      }
    }
  }
  return vol;
}

Volume normalize(const Volume& vol) {
  const auto src = vol.data();
  const auto [lo_it, hi_it] = std::minmax_element(src.begin(), src.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw ValidationError("degenerate intensity range");
  Volume out(vol.shape(), vol.spacing(), {0.0, 1.0});
  auto dst = out.data();
  const double scale = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>((static_cast<double>(src[i]) - lo) * scale);
  }
  return out;
}

void write_mvol(const Volume& vol, const std::filesystem::path& path) {
  const auto src = vol.data();
  if (!std::all_of(src.begin(), src.end(), [](float v) { return std::isfinite(v); })) {
    throw ValidationError("non-finite data: refusing to write " + path.string());
  }

  nlohmann::json header = {
      {"shape", vol.shape()},
      {"spacing", vol.spacing()},
      {"dtype", "f32"},
      {"intensity_range", vol.intensity_range()},
  };
  const std::string header_text = header.dump();

  std::string bytes(kPreambleBytes + header_text.size() + src.size() * sizeof(float), '\0');
  std::memcpy(bytes.data(), kMagic, sizeof(kMagic));
  store_u32_le(static_cast<uint32_t>(header_text.size()), bytes.data() + 8);
  std::memcpy(bytes.data() + kPreambleBytes, header_text.data(), header_text.size());
  char* payload = bytes.data() + kPreambleBytes + header_text.size();
  for (std::size_t i = 0; i < src.size(); ++i) {
    uint32_t bits = std::bit_cast<uint32_t>(src[i]);
    store_u32_le(bits, payload + 4 * i);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Volume read_mvol(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not an MVOL file: " + path.string());
  }
  if (bytes.size() < kPreambleBytes) {
    throw FormatError("malformed MVOL header at byte offset 8: truncated header length");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const uint32_t header_len = load_u32_le(raw + 8);
  if (bytes.size() - kPreambleBytes < header_len) {
    throw FormatError("malformed MVOL header at byte offset " + std::to_string(bytes.size()) +
                      ": header declares " + std::to_string(header_len) + " bytes");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPreambleBytes,
                                   bytes.begin() + kPreambleBytes + header_len);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("malformed MVOL header at byte offset " +
                      std::to_string(kPreambleBytes + e.byte) + ": " + e.what());
  }

  Shape3 shape{};
  Spacing3 spacing{};
  IntensityRange range{};
  try {
    if (!header.is_object()) throw FormatError("header is not a JSON object");
    if (header.at("dtype").get<std::string>() != "f32") {
      throw FormatError("unsupported dtype " + header.at("dtype").dump());
    }
    shape = header.at("shape").get<Shape3>();
    spacing = header.at("spacing").get<Spacing3>();
    range = header.at("intensity_range").get<IntensityRange>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed MVOL header at byte offset " + std::to_string(kPreambleBytes) +
                      ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError("malformed MVOL header at byte offset " + std::to_string(kPreambleBytes) +
                      ": " + e.what());
  }
  for (int64_t extent : shape) {
    if (extent < 1) throw FormatError("malformed MVOL header: non-positive shape entry");
  }

  const std::size_t payload_offset = kPreambleBytes + header_len;
  const std::size_t payload_len = bytes.size() - payload_offset;
  const auto expected = static_cast<std::size_t>(voxel_count(shape)) * sizeof(float);
  if (payload_len != expected) {
    throw FormatError("payload length mismatch: expected " + std::to_string(expected) +
                      " bytes, found " + std::to_string(payload_len));
  }

  std::vector<float> data(static_cast<std::size_t>(voxel_count(shape)));
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(load_u32_le(raw + payload_offset + 4 * i));
  }
  return Volume(shape, std::move(data), spacing, range);
}

}  // namespace uconvert
