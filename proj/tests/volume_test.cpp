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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "support/oracles.hpp"
#include "uconvert/errors.hpp"
#include "uconvert/volume.hpp"

namespace uconvert {
namespace {

using testing::random_volume;
using testing::TempDir;

void write_raw(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string mvol_bytes(const std::string& header, std::size_t payload_bytes,
                       const char* magic = "MVOL0001") {
  std::string bytes(magic, 8);
  const auto n = static_cast<uint32_t>(header.size());
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((n >> (8 * i)) & 0xFF));
  bytes += header;
  bytes.append(payload_bytes, '\0');
  return bytes;
}

TEST(Axis, FixedArrayMapping) {
  EXPECT_EQ(array_axis(Axis::kSagittal), 0);
  EXPECT_EQ(array_axis(Axis::kCoronal), 1);
  EXPECT_EQ(array_axis(Axis::kAxial), 2);
  for (Axis a : kAllAxes) EXPECT_EQ(parse_axis(axis_name(a)), a);
  EXPECT_THROW(parse_axis("oblique"), ValidationError);
}

TEST(Volume, RejectsInvalidGeometry) {
  EXPECT_THROW(Volume({0, 2, 2}), ShapeError);
  EXPECT_THROW(Volume({2, 2, 2}, Spacing3{1.0, 0.0, 1.0}), ValidationError);
  EXPECT_THROW(Volume({2, 2, 2}, Spacing3{1.0, std::numeric_limits<double>::infinity(), 1.0}),
               ValidationError);
  EXPECT_THROW(Volume({2, 2, 2}, std::vector<float>(7)), ShapeError);
}

TEST(Mvol, ConstantRoundTripIsBitExact) {
  TempDir dir("mvol");
  Volume v({4, 4, 4}, std::vector<float>(64, 0.5f));
  write_mvol(v, dir / "half.mvol");
  EXPECT_EQ(read_mvol(dir / "half.mvol"), v);
}

TEST(Mvol, RandomRoundTripIsBitExact) {
  TempDir dir("mvol");
  const Volume v = random_volume({64, 64, 64}, 11);
  write_mvol(v, dir / "rand.mvol");
  const Volume back = read_mvol(dir / "rand.mvol");
  ASSERT_EQ(back.shape(), v.shape());
  EXPECT_EQ(back.spacing(), v.spacing());
  double max_diff = 0.0;
  for (int64_t i = 0; i < v.size(); ++i) {
    max_diff = std::max(max_diff, static_cast<double>(std::abs(back.data()[i] - v.data()[i])));
  }
  EXPECT_EQ(max_diff, 0.0);
  EXPECT_EQ(back, v);
}

TEST(Mvol, LayoutMatchesFormat) {
  TempDir dir("mvol");
  Volume v({1, 1, 2}, std::vector<float>{1.0f, -2.5f}, {0.5, 1.0, 2.0}, {-3.0, 1.0});
  write_mvol(v, dir / "tiny.mvol");
  const std::string bytes = read_raw(dir / "tiny.mvol");
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(bytes.substr(0, 8), "MVOL0001");
  const auto* u = reinterpret_cast<const unsigned char*>(bytes.data());
  const uint32_t n = u[8] | (u[9] << 8) | (u[10] << 16) | (static_cast<uint32_t>(u[11]) << 24);
  const auto header = nlohmann::json::parse(bytes.substr(12, n));
  EXPECT_EQ(header.at("shape"), nlohmann::json({1, 1, 2}));
  EXPECT_EQ(header.at("dtype"), "f32");
  EXPECT_EQ(header.at("spacing"), nlohmann::json({0.5, 1.0, 2.0}));
  EXPECT_EQ(header.at("intensity_range"), nlohmann::json({-3.0, 1.0}));
  ASSERT_EQ(bytes.size(), 12 + n + 8);
  // 1.0f = 0x3F800000, -2.5f = 0xC0200000, little-endian.
  const std::string payload = bytes.substr(12 + n);
  EXPECT_EQ(payload, std::string("\x00\x00\x80\x3F\x00\x00\x20\xC0", 8));
}

TEST(Mvol, RejectsNonFiniteData) {
  TempDir dir("mvol");
  Volume v({2, 2, 2});
  v.at(1, 0, 1) = std::numeric_limits<float>::quiet_NaN();
  try {
    write_mvol(v, dir / "nan.mvol");
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite data"), std::string::npos);
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "nan.mvol"));
}

TEST(Mvol, RejectsBadMagic) {
  TempDir dir("mvol");
  write_raw(dir / "x.mvol", mvol_bytes(R"({"shape":[1,1,1]})", 4, "XVOL0001"));
  try {
    read_mvol(dir / "x.mvol");
    FAIL() << "expected an error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("not an MVOL file"), std::string::npos);
  }
}

TEST(Mvol, RejectsTruncatedPayload) {
  TempDir dir("mvol");
  write_raw(dir / "t.mvol",
            mvol_bytes(R"({"shape":[2,2,2],"spacing":[1,1,1],"dtype":"f32","intensity_range":[0,1]})",
                       28));
  try {
    read_mvol(dir / "t.mvol");
    FAIL() << "expected an error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("payload length mismatch"), std::string::npos);
  }
}

TEST(Mvol, MalformedHeaderReportsByteOffset) {
  TempDir dir("mvol");
  write_raw(dir / "m.mvol", mvol_bytes(R"({"shape":[2,2,)", 32));
  try {
    read_mvol(dir / "m.mvol");
    FAIL() << "expected an error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos) << e.what();
  }
  write_raw(dir / "d.mvol",
            mvol_bytes(R"({"shape":[1,1,1],"spacing":[1,1,1],"dtype":"f64","intensity_range":[0,1]})",
                       4));
  EXPECT_THROW(read_mvol(dir / "d.mvol"), FormatError);
}

TEST(Slices, ShapesFollowAxisConvention) {
  const Volume v = random_volume({2, 3, 4}, 1);
  const auto sag = extract_slices(v, Axis::kSagittal);
  ASSERT_EQ(sag.size(), 2u);
  EXPECT_EQ(sag[0].rows, 3);
  EXPECT_EQ(sag[0].cols, 4);
  const auto cor = extract_slices(v, Axis::kCoronal);
  ASSERT_EQ(cor.size(), 3u);
  EXPECT_EQ(cor[0].rows, 2);
  EXPECT_EQ(cor[0].cols, 4);
  const auto ax = extract_slices(v, Axis::kAxial);
  ASSERT_EQ(ax.size(), 4u);
  EXPECT_EQ(ax[0].rows, 2);
  EXPECT_EQ(ax[0].cols, 3);
}

TEST(Slices, IndexBookkeepingMatchesDirectIndexing) {
  Volume v({2, 3, 4});
  v.at(1, 2, 3) = 0.9f;
  const auto cor = extract_slices(v, Axis::kCoronal);
  EXPECT_EQ(cor[2].index, 2);
  EXPECT_EQ(cor[2].at(1, 3), 0.9f);

  const Volume r = random_volume({3, 4, 5}, 2);
  for (Axis axis : kAllAxes) {
    for (const Slice2D& s : extract_slices(r, axis)) {
      for (int64_t i = 0; i < s.rows; ++i) {
        for (int64_t j = 0; j < s.cols; ++j) {
          const float expected = axis == Axis::kSagittal  ? r.at(s.index, i, j)
                                 : axis == Axis::kCoronal ? r.at(i, s.index, j)
                                                          : r.at(i, j, s.index);
          ASSERT_EQ(s.at(i, j), expected);
        }
      }
    }
  }
}

TEST(Slices, EveryVoxelAppearsExactlyOnce) {
  Volume v({3, 4, 5});
  for (int64_t i = 0; i < v.size(); ++i) v.data()[i] = static_cast<float>(i);
  for (Axis axis : kAllAxes) {
    std::vector<int> seen(static_cast<std::size_t>(v.size()), 0);
    for (const Slice2D& s : extract_slices(v, axis)) {
      for (float x : s.data) ++seen[static_cast<std::size_t>(x)];
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
}

TEST(Slices, StackRoundTripIsBitExactOnEveryAxis) {
  for (uint64_t seed : {3u, 4u, 5u}) {
    const Volume v = random_volume({8, 8, 8}, seed);
    const Volume w = random_volume({5, 7, 3}, seed + 100);
    for (Axis axis : kAllAxes) {
      EXPECT_EQ(stack_slices(extract_slices(v, axis), axis, v.spacing()), v);
      EXPECT_EQ(stack_slices(extract_slices(w, axis), axis, w.spacing()), w);
    }
  }
}

TEST(Slices, StackAcceptsAnyOrder) {
  const Volume v = random_volume({4, 5, 6}, 8);
  auto slices = extract_slices(v, Axis::kAxial);
  std::reverse(slices.begin(), slices.end());
  EXPECT_EQ(stack_slices(slices, Axis::kAxial, v.spacing()), v);
}

TEST(Slices, StackRejectsBadInput) {
  try {
    stack_slices({}, Axis::kSagittal, {1, 1, 1});
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("no slices"), std::string::npos);
  }

  std::vector<Slice2D> mixed = {
      {3, 4, std::vector<float>(12), Axis::kSagittal, 0},
      {3, 5, std::vector<float>(15), Axis::kSagittal, 1},
  };
  try {
    stack_slices(mixed, Axis::kSagittal, {1, 1, 1});
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("inconsistent slice shapes"), std::string::npos);
  }

  std::vector<Slice2D> dup = {
      {2, 2, std::vector<float>(4), Axis::kSagittal, 0},
      {2, 2, std::vector<float>(4), Axis::kSagittal, 0},
  };
  EXPECT_THROW(stack_slices(dup, Axis::kSagittal, {1, 1, 1}), ShapeError);
  std::vector<Slice2D> gap = {
      {2, 2, std::vector<float>(4), Axis::kSagittal, 0},
      {2, 2, std::vector<float>(4), Axis::kSagittal, 2},
  };
  EXPECT_THROW(stack_slices(gap, Axis::kSagittal, {1, 1, 1}), ShapeError);
  EXPECT_THROW(stack_slices(gap, Axis::kCoronal, {1, 1, 1}), ShapeError);
}

TEST(Normalize, AffineMapToUnitRange) {
  Volume v({1, 1, 3}, std::vector<float>{0.0f, 5.0f, 10.0f});
  const Volume n = normalize(v);
  EXPECT_EQ(n.data()[0], 0.0f);
  EXPECT_EQ(n.data()[1], 0.5f);
  EXPECT_EQ(n.data()[2], 1.0f);
  EXPECT_EQ(n.intensity_range(), (IntensityRange{0.0, 1.0}));
}

TEST(Normalize, UnitRangeInputIsUnchanged) {
  Volume v = random_volume({4, 4, 4}, 9);
  v.data()[0] = 0.0f;
  v.data()[1] = 1.0f;
  EXPECT_EQ(normalize(v), v);
}

TEST(Normalize, IdempotentWithinRounding) {
  Volume v = random_volume({6, 6, 6}, 10);
  for (float& x : v.data()) x = 3.0f * x - 7.0f;
  const Volume once = normalize(v);
  const Volume twice = normalize(once);
  for (int64_t i = 0; i < v.size(); ++i) {
    EXPECT_LE(std::abs(once.data()[i] - twice.data()[i]), 1e-6f);
    EXPECT_GE(once.data()[i], 0.0f);
    EXPECT_LE(once.data()[i], 1.0f);
  }
}

TEST(Normalize, ConstantVolumeIsAnError) {
  Volume v({2, 2, 2}, std::vector<float>(8, 0.3f));
  try {
    normalize(v);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate intensity range"), std::string::npos);
  }
}

}  // namespace
}  // namespace uconvert
