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
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uconvert/volume.hpp"

namespace uconvert {

/// Ground-truth ("3T-like") phantom parameters.
struct PhantomParams {
  int size = 64;
  double wm_intensity = 0.70;
  double gm_intensity = 0.45;
  double csf_intensity = 0.20;
  double bias_amplitude = 0.10;
  double deform_amplitude = 2.0;  // voxels

  void validate() const;
};

/// Maps a phantom to its "1.5T-like" counterpart.
struct DegradeParams {
  double blur_sigma = 1.0;  // voxels
  double contrast_alpha = 0.6;
  double noise_sigma = 0.03;

  void validate() const;
};

void to_json(nlohmann::json& j, const PhantomParams& p);
void from_json(const nlohmann::json& j, PhantomParams& p);
void to_json(nlohmann::json& j, const DegradeParams& p);
void from_json(const nlohmann::json& j, DegradeParams& p);

struct SubjectPair {
  int64_t subject_id = 0;
  Volume source;  // degraded
  Volume target;  // ground truth
};

/// Brain-like ellipsoid with a gray-matter ribbon, white-matter interior and
/// CSF ventricles, warped by a smooth displacement field and modulated by a
/// smooth bias field. Background voxels are exactly zero.
Volume generate_phantom(uint64_t seed, const PhantomParams& params);

/// Separable Gaussian blur, kernel truncated at 4 sigma, symmetric (half-sample)
/// reflection at the borders. sigma == 0 returns the input unchanged.
Volume gaussian_blur(const Volume& vol, double sigma);

/// clamp(m + alpha * (blur(target) - m) + noise, 0, 1) with m the mean of the
/// blurred volume.
Volume degrade(const Volume& target, const DegradeParams& params, uint64_t seed);

struct SubjectSeeds {
  uint64_t phantom;
  uint64_t noise;
};
SubjectSeeds subject_seeds(uint64_t dataset_seed, int64_t subject_id);

/// In-memory version of one dataset entry.
SubjectPair make_subject(int64_t subject_id, uint64_t dataset_seed,
                         const PhantomParams& phantom_params, const DegradeParams& degrade_params);

struct SubjectEntry {
  int64_t id = 0;
  std::string src_path;  // relative to the manifest directory
  std::string tgt_path;
  uint64_t phantom_seed = 0;
  uint64_t noise_seed = 0;
};

struct DatasetManifest {
  int version = 1;
  uint64_t seed = 0;
  PhantomParams phantom_params;
  DegradeParams degrade_params;
  std::vector<SubjectEntry> subjects;
  std::filesystem::path root;  // directory holding manifest.json; not serialised

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j, std::filesystem::path root);
};

inline constexpr const char* kManifestFileName = "manifest.json";

/// Writes subject_<id>_src.mvol / subject_<id>_tgt.mvol for ids 0..n-1 and
/// manifest.json into out_dir.
DatasetManifest generate_dataset(int n_subjects, uint64_t seed, const PhantomParams& phantom_params,
                                 const DegradeParams& degrade_params,
                                 const std::filesystem::path& out_dir);

/// Accepts the manifest file itself or the directory containing it.
DatasetManifest load_manifest(const std::filesystem::path& path);

SubjectPair load_subject(const DatasetManifest& manifest, int64_t subject_id);
std::vector<SubjectPair> load_subjects(const DatasetManifest& manifest,
                                       std::span<const int64_t> subject_ids);

struct SubjectSplit {
  std::vector<int64_t> train;
  std::vector<int64_t> test;
};

/// Subject-level random partition; train size is round(fraction * n) clamped
/// so that each side keeps at least one subject. Both lists are sorted.
SubjectSplit split_by_subject(const DatasetManifest& manifest, double train_fraction,
                              uint64_t seed);

}  // namespace uconvert
