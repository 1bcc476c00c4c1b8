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

#include "uconvert/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "uconvert/errors.hpp"
#include "uconvert/random.hpp"

namespace uconvert {
namespace {

using Vec3 = std::array<double, 3>;

// Bounded smooth field: sum of sinusoids whose weights sum to one, so the
// value stays in [-1, 1].
class SmoothField {
 public:
  SmoothField(Rng& rng, int terms, double max_cycles, int size) {
    const double two_pi = 2.0 * std::numbers::pi;
    double total = 0.0;
    for (int k = 0; k < terms; ++k) {
      Wave w;
      for (double& f : w.freq) f = rng.uniform(-max_cycles, max_cycles) * two_pi / size;
      w.phase = rng.uniform(0.0, two_pi);
      w.weight = rng.uniform(0.5, 1.0);
      total += w.weight;
      waves_.push_back(w);
    }
    for (Wave& w : waves_) w.weight /= total;
  }

  double operator()(const Vec3& p) const {
    double v = 0.0;
    for (const Wave& w : waves_) {
      v += w.weight * std::sin(w.freq[0] * p[0] + w.freq[1] * p[1] + w.freq[2] * p[2] + w.phase);
    }
    return v;
  }

 private:
  struct Wave {
    Vec3 freq{};
    double phase = 0.0;
    double weight = 0.0;
  };
  std::vector<Wave> waves_;
};

struct Blob {
  Vec3 centre{};
  Vec3 radii{};

  bool contains(const Vec3& p) const {
    double r2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double t = (p[i] - centre[i]) / radii[i];
      r2 += t * t;
    }
    return r2 <= 1.0;
  }
};

enum class Tissue { kBackground, kCsf, kGray, kWhite };

// Per-subject anatomy, all sizes relative to the volume edge.
struct Anatomy {
  Vec3 centre{};
  Vec3 semi_axes{};
  std::vector<Blob> ventricles;
  std::vector<Blob> nuclei;

  Anatomy(Rng& rng, int size) : folds_(rng, 4, 4.0, 1), surface_(rng, 3, 2.0, 1) {
    const double n = size;
    const double mid = 0.5 * (n - 1);
    centre = {mid, mid, mid};
    const Vec3 base = {0.34, 0.42, 0.36};
    for (int i = 0; i < 3; ++i) semi_axes[i] = n * base[i] * rng.uniform(0.94, 1.06);

    const double lateral = n * 0.07 * rng.uniform(0.85, 1.15);
    for (double side : {-1.0, 1.0}) {
      Blob v;
      v.centre = {mid + side * lateral, mid + n * rng.uniform(-0.03, 0.03),
                  mid + n * rng.uniform(0.0, 0.05)};
      v.radii = {n * 0.045 * rng.uniform(0.85, 1.15), n * 0.16 * rng.uniform(0.85, 1.15),
                 n * 0.07 * rng.uniform(0.85, 1.15)};
      ventricles.push_back(v);

      Blob g;
      g.centre = {mid + side * n * 0.15, mid + n * rng.uniform(-0.02, 0.04),
                  mid - n * rng.uniform(0.03, 0.08)};
      g.radii = {n * 0.05 * rng.uniform(0.85, 1.15), n * 0.07 * rng.uniform(0.85, 1.15),
                 n * 0.05 * rng.uniform(0.85, 1.15)};
      nuclei.push_back(g);
    }
  }

  Tissue classify(const Vec3& p) const {
    Vec3 unit{};
    double r2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      unit[i] = (p[i] - centre[i]) / semi_axes[i];
      r2 += unit[i] * unit[i];
    }
    const double r = std::sqrt(r2);
    const double outer = 1.0 + 0.04 * surface_(unit);
    if (r > outer) return Tissue::kBackground;
    for (const Blob& v : ventricles) {
      if (v.contains(p)) return Tissue::kCsf;
    }
    for (const Blob& g : nuclei) {
      if (g.contains(p)) return Tissue::kGray;
    }
    // Folded white-matter boundary leaves a cortical ribbon of varying width.
    const double inner = 0.80 + 0.07 * folds_(unit);
    return r > inner ? Tissue::kGray : Tissue::kWhite;
  }

 private:
  SmoothField folds_;
  SmoothField surface_;
};

int64_t reflect_index(int64_t i, int64_t n) {
  const int64_t period = 2 * n;
  int64_t m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<int64_t>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : k) w /= total;
  return k;
}

void blur_along(std::vector<float>& data, const Shape3& shape, int axis,
                const std::vector<double>& kernel) {
  const auto radius = static_cast<int64_t>(kernel.size() / 2);
  const int64_t n = shape[axis];
  const int64_t stride = axis == 0 ? shape[1] * shape[2] : (axis == 1 ? shape[2] : 1);
  std::vector<double> line(static_cast<std::size_t>(n));
  for (int64_t d = 0; d < shape[0]; ++d) {
    for (int64_t h = 0; h < shape[1]; ++h) {
      for (int64_t w = 0; w < shape[2]; ++w) {
        const int64_t pos = axis == 0 ? d : (axis == 1 ? h : w);
        if (pos != 0) continue;  // visit each line once, from its first voxel
        const int64_t start = (d * shape[1] + h) * shape[2] + w;
        for (int64_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (int64_t t = -radius; t <= radius; ++t) {
            acc += kernel[static_cast<std::size_t>(t + radius)] *
                   data[static_cast<std::size_t>(start + reflect_index(i + t, n) * stride)];
          }
          line[static_cast<std::size_t>(i)] = acc;
        }
        for (int64_t i = 0; i < n; ++i) {
          data[static_cast<std::size_t>(start + i * stride)] =
              static_cast<float>(line[static_cast<std::size_t>(i)]);
        }
      }
    }
  }
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void PhantomParams::validate() const {
  if (size < 16 || size % 16 != 0) {
    throw ValidationError("phantom size must be >= 16 and divisible by 16, got " +
                          std::to_string(size));
  }
  if (!(0.0 < csf_intensity && csf_intensity < gm_intensity && gm_intensity < wm_intensity &&
        wm_intensity <= 1.0)) {
    throw ValidationError("phantom intensities must satisfy 0 < csf < gm < wm <= 1");
  }
  if (!(bias_amplitude >= 0.0 && bias_amplitude <= 0.2)) {
    throw ValidationError("bias_amplitude must lie in [0, 0.2]");
  }
  if (!(deform_amplitude >= 0.0) || !std::isfinite(deform_amplitude)) {
    throw ValidationError("deform_amplitude must be finite and >= 0");
  }
}

void DegradeParams::validate() const {
  if (!(blur_sigma >= 0.0) || !std::isfinite(blur_sigma)) {
    throw ValidationError("blur_sigma must be finite and >= 0");
  }
  if (!(contrast_alpha > 0.0 && contrast_alpha <= 1.0)) {
    throw ValidationError("contrast_alpha must lie in (0, 1]");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ValidationError("noise_sigma must be finite and >= 0");
  }
}

void to_json(nlohmann::json& j, const PhantomParams& p) {
  j = {{"size", p.size},
       {"wm_intensity", p.wm_intensity},
       {"gm_intensity", p.gm_intensity},
       {"csf_intensity", p.csf_intensity},
       {"bias_amplitude", p.bias_amplitude},
       {"deform_amplitude", p.deform_amplitude}};
}

void from_json(const nlohmann::json& j, PhantomParams& p) {
  j.at("size").get_to(p.size);
  j.at("wm_intensity").get_to(p.wm_intensity);
  j.at("gm_intensity").get_to(p.gm_intensity);
  j.at("csf_intensity").get_to(p.csf_intensity);
  j.at("bias_amplitude").get_to(p.bias_amplitude);
  j.at("deform_amplitude").get_to(p.deform_amplitude);
}

void to_json(nlohmann::json& j, const DegradeParams& p) {
  j = {{"blur_sigma", p.blur_sigma},
       {"contrast_alpha", p.contrast_alpha},
       {"noise_sigma", p.noise_sigma}};
}

void from_json(const nlohmann::json& j, DegradeParams& p) {
  j.at("blur_sigma").get_to(p.blur_sigma);
  j.at("contrast_alpha").get_to(p.contrast_alpha);
  j.at("noise_sigma").get_to(p.noise_sigma);
}

Volume generate_phantom(uint64_t seed, const PhantomParams& params) {
  params.validate();
  Rng rng(seed);
  const Anatomy anatomy(rng, params.size);

  // Each displacement component is bounded by A / sqrt(3), so |d| <= A.
  std::array<SmoothField, 3> warp = {SmoothField(rng, 3, 2.0, params.size),
                                     SmoothField(rng, 3, 2.0, params.size),
                                     SmoothField(rng, 3, 2.0, params.size)};
  const double warp_scale = params.deform_amplitude / std::sqrt(3.0);
  const SmoothField bias(rng, 3, 1.0, params.size);

  const int64_t n = params.size;
  Volume vol({n, n, n});
  auto out = vol.data();
  for (int64_t d = 0; d < n; ++d) {
    for (int64_t h = 0; h < n; ++h) {
      for (int64_t w = 0; w < n; ++w) {
        const Vec3 p = {static_cast<double>(d), static_cast<double>(h), static_cast<double>(w)};
        Vec3 q = p;
        if (warp_scale > 0.0) {
          for (int i = 0; i < 3; ++i) q[i] += warp_scale * warp[i](p);
        }
        double value = 0.0;
        switch (anatomy.classify(q)) {
          case Tissue::kBackground:
            continue;
          case Tissue::kCsf:
            value = params.csf_intensity;
            break;
          case Tissue::kGray:
            value = params.gm_intensity;
            break;
          case Tissue::kWhite:
            value = params.wm_intensity;
            break;
        }
        if (params.bias_amplitude > 0.0) value *= 1.0 + params.bias_amplitude * bias(p);
        out[vol.offset(d, h, w)] = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }
  return vol;
}

Volume gaussian_blur(const Volume& vol, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("blur sigma must be finite and >= 0");
  }
  if (sigma == 0.0) return vol;
  const std::vector<double> kernel = gaussian_kernel(sigma);
  std::vector<float> data(vol.data().begin(), vol.data().end());
  for (int axis = 0; axis < 3; ++axis) blur_along(data, vol.shape(), axis, kernel);
  return Volume(vol.shape(), std::move(data), vol.spacing(), vol.intensity_range());
}

Volume degrade(const Volume& target, const DegradeParams& params, uint64_t seed) {
  params.validate();
  const auto src = target.data();
  if (!std::all_of(src.begin(), src.end(), [](float v) { return v >= 0.0f && v <= 1.0f; })) {
    throw ValidationError("degrade expects a target volume in [0, 1]");
  }

  Volume out = gaussian_blur(target, params.blur_sigma);
  auto data = out.data();
  if (params.contrast_alpha != 1.0) {
    const double mean =
        std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(data.size());
    for (float& v : data) {
      v = static_cast<float>(mean + params.contrast_alpha * (static_cast<double>(v) - mean));
    }
  }
  if (params.noise_sigma > 0.0) {
    Rng rng(seed);
    for (float& v : data) v = static_cast<float>(v + params.noise_sigma * rng.normal());
  }
  for (float& v : data) v = std::clamp(v, 0.0f, 1.0f);
  out.set_intensity_range({0.0, 1.0});
  return out;
}

SubjectSeeds subject_seeds(uint64_t dataset_seed, int64_t subject_id) {
  const auto id = static_cast<uint64_t>(subject_id);
  return {derive_seed(dataset_seed, 2 * id), derive_seed(dataset_seed, 2 * id + 1)};
}

SubjectPair make_subject(int64_t subject_id, uint64_t dataset_seed,
                         const PhantomParams& phantom_params,
                         const DegradeParams& degrade_params) {
  const SubjectSeeds seeds = subject_seeds(dataset_seed, subject_id);
  Volume target = generate_phantom(seeds.phantom, phantom_params);
  Volume source = degrade(target, degrade_params, seeds.noise);
  return {subject_id, std::move(source), std::move(target)};
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json subjects_json = nlohmann::json::array();
  for (const SubjectEntry& s : subjects) {
    subjects_json.push_back({{"id", s.id},
                             {"src_path", s.src_path},
                             {"tgt_path", s.tgt_path},
                             {"phantom_seed", s.phantom_seed},
                             {"noise_seed", s.noise_seed}});
  }
  return {{"version", version},
          {"seed", seed},
          {"phantom_params", phantom_params},
          {"degrade_params", degrade_params},
          {"subjects", subjects_json}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j, std::filesystem::path root) {
  DatasetManifest m;
  try {
    j.at("version").get_to(m.version);
    j.at("seed").get_to(m.seed);
    j.at("phantom_params").get_to(m.phantom_params);
    j.at("degrade_params").get_to(m.degrade_params);
    for (const auto& s : j.at("subjects")) {
      SubjectEntry e;
      s.at("id").get_to(e.id);
      s.at("src_path").get_to(e.src_path);
      s.at("tgt_path").get_to(e.tgt_path);
      if (s.contains("phantom_seed")) s.at("phantom_seed").get_to(e.phantom_seed);
      if (s.contains("noise_seed")) s.at("noise_seed").get_to(e.noise_seed);
      m.subjects.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset manifest: ") + e.what());
  }
  m.root = std::move(root);
  return m;
}

DatasetManifest generate_dataset(int n_subjects, uint64_t seed,
                                 const PhantomParams& phantom_params,
                                 const DegradeParams& degrade_params,
                                 const std::filesystem::path& out_dir) {
  if (n_subjects < 2) throw ValidationError("need at least 2 subjects");
  phantom_params.validate();
  degrade_params.validate();

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  }

  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.phantom_params = phantom_params;
  manifest.degrade_params = degrade_params;
  manifest.root = out_dir;

  // Every subject depends only on (seed, id); generation order is irrelevant.
  for (int64_t id = 0; id < n_subjects; ++id) {
    const SubjectPair pair = make_subject(id, seed, phantom_params, degrade_params);
    const SubjectSeeds seeds = subject_seeds(seed, id);
    SubjectEntry entry{id, "subject_" + std::to_string(id) + "_src.mvol",
                       "subject_" + std::to_string(id) + "_tgt.mvol", seeds.phantom, seeds.noise};
    write_mvol(pair.source, out_dir / entry.src_path);
    write_mvol(pair.target, out_dir / entry.tgt_path);
    manifest.subjects.push_back(std::move(entry));
  }
  write_json_file(manifest.to_json(), out_dir / kManifestFileName);
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::filesystem::path file = path;
  if (std::filesystem::is_directory(file)) file /= kManifestFileName;
  std::ifstream in(file);
  if (!in) throw IoError("cannot open dataset manifest " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("malformed dataset manifest at byte offset " + std::to_string(e.byte) +
                      ": " + e.what());
  }
  return DatasetManifest::from_json(j, file.parent_path());
}

SubjectPair load_subject(const DatasetManifest& manifest, int64_t subject_id) {
  const auto it = std::find_if(manifest.subjects.begin(), manifest.subjects.end(),
                               [&](const SubjectEntry& s) { return s.id == subject_id; });
  if (it == manifest.subjects.end()) {
    throw ValidationError("subject " + std::to_string(subject_id) + " not in manifest");
  }
  Volume source = read_mvol(manifest.root / it->src_path);
  Volume target = read_mvol(manifest.root / it->tgt_path);
  if (!source.same_geometry(target)) {
    throw ShapeError("geometry mismatch between source and target of subject " +
                     std::to_string(subject_id));
  }
  return {subject_id, std::move(source), std::move(target)};
}

std::vector<SubjectPair> load_subjects(const DatasetManifest& manifest,
                                       std::span<const int64_t> subject_ids) {
  std::vector<SubjectPair> pairs;
  pairs.reserve(subject_ids.size());
  for (int64_t id : subject_ids) pairs.push_back(load_subject(manifest, id));
  return pairs;
}

SubjectSplit split_by_subject(const DatasetManifest& manifest, double train_fraction,
                              uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train fraction must lie in (0, 1)");
  }
  const auto n = static_cast<int64_t>(manifest.subjects.size());
  if (n < 2) throw ValidationError("need at least 2 subjects");

  std::vector<int64_t> ids;
  for (const SubjectEntry& s : manifest.subjects) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(std::span<int64_t>(ids));

  const auto n_train =
      std::clamp<int64_t>(std::llround(train_fraction * static_cast<double>(n)), 1, n - 1);
  SubjectSplit split;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.test.assign(ids.begin() + n_train, ids.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace uconvert
