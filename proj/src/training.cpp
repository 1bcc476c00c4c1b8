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

#include "uconvert/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "uconvert/errors.hpp"
#include "uconvert/random.hpp"

namespace uconvert {
namespace {

// Stream ids for derive_seed.
constexpr uint64_t kShuffleStream = 1;
constexpr uint64_t kDropoutStream = 2;

using Clock = std::chrono::steady_clock;

torch::Tensor slices_to_tensor(const std::vector<Slice2D>& slices) {
  const int64_t rows = slices.front().rows;
  const int64_t cols = slices.front().cols;
  auto t = torch::empty({static_cast<int64_t>(slices.size()), 1, rows, cols}, torch::kFloat32);
  float* dst = t.data_ptr<float>();
  for (const Slice2D& s : slices) {
    std::memcpy(dst, s.data.data(), s.data.size() * sizeof(float));
    dst += s.data.size();
  }
  return t;
}

void check_view_shape(const Model& model, int64_t rows, int64_t cols, Axis view) {
  try {
    model.check_slice_shape(rows, cols);
  } catch (const ShapeError& e) {
    throw ShapeError("view " + std::string(axis_name(view)) + ": " + e.what());
  }
}

void check_finite(double value, const char* what, int epoch, int64_t batch) {
  if (!std::isfinite(value)) {
    throw TrainingError(std::string("non-finite ") + what + " at epoch " +
                        std::to_string(epoch) + " batch " + std::to_string(batch));
  }
}

torch::optim::Adam make_adam(const std::vector<torch::Tensor>& params, const TrainHistory& h) {
  return torch::optim::Adam(params, torch::optim::AdamOptions(h.config.learning_rate)
                                        .betas({h.adam_beta1, h.adam_beta2})
                                        .eps(h.adam_eps));
}

SliceDataset prepare(const Model& model, std::span<const SubjectPair> pairs,
                     const TrainConfig& config) {
  config.validate();
  if (pairs.empty()) throw ValidationError("empty dataset: no training pairs");
  SliceDataset data = make_slice_dataset(pairs, config.view);
  check_view_shape(model, data.source.size(2), data.source.size(3), config.view);
  const auto dtype = model.parameters().front().scalar_type();
  data.source = data.source.to(dtype);
  data.target = data.target.to(dtype);
  return data;
}

// Runs `step(batch_index, source, target)` over one shuffled epoch and returns
// the sample-weighted mean of each value the step reports.
template <std::size_t K, typename Step>
std::array<double, K> run_epoch(const SliceDataset& data, const TrainConfig& config, int epoch,
                                Step&& step) {
  const std::vector<int64_t> order = epoch_order(data.size(), config.seed, epoch);
  const auto index = torch::tensor(order, torch::kInt64);
  std::array<double, K> sums{};
  const int64_t n = data.size();
  int64_t batch = 0;
  for (int64_t start = 0; start < n; start += config.batch_size, ++batch) {
    const int64_t len = std::min<int64_t>(config.batch_size, n - start);
    const auto idx = index.slice(0, start, start + len);
    const std::array<double, K> values =
        step(batch, data.source.index_select(0, idx), data.target.index_select(0, idx));
    for (std::size_t k = 0; k < K; ++k) sums[k] += values[k] * static_cast<double>(len);
  }
  for (double& s : sums) s /= static_cast<double>(n);
  return sums;
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kUConvert:
      return "uconvert";
    case ModelKind::kSrgan:
      return "srgan";
    case ModelKind::kEspcn:
      return "espcn";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::kUConvert, ModelKind::kSrgan, ModelKind::kEspcn}) {
    if (model_kind_name(k) == name) return k;
  }
  if (name == "prsr") throw ValidationError("model not supported (out of scope): prsr");
  throw ValidationError("unknown model '" + std::string(name) +
                        "' (expected uconvert, srgan or espcn)");
}

ModelKind model_kind_of(Architecture architecture) {
  switch (architecture) {
    case Architecture::kUConvertNet:
      return ModelKind::kUConvert;
    case Architecture::kEspcn:
      return ModelKind::kEspcn;
    case Architecture::kSrganGenerator:
    case Architecture::kSrganDiscriminator:
      return ModelKind::kSrgan;
  }
  throw ValidationError("unknown architecture");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be > 0");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(adversarial_weight >= 0.0) || !std::isfinite(adversarial_weight)) {
    throw ValidationError("adversarial_weight must be finite and >= 0");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"model", model_kind_name(c.model)},
       {"view", axis_name(c.view)},
       {"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"seed", c.seed},
       {"adversarial_weight", c.adversarial_weight}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.model = parse_model_kind(j.at("model").get<std::string>());
  c.view = parse_axis(j.at("view").get<std::string>());
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("batch_size").get_to(c.batch_size);
  j.at("epochs").get_to(c.epochs);
  j.at("seed").get_to(c.seed);
  j.at("adversarial_weight").get_to(c.adversarial_weight);
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch}, {"loss", r.loss}, {"seconds", r.seconds}};
  if (r.discriminator_loss) j["discriminator_loss"] = *r.discriminator_loss;
  if (r.adversarial_loss) j["adversarial_loss"] = *r.adversarial_loss;
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  j.at("epoch").get_to(r.epoch);
  j.at("loss").get_to(r.loss);
  j.at("seconds").get_to(r.seconds);
  if (j.contains("discriminator_loss")) r.discriminator_loss = j.at("discriminator_loss");
  if (j.contains("adversarial_loss")) r.adversarial_loss = j.at("adversarial_loss");
}

nlohmann::json TrainHistory::to_json() const {
  return {{"config", config},
          {"optimizer",
           {{"name", optimizer}, {"beta1", adam_beta1}, {"beta2", adam_beta2}, {"eps", adam_eps}}},
          {"epochs", epochs}};
}

TrainHistory TrainHistory::from_json(const nlohmann::json& j) {
  TrainHistory h;
  j.at("config").get_to(h.config);
  const auto& opt = j.at("optimizer");
  opt.at("name").get_to(h.optimizer);
  opt.at("beta1").get_to(h.adam_beta1);
  opt.at("beta2").get_to(h.adam_beta2);
  opt.at("eps").get_to(h.adam_eps);
  j.at("epochs").get_to(h.epochs);
  return h;
}

void TrainHistory::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const EpochRecord& r : epochs) out << nlohmann::json(r).dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

SliceDataset make_slice_dataset(std::span<const SubjectPair> pairs, Axis view) {
  if (pairs.empty()) throw ValidationError("empty dataset: no training pairs");
  std::vector<Slice2D> sources;
  std::vector<Slice2D> targets;
  const Shape3 shape = pairs.front().source.shape();
  for (const SubjectPair& p : pairs) {
    if (p.source.shape() != shape || p.target.shape() != shape) {
      throw ShapeError("all training pairs must share one shape (subject " +
                       std::to_string(p.subject_id) + " differs)");
    }
    for (Slice2D& s : extract_slices(p.source, view)) sources.push_back(std::move(s));
    for (Slice2D& s : extract_slices(p.target, view)) targets.push_back(std::move(s));
  }
  return {slices_to_tensor(sources), slices_to_tensor(targets)};
}

std::vector<int64_t> epoch_order(int64_t n, uint64_t seed, int epoch) {
  std::vector<int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), int64_t{0});
  Rng rng(derive_seed(derive_seed(seed, kShuffleStream), static_cast<uint64_t>(epoch)));
  rng.shuffle(std::span<int64_t>(order));
  return order;
}

TrainHistory train_mse(Model& model, std::span<const SubjectPair> pairs, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  const SliceDataset data = prepare(model, pairs, config);
  TrainHistory history;
  history.config = config;
  torch::manual_seed(derive_seed(config.seed, kDropoutStream));
  auto optimizer = make_adam(model.parameters(), history);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = Clock::now();
    const auto [loss] = run_epoch<1>(
        data, config, epoch,
        [&](int64_t batch, const torch::Tensor& src, const torch::Tensor& tgt) {
          const auto pred = model.forward(src, /*training_mode=*/true);
          auto loss = torch::mse_loss(pred, tgt);
          const double value = loss.item<double>();
          check_finite(value, "loss", epoch, batch);
          optimizer.zero_grad();
          loss.backward();
          optimizer.step();
          return std::array<double, 1>{value};
        });
    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss;
    record.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return history;
}

TrainHistory train_gan(Model& generator, Model& discriminator, std::span<const SubjectPair> pairs,
                       const TrainConfig& config, const EpochCallback& on_epoch) {
  if (discriminator.architecture() != Architecture::kSrganDiscriminator) {
    throw ValidationError("train_gan needs an SRGAN discriminator");
  }
  const SliceDataset data = prepare(generator, pairs, config);
  TrainHistory history;
  history.config = config;
  torch::manual_seed(derive_seed(config.seed, kDropoutStream));
  auto gen_opt = make_adam(generator.parameters(), history);
  auto disc_opt = make_adam(discriminator.parameters(), history);
  const double lo = kProbabilityEpsilon;
  const double hi = 1.0 - kProbabilityEpsilon;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = Clock::now();
    const auto [gen_loss, disc_loss, adv_loss] = run_epoch<3>(
        data, config, epoch,
        [&](int64_t batch, const torch::Tensor& src, const torch::Tensor& tgt) {
          const auto fake = generator.forward(src, /*training_mode=*/true);

          // Discriminator: real targets -> 1, generated slices -> 0.
          const auto p_real = discriminator.forward(tgt, true).clamp(lo, hi);
          const auto p_fake = discriminator.forward(fake.detach(), true).clamp(lo, hi);
          auto d_loss = -(torch::log(p_real).mean() + torch::log(1.0 - p_fake).mean());
          const double d_value = d_loss.item<double>();
          check_finite(d_value, "discriminator loss", epoch, batch);
          disc_opt.zero_grad();
          d_loss.backward();
          disc_opt.step();

          // Generator: content MSE plus weighted adversarial term.
          const auto p_gen = discriminator.forward(fake, true).clamp(lo, hi);
          const auto adversarial = -torch::log(p_gen).mean();
          const auto content = torch::mse_loss(fake, tgt);
          auto g_loss = content + config.adversarial_weight * adversarial;
          const double g_value = g_loss.item<double>();
          const double a_value = adversarial.item<double>();
          check_finite(g_value, "generator loss", epoch, batch);
          gen_opt.zero_grad();
          g_loss.backward();
          gen_opt.step();
          return std::array<double, 3>{g_value, d_value, a_value};
        });
    EpochRecord record;
    record.epoch = epoch;
    record.loss = gen_loss;
    record.discriminator_loss = disc_loss;
    record.adversarial_loss = adv_loss;
    record.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return history;
}

torch::Tensor convert_slices(const Model& model, const torch::Tensor& batch) {
  if (model.architecture() == Architecture::kSrganDiscriminator) {
    throw ValidationError("a discriminator cannot convert volumes");
  }
  constexpr int64_t kChunk = 16;
  torch::NoGradGuard no_grad;
  const auto dtype = model.parameters().front().scalar_type();
  std::vector<torch::Tensor> outputs;
  for (int64_t start = 0; start < batch.size(0); start += kChunk) {
    const auto chunk = batch.slice(0, start, std::min(batch.size(0), start + kChunk)).to(dtype);
    outputs.push_back(model.forward(chunk, /*training_mode=*/false).clamp(0.0, 1.0));
  }
  return torch::cat(outputs, 0).to(torch::kFloat32);
}

Volume convert_volume(const Model& model, const Volume& source, Axis view) {
  std::vector<Slice2D> slices = extract_slices(source, view);
  check_view_shape(model, slices.front().rows, slices.front().cols, view);
  const auto converted = convert_slices(model, slices_to_tensor(slices)).contiguous();
  const float* src = converted.data_ptr<float>();
  for (Slice2D& s : slices) {
    std::memcpy(s.data.data(), src, s.data.size() * sizeof(float));
    src += s.data.size();
  }
  return stack_slices(slices, view, source.spacing(), {0.0, 1.0});
}

}  // namespace uconvert
