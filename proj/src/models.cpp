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

#include "uconvert/models.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "uconvert/errors.hpp"

namespace uconvert {
namespace {

namespace nn = torch::nn;

nn::Conv2d padded_conv(int in, int out, int kernel, int stride = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

void check_divisible(int64_t height, int64_t width, int64_t divisor, const char* what) {
  if (height < 1 || width < 1) throw ShapeError("input has an empty spatial dimension");
  if (height % divisor != 0) {
    throw ShapeError("input height " + std::to_string(height) + " not divisible by " +
                     std::to_string(divisor) + " (" + what + ")");
  }
  if (width % divisor != 0) {
    throw ShapeError("input width " + std::to_string(width) + " not divisible by " +
                     std::to_string(divisor) + " (" + what + ")");
  }
}

// Kaiming-normal fan-in initialisation driven by an explicit generator, so
// model construction never touches the global torch RNG.
void initialise(nn::Module& root, uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  for (const auto& m : root.modules(/*include_self=*/false)) {
    if (auto* conv = m->as<nn::Conv2d>()) {
      const auto& w = conv->weight;
      const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
      conv->weight.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* up = m->as<nn::ConvTranspose2d>()) {
      // weight is [in, out, k, k]; with stride == kernel each output pixel
      // sees every input channel exactly once.
      const auto& w = up->weight;
      const auto& opt = up->options;
      const double overlap = static_cast<double>(w.size(2) * w.size(3)) /
                             static_cast<double>(opt.stride()->at(0) * opt.stride()->at(1));
      const double fan_in = static_cast<double>(w.size(0)) * std::max(1.0, overlap);
      up->weight.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
      if (up->bias.defined()) up->bias.zero_();
    } else if (auto* dense = m->as<nn::Linear>()) {
      const double fan_in = static_cast<double>(dense->weight.size(1));
      dense->weight.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
      dense->bias.zero_();
    } else if (auto* bn = m->as<nn::BatchNorm2d>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
    } else if (auto* prelu = m->as<nn::PReLU>()) {
      prelu->weight.fill_(0.25);
    }
  }
}

}  // namespace

// --- configuration ----------------------------------------------------------

void UConvertNetConfig::validate() const {
  require(levels >= 1, "levels must be >= 1");
  require(base_channels >= 1, "base_channels must be >= 1");
  require(kernel_size == 3, "U-Convert-Net kernel size is fixed at 3");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must lie in [0, 1)");
  require(dropout_decoder_levels >= 0, "dropout_decoder_levels must be >= 0");
}

void SRGANConfig::validate() const {
  require(residual_blocks >= 1, "residual_blocks must be >= 1");
  require(gen_channels >= 1, "gen_channels must be >= 1");
  require(disc_base_channels >= 1, "disc_base_channels must be >= 1");
  require(disc_dense_width >= 1, "disc_dense_width must be >= 1");
  require(adversarial_weight >= 0.0 && std::isfinite(adversarial_weight),
          "adversarial_weight must be finite and >= 0");
}

void ESPCNConfig::validate() const {
  require(shuffle_factor >= 1, "shuffle_factor must be >= 1");
  require(feature_channels[0] >= 1 && feature_channels[1] >= 1,
          "feature_channels must be positive");
}

void to_json(nlohmann::json& j, const UConvertNetConfig& c) {
  j = {{"levels", c.levels},
       {"base_channels", c.base_channels},
       {"kernel_size", c.kernel_size},
       {"dropout_rate", c.dropout_rate},
       {"dropout_decoder_levels", c.dropout_decoder_levels}};
}

void from_json(const nlohmann::json& j, UConvertNetConfig& c) {
  j.at("levels").get_to(c.levels);
  j.at("base_channels").get_to(c.base_channels);
  j.at("kernel_size").get_to(c.kernel_size);
  j.at("dropout_rate").get_to(c.dropout_rate);
  j.at("dropout_decoder_levels").get_to(c.dropout_decoder_levels);
}

void to_json(nlohmann::json& j, const SRGANConfig& c) {
  j = {{"residual_blocks", c.residual_blocks},
       {"gen_channels", c.gen_channels},
       {"disc_base_channels", c.disc_base_channels},
       {"disc_dense_width", c.disc_dense_width},
       {"adversarial_weight", c.adversarial_weight}};
}

void from_json(const nlohmann::json& j, SRGANConfig& c) {
  j.at("residual_blocks").get_to(c.residual_blocks);
  j.at("gen_channels").get_to(c.gen_channels);
  j.at("disc_base_channels").get_to(c.disc_base_channels);
  j.at("disc_dense_width").get_to(c.disc_dense_width);
  j.at("adversarial_weight").get_to(c.adversarial_weight);
}

void to_json(nlohmann::json& j, const ESPCNConfig& c) {
  j = {{"shuffle_factor", c.shuffle_factor}, {"feature_channels", c.feature_channels}};
}

void from_json(const nlohmann::json& j, ESPCNConfig& c) {
  j.at("shuffle_factor").get_to(c.shuffle_factor);
  j.at("feature_channels").get_to(c.feature_channels);
}

std::string_view architecture_name(Architecture arch) {
  switch (arch) {
    case Architecture::kUConvertNet:
      return "uconvert";
    case Architecture::kSrganGenerator:
      return "srgan_generator";
    case Architecture::kSrganDiscriminator:
      return "srgan_discriminator";
    case Architecture::kEspcn:
      return "espcn";
  }
  return "unknown";
}

Architecture parse_architecture(std::string_view name) {
  for (Architecture a : {Architecture::kUConvertNet, Architecture::kSrganGenerator,
                         Architecture::kSrganDiscriminator, Architecture::kEspcn}) {
    if (architecture_name(a) == name) return a;
  }
  throw ValidationError("unknown architecture '" + std::string(name) + "'");
}

// --- U-Convert-Net ------------------------------------------------------------

UConvertNetImpl::UConvertNetImpl(const UConvertNetConfig& config) : config_(config) {
  config_.validate();
  const int levels = config_.levels;
  const int base = config_.base_channels;
  int in = 1;
  for (int i = 0; i < levels; ++i) {
    const int out = base << i;
    encoders_.push_back(register_module("enc" + std::to_string(i), padded_conv(in, out, 3)));
    in = out;
  }
  bottleneck_ = register_module("bottleneck", padded_conv(in, base << levels, 3));

  upsamplers_.resize(static_cast<std::size_t>(levels), nullptr);
  decoders_.resize(static_cast<std::size_t>(levels), nullptr);
  for (int i = levels - 1; i >= 0; --i) {
    const int out = base << i;
    upsamplers_[static_cast<std::size_t>(i)] = register_module(
        "up" + std::to_string(i),
        nn::ConvTranspose2d(nn::ConvTranspose2dOptions(2 * out, out, 2).stride(2)));
    decoders_[static_cast<std::size_t>(i)] =
        register_module("dec" + std::to_string(i), padded_conv(2 * out, out, 3));
  }
  head_ = register_module("head", padded_conv(base, 1, 3));
}

void UConvertNetImpl::check_input(int64_t height, int64_t width) const {
  check_divisible(height, width, int64_t{1} << config_.levels, "2^levels");
}

torch::Tensor UConvertNetImpl::forward(torch::Tensor x) {
  const int levels = config_.levels;
  std::vector<torch::Tensor> skips;
  skips.reserve(static_cast<std::size_t>(levels));
  for (int i = 0; i < levels; ++i) {
    x = torch::relu(encoders_[static_cast<std::size_t>(i)]->forward(x));
    skips.push_back(x);
    x = torch::max_pool2d(x, 2);
  }
  x = torch::relu(bottleneck_->forward(x));
  for (int i = levels - 1; i >= 0; --i) {
    const auto level = static_cast<std::size_t>(i);
    x = upsamplers_[level]->forward(x);
    const bool dropout_level = levels - 1 - i < config_.dropout_decoder_levels;
    if (dropout_level && config_.dropout_rate > 0.0) {
      x = torch::dropout(x, config_.dropout_rate, is_training());
    }
    x = torch::cat({x, skips[level]}, 1);
    x = torch::relu(decoders_[level]->forward(x));
  }
  return head_->forward(x);
}

// --- SRGAN ------------------------------------------------------------------

ResidualBlockImpl::ResidualBlockImpl(int channels)
    : conv1_(register_module("conv1", padded_conv(channels, channels, 3))),
      bn1_(register_module("bn1", nn::BatchNorm2d(channels))),
      act_(register_module("act", nn::PReLU(nn::PReLUOptions().num_parameters(channels)))),
      conv2_(register_module("conv2", padded_conv(channels, channels, 3))),
      bn2_(register_module("bn2", nn::BatchNorm2d(channels))) {}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto y = act_->forward(bn1_->forward(conv1_->forward(x)));
  y = bn2_->forward(conv2_->forward(y));
  return x + y;
}

SrganGeneratorImpl::SrganGeneratorImpl(const SRGANConfig& config) {
  config.validate();
  const int c = config.gen_channels;
  head_ = register_module("head", padded_conv(1, c, 9));
  head_act_ = register_module("head_act", nn::PReLU(nn::PReLUOptions().num_parameters(c)));
  for (int i = 0; i < config.residual_blocks; ++i) {
    blocks_.push_back(register_module("block" + std::to_string(i), ResidualBlock(c)));
  }
  post_conv_ = register_module("post_conv", padded_conv(c, c, 3));
  post_bn_ = register_module("post_bn", nn::BatchNorm2d(c));
  tail_ = register_module("tail", padded_conv(c, 1, 9));
}

void SrganGeneratorImpl::check_input(int64_t height, int64_t width) const {
  check_divisible(height, width, 1, "generator");
}

torch::Tensor SrganGeneratorImpl::forward(torch::Tensor x) {
  const auto features = head_act_->forward(head_->forward(x));
  auto y = features;
  for (auto& block : blocks_) y = block->forward(y);
  y = post_bn_->forward(post_conv_->forward(y)) + features;
  return tail_->forward(y);
}

SrganDiscriminatorImpl::SrganDiscriminatorImpl(const SRGANConfig& config) {
  config.validate();
  const int base = config.disc_base_channels;
  const std::array<int, 8> widths = {base,     base,     2 * base, 2 * base,
                                     4 * base, 4 * base, 8 * base, 8 * base};
  int in = 1;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const int stride = i % 2 == 0 ? 1 : 2;
    convs_.push_back(
        register_module("conv" + std::to_string(i), padded_conv(in, widths[i], 3, stride)));
    if (i > 0) {
      norms_.push_back(register_module("bn" + std::to_string(i), nn::BatchNorm2d(widths[i])));
    }
    in = widths[i];
  }
  dense1_ = register_module("dense1", nn::Linear(in, config.disc_dense_width));
  dense2_ = register_module("dense2", nn::Linear(config.disc_dense_width, 1));
}

void SrganDiscriminatorImpl::check_input(int64_t height, int64_t width) const {
  check_divisible(height, width, 1, "discriminator");
}

torch::Tensor SrganDiscriminatorImpl::forward(torch::Tensor x) {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    x = convs_[i]->forward(x);
    if (i > 0) x = norms_[i - 1]->forward(x);
    x = torch::leaky_relu(x, 0.2);
  }
  // Global average pooling keeps the dense head independent of slice size.
  x = torch::adaptive_avg_pool2d(x, {1, 1}).flatten(1);
  x = torch::leaky_relu(dense1_->forward(x), 0.2);
  return torch::sigmoid(dense2_->forward(x));
}

// --- ESPCN ------------------------------------------------------------------

EspcnImpl::EspcnImpl(const ESPCNConfig& config) : factor_(config.shuffle_factor) {
  config.validate();
  const int r2 = factor_ * factor_;
  conv1_ = register_module("conv1", padded_conv(r2, config.feature_channels[0], 5));
  conv2_ = register_module(
      "conv2", padded_conv(config.feature_channels[0], config.feature_channels[1], 3));
  conv3_ = register_module("conv3", padded_conv(config.feature_channels[1], r2, 3));
}

void EspcnImpl::check_input(int64_t height, int64_t width) const {
  check_divisible(height, width, factor_, "shuffle factor");
}

torch::Tensor EspcnImpl::forward(torch::Tensor x) {
  x = space_to_depth(x, factor_);
  x = torch::relu(conv1_->forward(x));
  x = torch::relu(conv2_->forward(x));
  x = conv3_->forward(x);
  return depth_to_space(x, factor_);
}

torch::Tensor space_to_depth(const torch::Tensor& x, int64_t factor) {
  if (factor < 1) throw ValidationError("rearrangement factor must be >= 1");
  if (x.dim() != 4 || x.size(2) % factor != 0 || x.size(3) % factor != 0) {
    throw ShapeError("space_to_depth expects [N, C, H, W] with H and W divisible by " +
                     std::to_string(factor) + ", got " + c10::str(x.sizes()));
  }
  if (factor == 1) return x;
  return torch::pixel_unshuffle(x, factor);
}

torch::Tensor depth_to_space(const torch::Tensor& x, int64_t factor) {
  if (factor < 1) throw ValidationError("rearrangement factor must be >= 1");
  if (x.dim() != 4 || x.size(1) % (factor * factor) != 0) {
    throw ShapeError("depth_to_space expects [N, C, H, W] with C divisible by " +
                     std::to_string(factor * factor) + ", got " + c10::str(x.sizes()));
  }
  if (factor == 1) return x;
  return torch::pixel_shuffle(x, factor);
}

// --- Model ------------------------------------------------------------------

Model::Model(Architecture architecture, ModelConfig config, std::shared_ptr<NetworkImpl> network)
    : architecture_(architecture), config_(std::move(config)), network_(std::move(network)) {}

void Model::check_slice_shape(int64_t height, int64_t width) const {
  network_->check_input(height, width);
}

void Model::check_input(const torch::Tensor& batch) const {
  if (batch.dim() != 4 || batch.size(1) != 1) {
    throw ShapeError("expected a [N, 1, H, W] batch, got " + c10::str(batch.sizes()));
  }
  if (batch.size(0) < 1) throw ShapeError("empty batch");
  check_slice_shape(batch.size(2), batch.size(3));
}

torch::Tensor Model::forward(const torch::Tensor& batch, bool training_mode) const {
  check_input(batch);
  network_->train(training_mode);
  return network_->forward(batch);
}

std::vector<torch::Tensor> Model::parameters() const { return network_->parameters(); }

std::vector<std::pair<std::string, torch::Tensor>> Model::named_state() const {
  std::vector<std::pair<std::string, torch::Tensor>> state;
  for (const auto& item : network_->named_parameters()) state.emplace_back(item.key(), item.value());
  for (const auto& item : network_->named_buffers()) state.emplace_back(item.key(), item.value());
  return state;
}

void Model::load_state_from(const Model& other) {
  if (architecture_ != other.architecture_ || config_json() != other.config_json()) {
    throw ValidationError("checkpoint/config mismatch: cannot copy " +
                          std::string(architecture_name(other.architecture_)) + " state into " +
                          std::string(architecture_name(architecture_)));
  }
  torch::NoGradGuard no_grad;
  const auto src = other.named_state();
  const auto dst = named_state();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i].second.copy_(src[i].second);
}

Model Model::clone() const {
  Model copy = build_model(architecture_, config_);
  copy.load_state_from(*this);
  return copy;
}

nlohmann::json Model::config_json() const {
  return std::visit([](const auto& c) { return nlohmann::json(c); }, config_);
}

Model build_uconvertnet(const UConvertNetConfig& config, uint64_t seed) {
  auto net = std::make_shared<UConvertNetImpl>(config);
  initialise(*net, seed);
  return Model(Architecture::kUConvertNet, config, net);
}

SrganModels build_srgan(const SRGANConfig& config, uint64_t seed) {
  auto gen = std::make_shared<SrganGeneratorImpl>(config);
  auto disc = std::make_shared<SrganDiscriminatorImpl>(config);
  initialise(*gen, seed);
  initialise(*disc, seed ^ 0x5DEECE66Dull);
  return {Model(Architecture::kSrganGenerator, config, gen),
          Model(Architecture::kSrganDiscriminator, config, disc)};
}

Model build_espcn(const ESPCNConfig& config, uint64_t seed) {
  auto net = std::make_shared<EspcnImpl>(config);
  initialise(*net, seed);
  return Model(Architecture::kEspcn, config, net);
}

Model build_model(Architecture architecture, const ModelConfig& config, uint64_t seed) {
  const bool matches =
      (architecture == Architecture::kUConvertNet &&
       std::holds_alternative<UConvertNetConfig>(config)) ||
      (architecture == Architecture::kEspcn && std::holds_alternative<ESPCNConfig>(config)) ||
      ((architecture == Architecture::kSrganGenerator ||
        architecture == Architecture::kSrganDiscriminator) &&
       std::holds_alternative<SRGANConfig>(config));
  if (!matches) {
    throw ValidationError("checkpoint/config mismatch: configuration does not describe " +
                          std::string(architecture_name(architecture)));
  }
  switch (architecture) {
    case Architecture::kUConvertNet:
      return build_uconvertnet(std::get<UConvertNetConfig>(config), seed);
    case Architecture::kSrganGenerator:
      return build_srgan(std::get<SRGANConfig>(config), seed).generator;
    case Architecture::kSrganDiscriminator:
      return build_srgan(std::get<SRGANConfig>(config), seed).discriminator;
    case Architecture::kEspcn:
      return build_espcn(std::get<ESPCNConfig>(config), seed);
  }
  throw ValidationError("unknown architecture");
}

int64_t count_parameters(const Model& model) {
  int64_t total = 0;
  for (const auto& p : model.parameters()) total += p.numel();
  return total;
}

}  // namespace uconvert
