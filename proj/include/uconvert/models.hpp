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
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace uconvert {

/// Encoder-decoder FCN with one padded 3x3 convolution per level, max-pool
/// downsampling, transposed-convolution upsampling and skip concatenation.
struct UConvertNetConfig {
  int levels = 4;
  int base_channels = 32;
  int kernel_size = 3;  // fixed
  double dropout_rate = 0.5;
  int dropout_decoder_levels = 2;  // counted from the deepest decoder level

  void validate() const;
  bool operator==(const UConvertNetConfig&) const = default;
};

/// Equal-size SRGAN: residual generator without upscaling stages, plus the
/// classification discriminator.
struct SRGANConfig {
  int residual_blocks = 8;
  int gen_channels = 64;
  int disc_base_channels = 64;
  int disc_dense_width = 1024;
  double adversarial_weight = 1e-3;

  void validate() const;
  bool operator==(const SRGANConfig&) const = default;
};

/// ESPCN made size-preserving by a space-to-depth step before the feature
/// extractor and the sub-pixel (depth-to-space) layer at the end.
struct ESPCNConfig {
  int shuffle_factor = 2;
  std::array<int, 2> feature_channels = {64, 32};

  void validate() const;
  bool operator==(const ESPCNConfig&) const = default;
};

using ModelConfig = std::variant<UConvertNetConfig, SRGANConfig, ESPCNConfig>;

void to_json(nlohmann::json& j, const UConvertNetConfig& c);
void from_json(const nlohmann::json& j, UConvertNetConfig& c);
void to_json(nlohmann::json& j, const SRGANConfig& c);
void from_json(const nlohmann::json& j, SRGANConfig& c);
void to_json(nlohmann::json& j, const ESPCNConfig& c);
void from_json(const nlohmann::json& j, ESPCNConfig& c);

enum class Architecture { kUConvertNet, kSrganGenerator, kSrganDiscriminator, kEspcn };

std::string_view architecture_name(Architecture arch);
Architecture parse_architecture(std::string_view name);

/// Common base of the four networks.
class NetworkImpl : public torch::nn::Module {
 public:
  virtual torch::Tensor forward(torch::Tensor x) = 0;
  /// Throws ShapeError if an H x W single-channel slice is not accepted.
  virtual void check_input(int64_t height, int64_t width) const = 0;
};

class UConvertNetImpl : public NetworkImpl {
 public:
  explicit UConvertNetImpl(const UConvertNetConfig& config);
  torch::Tensor forward(torch::Tensor x) override;
  void check_input(int64_t height, int64_t width) const override;

 private:
  UConvertNetConfig config_;
  std::vector<torch::nn::Conv2d> encoders_;
  torch::nn::Conv2d bottleneck_{nullptr};
  std::vector<torch::nn::ConvTranspose2d> upsamplers_;  // index = level
  std::vector<torch::nn::Conv2d> decoders_;             // index = level
  torch::nn::Conv2d head_{nullptr};
};

class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr};
  torch::nn::PReLU act_{nullptr};
  torch::nn::Conv2d conv2_{nullptr};
  torch::nn::BatchNorm2d bn2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

class SrganGeneratorImpl : public NetworkImpl {
 public:
  explicit SrganGeneratorImpl(const SRGANConfig& config);
  torch::Tensor forward(torch::Tensor x) override;
  void check_input(int64_t height, int64_t width) const override;

 private:
  torch::nn::Conv2d head_{nullptr};
  torch::nn::PReLU head_act_{nullptr};
  std::vector<ResidualBlock> blocks_;
  torch::nn::Conv2d post_conv_{nullptr};
  torch::nn::BatchNorm2d post_bn_{nullptr};
  torch::nn::Conv2d tail_{nullptr};
};

/// Output is [N, 1]: probability that each slice is a real target.
class SrganDiscriminatorImpl : public NetworkImpl {
 public:
  explicit SrganDiscriminatorImpl(const SRGANConfig& config);
  torch::Tensor forward(torch::Tensor x) override;
  void check_input(int64_t height, int64_t width) const override;

 private:
  std::vector<torch::nn::Conv2d> convs_;
  std::vector<torch::nn::BatchNorm2d> norms_;  // norms_[i] follows convs_[i + 1]
  torch::nn::Linear dense1_{nullptr};
  torch::nn::Linear dense2_{nullptr};
};

class EspcnImpl : public NetworkImpl {
 public:
  explicit EspcnImpl(const ESPCNConfig& config);
  torch::Tensor forward(torch::Tensor x) override;
  void check_input(int64_t height, int64_t width) const override;

 private:
  int factor_;
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::Conv2d conv2_{nullptr};
  torch::nn::Conv2d conv3_{nullptr};
};

/// A built network together with its architecture id and configuration.
/// Copies share parameters; use clone() for an independent copy.
class Model {
 public:
  Model(Architecture architecture, ModelConfig config, std::shared_ptr<NetworkImpl> network);

  Architecture architecture() const { return architecture_; }
  const ModelConfig& config() const { return config_; }
  NetworkImpl& network() const { return *network_; }

  /// batch is [N, 1, H, W]. Dropout is inactive and batch-norm uses running
  /// statistics when training_mode is false.
  torch::Tensor forward(const torch::Tensor& batch, bool training_mode) const;

  void check_input(const torch::Tensor& batch) const;
  void check_slice_shape(int64_t height, int64_t width) const;

  std::vector<torch::Tensor> parameters() const;

  /// Parameters then buffers, keyed by dotted registration path
  /// (e.g. "enc0.weight", "block3.bn1.running_mean").
  std::vector<std::pair<std::string, torch::Tensor>> named_state() const;

  /// Copies every parameter and buffer from a model of identical architecture
  /// and configuration.
  void load_state_from(const Model& other);

  Model clone() const;

  nlohmann::json config_json() const;

 private:
  Architecture architecture_;
  ModelConfig config_;
  std::shared_ptr<NetworkImpl> network_;
};

Model build_uconvertnet(const UConvertNetConfig& config, uint64_t seed = 0);

struct SrganModels {
  Model generator;
  Model discriminator;
};
SrganModels build_srgan(const SRGANConfig& config, uint64_t seed = 0);

Model build_espcn(const ESPCNConfig& config, uint64_t seed = 0);

/// Builds any architecture from its id and matching configuration.
Model build_model(Architecture architecture, const ModelConfig& config, uint64_t seed = 0);

/// Scalar learnable parameters, including biases, PReLU slopes and
/// batch-norm affine terms (running statistics excluded).
int64_t count_parameters(const Model& model);

/// [N, C, H, W] -> [N, C r^2, H/r, W/r].
torch::Tensor space_to_depth(const torch::Tensor& x, int64_t factor);
/// [N, C r^2, H, W] -> [N, C, H r, W r].
torch::Tensor depth_to_space(const torch::Tensor& x, int64_t factor);

}  // namespace uconvert
