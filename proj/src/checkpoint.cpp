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

#include "uconvert/checkpoint.hpp"

#include <string>

#include "uconvert/errors.hpp"

namespace uconvert {
namespace {

constexpr const char* kFormat = "uconvert-checkpoint";
constexpr int kVersion = 1;

void write_state(torch::serialize::OutputArchive& archive, const std::string& prefix,
                 const Model& model) {
  for (const auto& [name, tensor] : model.named_state()) {
    archive.write(prefix + name, tensor.detach().clone(), /*is_buffer=*/true);
  }
}

void read_state(torch::serialize::InputArchive& archive, const std::string& prefix, Model& model) {
  torch::NoGradGuard no_grad;
  for (auto& [name, tensor] : model.named_state()) {
    torch::Tensor stored;
    if (!archive.try_read(prefix + name, stored)) {
      throw FormatError("checkpoint/config mismatch: missing tensor " + prefix + name);
    }
    if (!stored.sizes().equals(tensor.sizes())) {
      throw FormatError("checkpoint/config mismatch: tensor " + prefix + name + " has shape " +
                        c10::str(stored.sizes()) + ", model expects " + c10::str(tensor.sizes()));
    }
    tensor.copy_(stored);
  }
}

nlohmann::json read_metadata(torch::serialize::InputArchive& archive,
                             const std::filesystem::path& path) {
  c10::IValue value;
  if (!archive.try_read("metadata", value) || !value.isString()) {
    throw FormatError("not a uconvert checkpoint: " + path.string());
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(value.toStringRef());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("malformed checkpoint metadata at byte offset " + std::to_string(e.byte) +
                      ": " + e.what());
  }
  if (meta.value("format", "") != kFormat || meta.value("version", 0) != kVersion) {
    throw FormatError("unsupported checkpoint format in " + path.string());
  }
  return meta;
}

void load_archive(torch::serialize::InputArchive& archive, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw FormatError("cannot read checkpoint " + path.string() + ": " +
                      e.what_without_backtrace());
  }
}

ModelConfig config_from_json(Architecture arch, const nlohmann::json& j) {
  switch (arch) {
    case Architecture::kUConvertNet:
      return j.get<UConvertNetConfig>();
    case Architecture::kEspcn:
      return j.get<ESPCNConfig>();
    case Architecture::kSrganGenerator:
    case Architecture::kSrganDiscriminator:
      return j.get<SRGANConfig>();
  }
  throw FormatError("unknown architecture in checkpoint");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const Model* discriminator, const TrainHistory& history) {
  if (model.architecture() == Architecture::kSrganDiscriminator) {
    throw ValidationError("the converter slot of a checkpoint cannot hold a discriminator");
  }
  nlohmann::json meta = {
      {"format", kFormat},
      {"version", kVersion},
      {"model", model_kind_name(model_kind_of(model.architecture()))},
      {"architecture", architecture_name(model.architecture())},
      {"config", model.config_json()},
      {"epoch", history.epochs.size()},
      {"run_seed", history.config.seed},
      {"view", axis_name(history.config.view)},
      {"has_discriminator", discriminator != nullptr},
      {"history", history.to_json()},
  };

  torch::serialize::OutputArchive archive;
  archive.write("metadata", c10::IValue(meta.dump()));
  write_state(archive, "model/", model);
  if (discriminator != nullptr) write_state(archive, "discriminator/", *discriminator);
  try {
    archive.save_to(path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  torch::serialize::InputArchive archive;
  load_archive(archive, path);
  const nlohmann::json meta = read_metadata(archive, path);
  try {
    const Architecture arch = parse_architecture(meta.at("architecture").get<std::string>());
    const ModelConfig config = config_from_json(arch, meta.at("config"));
    Model model = build_model(arch, config);
    read_state(archive, "model/", model);
    std::optional<Model> discriminator;
    if (meta.value("has_discriminator", false)) {
      discriminator = build_model(Architecture::kSrganDiscriminator, config);
      read_state(archive, "discriminator/", *discriminator);
    }
    return {model_kind_of(arch), std::move(model), std::move(discriminator),
            TrainHistory::from_json(meta.at("history"))};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint metadata: ") + e.what());
  }
}

TrainHistory load_checkpoint_into(const std::filesystem::path& path, Model& model,
                                  Model* discriminator) {
  torch::serialize::InputArchive archive;
  load_archive(archive, path);
  const nlohmann::json meta = read_metadata(archive, path);
  if (meta.at("architecture").get<std::string>() != architecture_name(model.architecture()) ||
      meta.at("config") != model.config_json()) {
    throw ValidationError("checkpoint/config mismatch: checkpoint holds " +
                          meta.at("architecture").get<std::string>() + " " +
                          meta.at("config").dump() + ", model is " +
                          std::string(architecture_name(model.architecture())) + " " +
                          model.config_json().dump());
  }
  read_state(archive, "model/", model);
  if (discriminator != nullptr) {
    if (!meta.value("has_discriminator", false) ||
        discriminator->config_json() != meta.at("config")) {
      throw ValidationError("checkpoint/config mismatch: no matching discriminator stored");
    }
    read_state(archive, "discriminator/", *discriminator);
  }
  return TrainHistory::from_json(meta.at("history"));
}

}  // namespace uconvert
