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

#include "uconvert/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "uconvert/checkpoint.hpp"
#include "uconvert/errors.hpp"
#include "uconvert/metrics.hpp"
#include "uconvert/models.hpp"
#include "uconvert/multiview.hpp"
#include "uconvert/phantom.hpp"
#include "uconvert/training.hpp"
#include "uconvert/volume.hpp"

namespace uconvert::cli {
namespace {

namespace fs = std::filesystem;

struct GenDataOptions {
  int subjects = 20;
  uint64_t seed = 0;
  std::string out;
  PhantomParams phantom;
  DegradeParams degrade;
};

struct ArchitectureOptions {
  UConvertNetConfig uconvert;
  SRGANConfig srgan;
  ESPCNConfig espcn;
};

struct TrainOptions {
  std::string model = "uconvert";
  std::string view = "sagittal";
  std::string data;
  std::string out;
  int epochs = 40;
  double lr = 0.001;
  int batch = 4;
  uint64_t seed = 0;
  double train_fraction = 0.9;
  uint64_t split_seed = 0;
  ArchitectureOptions arch;
};

struct ConvertOptions {
  std::string ckpt;
  std::string ckpt_coronal;
  std::string ckpt_axial;
  std::string in;
  std::string out;
  bool multiview = false;
  bool keep_views = false;
};

struct EvaluateOptions {
  std::string pred;
  std::string target;
  std::string axis = "sagittal";
  std::string json;
};

struct BenchmarkOptions {
  std::string model = "uconvert";
  int size = 64;
  int epochs = 1;
  uint64_t seed = 0;
  std::string json;
  ArchitectureOptions arch;
};

void add_architecture_flags(CLI::App& cmd, ArchitectureOptions& a) {
  cmd.add_option("--levels", a.uconvert.levels, "U-Convert-Net pooling levels")
      ->capture_default_str();
  cmd.add_option("--base-channels", a.uconvert.base_channels, "U-Convert-Net first-level width")
      ->capture_default_str();
  cmd.add_option("--dropout-rate", a.uconvert.dropout_rate, "U-Convert-Net decoder dropout rate")
      ->capture_default_str();
  cmd.add_option("--dropout-levels", a.uconvert.dropout_decoder_levels,
                 "Decoder levels with dropout, counted from the deepest")
      ->capture_default_str();
  cmd.add_option("--residual-blocks", a.srgan.residual_blocks, "SRGAN generator residual blocks")
      ->capture_default_str();
  cmd.add_option("--gen-channels", a.srgan.gen_channels, "SRGAN generator width")
      ->capture_default_str();
  cmd.add_option("--disc-channels", a.srgan.disc_base_channels, "SRGAN discriminator base width")
      ->capture_default_str();
  cmd.add_option("--disc-dense", a.srgan.disc_dense_width, "SRGAN discriminator dense width")
      ->capture_default_str();
  cmd.add_option("--adversarial-weight", a.srgan.adversarial_weight,
                 "Weight of the adversarial term in the SRGAN generator loss")
      ->capture_default_str();
  cmd.add_option("--shuffle-factor", a.espcn.shuffle_factor, "ESPCN space-to-depth factor r")
      ->capture_default_str();
  cmd.add_option("--espcn-features", a.espcn.feature_channels, "ESPCN feature widths, e.g. 64,32")
      ->delimiter(',')
      ->default_str(std::to_string(a.espcn.feature_channels[0]) + "," +
                    std::to_string(a.espcn.feature_channels[1]));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// The resolved configuration of a subcommand, re-usable via --config.
void write_resolved_config(const CLI::App& cmd, const fs::path& path) {
  std::string text = "[" + cmd.get_name() + "]\n";
  text += cmd.config_to_str(/*default_also=*/true, /*write_description=*/false);
  write_text(path, text);
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  return path.parent_path() / (path.filename().string() + suffix);
}

struct BuiltModels {
  Model model;
  std::optional<Model> discriminator;
};

BuiltModels build_for(ModelKind kind, const ArchitectureOptions& a, uint64_t seed) {
  switch (kind) {
    case ModelKind::kUConvert:
      return {build_uconvertnet(a.uconvert, seed), std::nullopt};
    case ModelKind::kEspcn:
      return {build_espcn(a.espcn, seed), std::nullopt};
    case ModelKind::kSrgan: {
      SrganModels m = build_srgan(a.srgan, seed);
      return {std::move(m.generator), std::move(m.discriminator)};
    }
  }
  throw ValidationError("unknown model");
}

int64_t total_parameters(const BuiltModels& m) {
  int64_t n = count_parameters(m.model);
  if (m.discriminator) n += count_parameters(*m.discriminator);
  return n;
}

TrainHistory train_built(BuiltModels& m, std::span<const SubjectPair> pairs,
                         const TrainConfig& config, const EpochCallback& on_epoch) {
  if (m.discriminator) return train_gan(m.model, *m.discriminator, pairs, config, on_epoch);
  return train_mse(m.model, pairs, config, on_epoch);
}

int cmd_gen_data(const GenDataOptions& o, const CLI::App& cmd, std::ostream& out) {
  const DatasetManifest manifest =
      generate_dataset(o.subjects, o.seed, o.phantom, o.degrade, o.out);
  write_resolved_config(cmd, fs::path(o.out) / "gen-data.config.toml");
  out << "wrote " << manifest.subjects.size() << " subject pairs to " << o.out << '\n';
  return 0;
}

int cmd_train(const TrainOptions& o, const CLI::App& cmd, std::ostream& out) {
  TrainConfig config;
  config.model = parse_model_kind(o.model);
  config.view = parse_axis(o.view);
  config.learning_rate = o.lr;
  config.batch_size = o.batch;
  config.epochs = o.epochs;
  config.seed = o.seed;
  config.adversarial_weight = o.arch.srgan.adversarial_weight;
  config.validate();

  const DatasetManifest manifest = load_manifest(o.data);
  const SubjectSplit split = split_by_subject(manifest, o.train_fraction, o.split_seed);
  const std::vector<SubjectPair> pairs = load_subjects(manifest, split.train);

  BuiltModels models = build_for(config.model, o.arch, config.seed);
  out << "training " << model_kind_name(config.model) << " on " << split.train.size()
      << " subjects, view " << axis_name(config.view) << '\n';
  const TrainHistory history =
      train_built(models, pairs, config, [&](const EpochRecord& r) {
        out << "epoch " << r.epoch + 1 << "/" << config.epochs << " loss " << std::setprecision(6)
            << r.loss << " (" << std::setprecision(3) << r.seconds << " s)" << std::endl;
      });

  const fs::path ckpt(o.out);
  save_checkpoint(ckpt, models.model, models.discriminator ? &*models.discriminator : nullptr,
                  history);
  history.write_jsonl(sibling(ckpt, ".history.jsonl"));
  write_text(sibling(ckpt, ".split.json"),
             nlohmann::json({{"train", split.train}, {"test", split.test}}).dump(2) + "\n");
  write_resolved_config(cmd, sibling(ckpt, ".config.toml"));
  out << "saved checkpoint " << ckpt.string() << '\n';
  return 0;
}

Model load_view_checkpoint(const std::string& path, std::optional<Axis> expected) {
  Checkpoint ck = load_checkpoint(path);
  if (expected && ck.history.config.view != *expected) {
    throw ValidationError("checkpoint " + path + " was trained on view " +
                          std::string(axis_name(ck.history.config.view)) + ", expected " +
                          std::string(axis_name(*expected)));
  }
  return std::move(ck.model);
}

int cmd_convert(const ConvertOptions& o, const CLI::App& cmd, std::ostream& out) {
  const Volume source = read_mvol(o.in);
  const fs::path out_path(o.out);
  if (o.multiview) {
    if (o.ckpt_coronal.empty() || o.ckpt_axial.empty()) {
      throw ValidationError("three view checkpoints required (--ckpt, --ckpt-coronal, --ckpt-axial)");
    }
    ViewEnsemble ensemble({load_view_checkpoint(o.ckpt, Axis::kSagittal),
                           load_view_checkpoint(o.ckpt_coronal, Axis::kCoronal),
                           load_view_checkpoint(o.ckpt_axial, Axis::kAxial)});
    const MultiViewResult result = multi_view_convert(ensemble, source);
    write_mvol(result.fused, out_path);
    if (o.keep_views) {
      for (Axis view : kAllAxes) {
        const fs::path p = out_path.parent_path() / (out_path.stem().string() + "_" +
                                                     std::string(axis_name(view)) + ".mvol");
        write_mvol(result.per_view[static_cast<std::size_t>(array_axis(view))], p);
      }
    }
  } else {
    if (!o.ckpt_coronal.empty() || !o.ckpt_axial.empty()) {
      throw ValidationError("--ckpt-coronal/--ckpt-axial require --multiview");
    }
    Checkpoint ck = load_checkpoint(o.ckpt);
    write_mvol(convert_volume(ck.model, source, ck.history.config.view), out_path);
  }
  write_resolved_config(cmd, sibling(out_path, ".config.toml"));
  out << "wrote " << out_path.string() << '\n';
  return 0;
}

std::string format_metric(double v, int precision) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

int cmd_evaluate(const EvaluateOptions& o, const CLI::App& cmd, std::ostream& out) {
  const Volume pred = read_mvol(o.pred);
  const Volume target = read_mvol(o.target);
  const MetricsReport report = evaluate_volume(pred, target, parse_axis(o.axis));
  out << "axis " << axis_name(report.axis) << " slices " << report.n_slices()
      << " infinite_psnr " << report.n_infinite_psnr << '\n';
  out << "PSNR " << format_metric(report.psnr_mean, 4) << '\n';
  out << "SSIM " << format_metric(report.ssim_mean, 4) << '\n';
  if (!o.json.empty()) {
    write_text(o.json, report.to_json().dump(2) + "\n");
    write_resolved_config(cmd, sibling(fs::path(o.json), ".config.toml"));
  }
  return 0;
}

int cmd_benchmark(const BenchmarkOptions& o, const CLI::App& cmd, std::ostream& out) {
  using Clock = std::chrono::steady_clock;
  const ModelKind kind = parse_model_kind(o.model);
  PhantomParams phantom;
  phantom.size = o.size;
  const SubjectPair pair = make_subject(0, o.seed, phantom, DegradeParams{});

  BuiltModels models = build_for(kind, o.arch, o.seed);
  TrainConfig config;
  config.model = kind;
  config.epochs = o.epochs;
  config.seed = o.seed;
  config.adversarial_weight = o.arch.srgan.adversarial_weight;
  const TrainHistory history = train_built(models, std::span(&pair, 1), config, {});
  double epoch_seconds = 0.0;
  for (const EpochRecord& r : history.epochs) epoch_seconds += r.seconds;
  epoch_seconds /= static_cast<double>(history.epochs.size());

  const auto t0 = Clock::now();
  const Volume converted = convert_volume(models.model, pair.source, config.view);
  const double convert_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  const int64_t slices = converted.extent(config.view);

  const nlohmann::json row = {
      {"model", model_kind_name(kind)},
      {"size", o.size},
      {"params", total_parameters(models)},
      {"sec_per_epoch", epoch_seconds},
      {"sec_per_slice", convert_seconds / static_cast<double>(slices)},
      {"epochs", o.epochs},
      {"slices_per_epoch", slices},
      {"batch_size", config.batch_size},
  };
  out << row.dump() << '\n';
  if (!o.json.empty()) {
    write_text(o.json, row.dump() + "\n");
    write_resolved_config(cmd, sibling(fs::path(o.json), ".config.toml"));
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-field to high-field MR modality conversion toolkit", "uconvert"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a paired phantom dataset");
  gen_cmd->add_option("--subjects", gen.subjects, "Number of subjects")->capture_default_str();
  gen_cmd->add_option("--size", gen.phantom.size, "Phantom edge length (multiple of 16)")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--wm-intensity", gen.phantom.wm_intensity, "White-matter intensity")->capture_default_str();
  gen_cmd->add_option("--gm-intensity", gen.phantom.gm_intensity, "Gray-matter intensity")->capture_default_str();
  gen_cmd->add_option("--csf-intensity", gen.phantom.csf_intensity, "CSF intensity")->capture_default_str();
  gen_cmd->add_option("--bias-amplitude", gen.phantom.bias_amplitude,
                       "Multiplicative bias field amplitude, in [0, 0.2]")->capture_default_str();
  gen_cmd->add_option("--deform-amplitude", gen.phantom.deform_amplitude,
                       "Maximum deformation in voxels")->capture_default_str();
  gen_cmd->add_option("--blur-sigma", gen.degrade.blur_sigma, "Source blur sigma in voxels")->capture_default_str();
  gen_cmd->add_option("--contrast-alpha", gen.degrade.contrast_alpha,
                       "Source contrast factor, in (0, 1]")->capture_default_str();
  gen_cmd->add_option("--noise-sigma", gen.degrade.noise_sigma, "Source Gaussian noise sigma")->capture_default_str();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a converter on a dataset's train split");
  train_cmd->add_option("--model", train.model, "uconvert, srgan or espcn")->capture_default_str();
  train_cmd->add_option("--view", train.view, "sagittal, coronal or axial")->capture_default_str();
  train_cmd->add_option("--data", train.data, "Dataset directory (with manifest.json)")
      ->required();
  train_cmd->add_option("--epochs", train.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--lr", train.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--batch", train.batch, "Batch size")->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Run seed (init, shuffling, dropout)")
      ->capture_default_str();
  train_cmd->add_option("--train-fraction", train.train_fraction,
                         "Fraction of subjects used for training")->capture_default_str();
  train_cmd->add_option("--split-seed", train.split_seed, "Seed of the subject split")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  add_architecture_flags(*train_cmd, train.arch);

  ConvertOptions conv;
  auto* convert_cmd = app.add_subcommand("convert", "Convert a volume with trained checkpoints");
  convert_cmd->add_option("--ckpt", conv.ckpt, "Checkpoint (sagittal slot in multi-view mode)")
      ->required();
  convert_cmd->add_option("--ckpt-coronal", conv.ckpt_coronal, "Coronal checkpoint (multi-view)");
  convert_cmd->add_option("--ckpt-axial", conv.ckpt_axial, "Axial checkpoint (multi-view)");
  convert_cmd->add_option("--in", conv.in, "Source MVOL volume")->required();
  convert_cmd->add_option("--out", conv.out, "Output MVOL volume")->required();
  convert_cmd->add_flag("--multiview", conv.multiview, "Fuse three per-view conversions");
  convert_cmd->add_flag("--keep-views", conv.keep_views, "Also write the per-view volumes");

  EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "PSNR/SSIM of a prediction against a target");
  eval_cmd->add_option("--pred", eval.pred, "Predicted MVOL volume")->required();
  eval_cmd->add_option("--target", eval.target, "Ground-truth MVOL volume")->required();
  eval_cmd->add_option("--axis", eval.axis, "Slicing axis of the evaluation")->capture_default_str();
  eval_cmd->add_option("--json", eval.json, "Write the full report here");

  BenchmarkOptions bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Parameter count and timing of a model");
  bench_cmd->add_option("--model", bench.model, "uconvert, srgan or espcn")->capture_default_str();
  bench_cmd->add_option("--size", bench.size, "Phantom edge length")->capture_default_str();
  bench_cmd->add_option("--epochs", bench.epochs, "Timed training epochs")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Data and init seed")->capture_default_str();
  bench_cmd->add_option("--json", bench.json, "Write the JSON row here");
  add_architecture_flags(*bench_cmd, bench.arch);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, *gen_cmd, out);
    if (*train_cmd) return cmd_train(train, *train_cmd, out);
    if (*convert_cmd) return cmd_convert(conv, *convert_cmd, out);
    if (*eval_cmd) return cmd_evaluate(eval, *eval_cmd, out);
    if (*bench_cmd) return cmd_benchmark(bench, *bench_cmd, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace uconvert::cli
