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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Progress goes to stderr; the verdict lines go to stdout.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "support/oracles.hpp"
#include "uconvert/checkpoint.hpp"
#include "uconvert/metrics.hpp"
#include "uconvert/models.hpp"
#include "uconvert/multiview.hpp"
#include "uconvert/phantom.hpp"
#include "uconvert/training.hpp"
#include "uconvert/volume.hpp"

namespace uconvert::acceptance {
namespace {

using testing::oracle_mse;
using testing::oracle_psnr;
using testing::oracle_ssim;
using testing::random_values;
using testing::random_volume;
using testing::TempDir;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), pattern, a);
  return buf;
}

std::string fmt(const char* pattern, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

std::string fmt(const char* pattern, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

void progress(const std::string& msg) { std::cerr << "[acceptance] " << msg << std::endl; }

// --- 1. metric oracles ------------------------------------------------------

Verdict metric_oracles() {
  double worst_psnr = 0.0;
  double worst_ssim = 0.0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = random_values(32 * 32, 5000 + 2 * seed);
    const auto b = random_values(32 * 32, 5001 + 2 * seed);
    worst_psnr = std::max(worst_psnr, std::abs(psnr(a, b) - oracle_psnr(a, b)));
    worst_ssim = std::max(worst_ssim, std::abs(ssim_2d({a, 32, 32}, {b, 32, 32}) -
                                               oracle_ssim(a, b, 32, 32)));
  }
  const std::vector<float> x(32 * 32, 0.5f), y75(32 * 32, 0.75f), y70(32 * 32, 0.7f);
  const double p = psnr(x, y75);
  const double s = ssim_2d({x, 32, 32}, {y70, 32, 32});
  const double s_closed = (2 * 0.5 * 0.7 + 1e-4) / (0.25 + 0.49 + 1e-4);
  const bool pass = worst_psnr <= 1e-6 && worst_ssim <= 1e-6 && std::abs(p - 12.0412) <= 1e-4 &&
                    std::abs(s - 0.9459) <= 1e-4 && std::abs(s - s_closed) <= 1e-4;
  return {pass, "50 pairs max |dPSNR| " + fmt("%.2e", worst_psnr) + ", max |dSSIM| " +
                    fmt("%.2e", worst_ssim) + "; constant PSNR " + fmt("%.4f dB", p) +
                    ", constant SSIM " + fmt("%.6f", s)};
}

// --- 2. round trips ---------------------------------------------------------

Verdict round_trips() {
  int slice_ok = 0, slice_total = 0;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    const Volume v = random_volume({8 + static_cast<int64_t>(seed), 9, 7}, 70 + seed);
    for (Axis a : kAllAxes) {
      ++slice_total;
      const auto slices = extract_slices(v, a);
      slice_ok += stack_slices(slices, a, v.spacing(), v.intensity_range()) == v;
    }
  }
  TempDir dir("acceptance_rt");
  int file_ok = 0, file_total = 0;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    const Volume v = random_volume({64, 64, 64}, 90 + seed);
    const auto path = dir / ("v" + std::to_string(seed) + ".mvol");
    write_mvol(v, path);
    ++file_total;
    file_ok += read_mvol(path) == v;
  }
  auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
  const auto x = torch::rand({4, 1, 32, 32}, gen, torch::kFloat32);
  const SrganModels gan = build_srgan({}, 2);
  struct Case {
    std::string name;
    Model model;
    const Model* disc;
  };
  std::vector<Case> cases = {{"uconvert", build_uconvertnet({}, 1), nullptr},
                             {"srgan", gan.generator, &gan.discriminator},
                             {"espcn", build_espcn({}, 3), nullptr}};
  int ckpt_ok = 0;
  for (const Case& c : cases) {
    // A forward pass in training mode moves batch-norm running statistics
    // away from their initial values so the buffers are exercised too.
    {
      torch::NoGradGuard guard;
      c.model.forward(x, true);
      if (c.disc) c.disc->forward(x, true);
    }
    const auto path = dir / (c.name + ".ckpt");
    save_checkpoint(path, c.model, c.disc, TrainHistory{});
    const Checkpoint loaded = load_checkpoint(path);
    bool same = torch::equal(loaded.model.forward(x, false), c.model.forward(x, false));
    if (c.disc) {
      same = same && loaded.discriminator &&
             torch::equal(loaded.discriminator->forward(x, false), c.disc->forward(x, false));
    }
    ckpt_ok += same;
  }
  const bool pass = slice_ok == slice_total && file_ok == file_total && ckpt_ok == 3;
  return {pass, "slice/stack " + std::to_string(slice_ok) + "/" + std::to_string(slice_total) +
                    " bit-exact, MVOL " + std::to_string(file_ok) + "/" +
                    std::to_string(file_total) + " bit-exact, checkpoints " +
                    std::to_string(ckpt_ok) + "/3 bit-identical eval outputs"};
}

// --- 3. gradient checks -----------------------------------------------------

Verdict gradient_checks() {
  struct Case {
    std::string name;
    Model model;
  };
  const std::vector<Case> cases = {
      {"uconvert(levels=1,base=2)", build_uconvertnet({1, 2, 3, 0.0, 1}, 1)},
      {"srgan-generator(1 block,4ch)", build_srgan({1, 4, 2, 8, 1e-3}, 2).generator},
      {"srgan-discriminator(base=2,dense=8)", build_srgan({1, 4, 2, 8, 1e-3}, 3).discriminator},
      {"espcn(r=1)", build_espcn({1, {4, 3}}, 4)},
      {"espcn(r=2)", build_espcn({2, {4, 3}}, 5)}};
  bool pass = true;
  std::ostringstream detail;
  uint64_t seed = 20;
  for (const Case& c : cases) {
    const auto r = testing::check_model_gradients(c.model, seed++);
    pass = pass && r.checked > 0 && r.max_relative_error <= 1e-3;
    detail << c.name << " " << fmt("%.1e", r.max_relative_error) << " over " << r.checked
           << "; ";
  }
  std::string d = detail.str();
  d.resize(d.size() - 2);
  return {pass, "max rel err " + d};
}

// --- 4 (synthetic half). Jensen on random triples ----------------------------

struct JensenTally {
  int checked = 0;
  int held = 0;
  double worst_gap = -std::numeric_limits<double>::infinity();  // fused - mean, want <= 1e-9
};

void jensen_check(std::span<const Volume> preds, const Volume& target, JensenTally& t) {
  const Volume fused = fuse(preds);
  double mean = 0.0;
  for (const Volume& p : preds) mean += oracle_mse(p.data(), target.data());
  mean /= static_cast<double>(preds.size());
  const double gap = oracle_mse(fused.data(), target.data()) - mean;
  ++t.checked;
  t.held += gap <= 1e-9;
  t.worst_gap = std::max(t.worst_gap, gap);
}

JensenTally jensen_random() {
  JensenTally t;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const Volume target = random_volume({12, 12, 12}, 9000 + 4 * seed);
    const std::vector<Volume> preds = {random_volume({12, 12, 12}, 9001 + 4 * seed),
                                       random_volume({12, 12, 12}, 9002 + 4 * seed),
                                       random_volume({12, 12, 12}, 9003 + 4 * seed)};
    jensen_check(preds, target, t);
  }
  return t;
}

// --- 5, 6. end-to-end learning and multi-view --------------------------------

struct Scores {
  double psnr = 0.0;  // mean over finite per-slice values, pooled over subjects
  double ssim = 0.0;
  int64_t slices = 0;
  int64_t infinite = 0;
};

Scores score(const std::vector<Volume>& preds, const std::vector<SubjectPair>& test) {
  double psum = 0.0, ssum = 0.0;
  int64_t finite = 0;
  Scores s;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const MetricsReport r = evaluate_volume(preds[i], test[i].target, Axis::kSagittal);
    for (double p : r.psnr_per_slice) {
      if (std::isfinite(p)) {
        psum += p;
        ++finite;
      }
    }
    for (double v : r.ssim_per_slice) ssum += v;
    s.slices += r.n_slices();
    s.infinite += r.n_infinite_psnr;
  }
  s.psnr = finite > 0 ? psum / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
  s.ssim = ssum / static_cast<double>(s.slices);
  return s;
}

struct EndToEnd {
  Scores baseline;
  std::array<std::optional<Scores>, 3> per_view;
  std::optional<Scores> fused;
  JensenTally jensen;
  int held_out = 0;
  int trained = 0;
};

EndToEnd end_to_end(bool multiview) {
  EndToEnd e;
  TempDir dir("acceptance_e2e");
  progress("generating 20 phantom subjects at 64^3");
  const DatasetManifest manifest =
      generate_dataset(20, 2026, PhantomParams{}, DegradeParams{}, dir.path());
  const SubjectSplit split = split_by_subject(manifest, 0.9, 2026);
  const auto train = load_subjects(manifest, split.train);
  const auto test = load_subjects(manifest, split.test);
  e.held_out = static_cast<int>(test.size());
  e.trained = static_cast<int>(train.size());

  std::vector<Volume> sources;
  for (const auto& p : test) sources.push_back(p.source);
  e.baseline = score(sources, test);
  progress(fmt("identity baseline PSNR %.4f dB, SSIM %.4f", e.baseline.psnr, e.baseline.ssim));

  std::array<std::vector<Volume>, 3> outputs;
  for (Axis view : kAllAxes) {
    if (!multiview && view != Axis::kSagittal) continue;
    const int v = array_axis(view);
    TrainConfig config;  // lr 0.001, batch 4, 40 epochs
    config.model = ModelKind::kUConvert;
    config.view = view;
    config.seed = 100 + static_cast<uint64_t>(v);
    Model model = build_uconvertnet({}, config.seed);
    progress("training " + std::string(axis_name(view)) + " U-Convert-Net on " +
             std::to_string(train.size()) + " subjects");
    train_mse(model, train, config, [&](const EpochRecord& r) {
      progress(std::string(axis_name(view)) + " epoch " + std::to_string(r.epoch + 1) + "/" +
               std::to_string(config.epochs) + fmt(" loss %.6f (%.1f s)", r.loss, r.seconds));
    });
    for (const auto& p : test) outputs[v].push_back(convert_volume(model, p.source, view));
    e.per_view[v] = score(outputs[v], test);
    progress(std::string(axis_name(view)) +
             fmt(" held-out PSNR %.4f dB, SSIM %.4f", e.per_view[v]->psnr, e.per_view[v]->ssim));
  }
  if (multiview) {
    std::vector<Volume> fused;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const std::vector<Volume> views = {outputs[0][i], outputs[1][i], outputs[2][i]};
      fused.push_back(fuse(views));
      jensen_check(views, test[i].target, e.jensen);
    }
    e.fused = score(fused, test);
    progress(fmt("fused held-out PSNR %.4f dB, SSIM %.4f", e.fused->psnr, e.fused->ssim));
  }
  return e;
}

Verdict learning_verdict(const EndToEnd& e) {
  const Scores& s = *e.per_view[0];
  const bool pass = s.psnr >= e.baseline.psnr + 2.0 && s.ssim > e.baseline.ssim;
  return {pass, std::to_string(e.trained) + " train / " + std::to_string(e.held_out) +
                    " held-out subjects; sagittal PSNR " +
                    fmt("%.4f dB vs baseline %.4f dB (gain %.4f, need >= 2)", s.psnr,
                        e.baseline.psnr, s.psnr - e.baseline.psnr) +
                    "; SSIM " + fmt("%.4f vs baseline %.4f", s.ssim, e.baseline.ssim)};
}

Verdict multiview_verdict(const EndToEnd& e) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : e.per_view) best = std::max(best, s->psnr);
  const bool jensen = e.jensen.checked > 0 && e.jensen.held == e.jensen.checked;
  const bool pass = e.fused->psnr >= best - 0.1 && jensen;
  return {pass, fmt("fused PSNR %.4f dB vs best single view %.4f dB (need >= best - 0.1)",
                    e.fused->psnr, best) +
                    fmt("; per-view %.4f / %.4f / %.4f dB", e.per_view[0]->psnr,
                        e.per_view[1]->psnr, e.per_view[2]->psnr) +
                    "; fused MSE <= mean per-view MSE on " + std::to_string(e.jensen.held) + "/" +
                    std::to_string(e.jensen.checked) + " held-out volumes"};
}

Verdict jensen_verdict(const JensenTally& random, const std::optional<JensenTally>& trained) {
  bool pass = random.held == random.checked && random.checked == 100;
  std::string detail = std::to_string(random.held) + "/" + std::to_string(random.checked) +
                       " random triples (worst fused-minus-mean " +
                       fmt("%.3e", random.worst_gap) + ")";
  if (trained) {
    pass = pass && trained->checked > 0 && trained->held == trained->checked;
    detail += "; " + std::to_string(trained->held) + "/" + std::to_string(trained->checked) +
              " trained per-view triples (worst " + fmt("%.3e", trained->worst_gap) + ")";
  } else {
    pass = false;
    detail += "; trained per-view outputs not available (criterion 6 skipped)";
  }
  return {pass, detail};
}

// --- 7. model sizes ---------------------------------------------------------

Verdict model_sizes() {
  const int64_t espcn = count_parameters(build_espcn({}));
  const int64_t unet = count_parameters(build_uconvertnet({}));
  const SrganModels s = build_srgan({});
  const int64_t gen = count_parameters(s.generator);
  const int64_t disc = count_parameters(s.discriminator);
  const bool closed = espcn == testing::espcn_params(2, 64, 32) &&
                      unet == testing::uconvert_params(4, 32) &&
                      gen == testing::srgan_generator_params(8, 64) &&
                      disc == testing::srgan_discriminator_params(64, 1024);
  const bool pass = closed && espcn < unet && unet < gen + disc;
  return {pass, "ESPCN " + std::to_string(espcn) + " < U-Convert-Net " + std::to_string(unet) +
                    " < SRGAN generator+discriminator " + std::to_string(gen + disc) + " (" +
                    std::to_string(gen) + " + " + std::to_string(disc) + "); closed-form " +
                    (closed ? "match" : "MISMATCH")};
}

// --- 8. GAN reduction and smoke ----------------------------------------------

double max_param_diff(const Model& a, const Model& b) {
  const auto pa = a.named_state();
  const auto pb = b.named_state();
  double worst = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    worst = std::max(worst, (pa[i].second - pb[i].second).abs().max().item<double>());
  }
  return worst;
}

Verdict gan_checks() {
  // Reduction: two epochs on two small subjects, default architecture.
  PhantomParams small;
  small.size = 32;
  const std::vector<SubjectPair> pairs = {make_subject(0, 31, small, DegradeParams{}),
                                          make_subject(1, 31, small, DegradeParams{})};
  SRGANConfig zero;
  zero.adversarial_weight = 0.0;
  SrganModels gan = build_srgan(zero, 8);
  Model reference = gan.generator.clone();
  TrainConfig config;
  config.model = ModelKind::kSrgan;
  config.epochs = 2;
  config.seed = 8;
  config.adversarial_weight = 0.0;
  progress("GAN reduction: 2 epochs with adversarial weight 0");
  train_gan(gan.generator, gan.discriminator, pairs, config);
  train_mse(reference, pairs, config);
  const double diff = max_param_diff(gan.generator, reference);

  // Smoke: 4 subjects at 64^3, subject-level split, default weight, 5 epochs.
  TempDir dir("acceptance_gan");
  const DatasetManifest manifest =
      generate_dataset(4, 4242, PhantomParams{}, DegradeParams{}, dir.path());
  const SubjectSplit split = split_by_subject(manifest, 0.9, 4242);
  const auto train = load_subjects(manifest, split.train);
  const auto test = load_subjects(manifest, split.test);
  SrganModels smoke = build_srgan({}, 9);
  TrainConfig smoke_config;
  smoke_config.model = ModelKind::kSrgan;
  smoke_config.epochs = 5;
  smoke_config.seed = 9;
  progress("GAN smoke: 5 epochs on " + std::to_string(train.size()) + " subjects");
  const TrainHistory history =
      train_gan(smoke.generator, smoke.discriminator, train, smoke_config,
                [&](const EpochRecord& r) {
                  progress("srgan epoch " + std::to_string(r.epoch + 1) +
                           fmt(" G %.6f D %.6f adv %.6f", r.loss, *r.discriminator_loss,
                               *r.adversarial_loss));
                });
  bool finite = history.epochs.size() == 5;
  for (const auto& r : history.epochs) {
    finite = finite && std::isfinite(r.loss) && r.discriminator_loss &&
             std::isfinite(*r.discriminator_loss) && r.adversarial_loss &&
             std::isfinite(*r.adversarial_loss);
  }
  std::vector<Volume> sources, outputs;
  for (const auto& p : test) {
    sources.push_back(p.source);
    outputs.push_back(convert_volume(smoke.generator, p.source, Axis::kSagittal));
  }
  const Scores base = score(sources, test);
  const Scores got = score(outputs, test);
  const bool pass = diff <= 1e-7 && finite && got.psnr >= base.psnr - 0.5;
  return {pass, "w=0 max |param diff| after 2 epochs " + fmt("%.3e", diff) +
                    " (need <= 1e-7); 5-epoch losses " + (finite ? "finite" : "NOT finite") +
                    "; held-out PSNR " +
                    fmt("%.4f dB vs baseline %.4f dB (need >= baseline - 0.5)", got.psnr,
                        base.psnr)};
}

}  // namespace

int run_suite(int argc, char** argv) {
  CLI::App app{"U-Convert acceptance suite"};
  std::vector<int> only;
  std::string report_path = "acceptance_report.txt";
  app.add_option("--only", only, "Run only these criteria (1-8)")->delimiter(',');
  app.add_option("--report", report_path, "Also write the verdict lines to this file")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int c) { return selected.empty() || selected.count(c) > 0; };

  torch::set_num_threads(1);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::pair<int, std::pair<std::string, Verdict>>> results;
  auto run = [&](int id, const std::string& name, const std::function<Verdict()>& fn) {
    progress("criterion " + std::to_string(id) + ": " + name);
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& ex) {
      v = {false, std::string("exception: ") + ex.what()};
    }
    results.push_back({id, {name, v}});
  };

  if (wanted(1)) run(1, "metric oracle equivalence", metric_oracles);
  if (wanted(2)) run(2, "round-trip suites", round_trips);
  if (wanted(3)) run(3, "gradient checks", gradient_checks);
  if (wanted(7)) run(7, "model-size ordering", model_sizes);
  if (wanted(8)) run(8, "GAN reduction and smoke", gan_checks);

  std::optional<EndToEnd> e2e;
  if (wanted(5) || wanted(6) || wanted(4)) {
    try {
      e2e = end_to_end(/*multiview=*/wanted(6) || wanted(4));
    } catch (const std::exception& ex) {
      progress(std::string("end-to-end run failed: ") + ex.what());
    }
  }
  auto need_e2e = [&](auto fn) {
    return [&, fn]() -> Verdict {
      if (!e2e) return {false, "end-to-end run failed"};
      return fn(*e2e);
    };
  };
  if (wanted(5)) run(5, "end-to-end learning", need_e2e([](const EndToEnd& e) {
                       return learning_verdict(e);
                     }));
  if (wanted(6)) run(6, "multi-view trend", need_e2e([](const EndToEnd& e) {
                       return multiview_verdict(e);
                     }));
  if (wanted(4)) {
    run(4, "Jensen fusion property", [&] {
      std::optional<JensenTally> trained;
      if (e2e && e2e->jensen.checked > 0) trained = e2e->jensen;
      return jensen_verdict(jensen_random(), trained);
    });
  }

  std::sort(results.begin(), results.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  int failed = 0;
  std::ostringstream report;
  for (const auto& [id, named] : results) {
    const auto& [name, v] = named;
    report << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name
           << "): " << v.detail << '\n';
    failed += !v.pass;
  }
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  report << (failed == 0 ? "ALL PASS" : "FAILURES") << ": " << results.size() - failed << "/"
         << results.size() << " criteria passed in " << fmt("%.1f", minutes) << " min\n";
  std::cout << report.str() << std::flush;
  if (!report_path.empty()) {
    std::ofstream file(report_path, std::ios::trunc);
    file << report.str();
    if (!file) progress("could not write report to " + report_path);
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace uconvert::acceptance

int main(int argc, char** argv) { return uconvert::acceptance::run_suite(argc, argv); }
