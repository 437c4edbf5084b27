// Acceptance suite: one pass/fail line per criterion, shared artifacts for
// the expensive study. Exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dmtlr/backbone.hpp"
#include "dmtlr/checkpoint.hpp"
#include "dmtlr/dataset.hpp"
#include "dmtlr/experiment.hpp"
#include "dmtlr/gradient_check.hpp"
#include "dmtlr/metrics.hpp"
#include "dmtlr/pipeline.hpp"
#include "dmtlr/regressor.hpp"
#include "dmtlr/rng.hpp"
#include "dmtlr/simulation.hpp"

using namespace dmtlr;
using nn::Activation;
using nn::LayerSpec;
using nn::Padding;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

constexpr int kPretrainEpochs = 12;
constexpr double kPretrainLr = 1e-3;
constexpr double kExperimentLr = 1e-3;

struct Outcome {
  int criterion;
  bool pass;
  std::string details;
};

std::vector<Outcome> g_outcomes;

void record(int criterion, bool pass, const std::string& details) {
  g_outcomes.push_back({criterion, pass, details});
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              details.c_str());
  std::fflush(stdout);
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

BackboneSpec tiny_spec() {
  BackboneSpec spec;
  spec.input_h = 16;
  spec.input_w = 16;
  spec.blocks = {{4, 1}, {8, 1}};
  spec.ft_head_dims = {16, 8};
  return spec;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

char fmt_buffer[512];
template <typename... Args>
std::string format(const char* pattern, Args... args) {
  std::snprintf(fmt_buffer, sizeof(fmt_buffer), pattern, args...);
  return fmt_buffer;
}

// --- criterion 1: gradient fidelity --------------------------------------

void criterion_gradient_fidelity() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst_dense = 0.0, worst_conv = 0.0, worst_model = 0.0;
  {
    nn::Sequential net;
    net.append(LayerSpec::dense(6, 8, Activation::kReLU), rng);
    net.append(LayerSpec::dense(8, 4, Activation::kReLU), rng);
    net.append(LayerSpec::dense(4, 3, Activation::kLinear), rng);
    const Tensor input = random_tensor({4, 6}, rng);
    const Tensor target = random_tensor({4, 3}, rng);
    worst_dense = nn::gradient_check(net, input, target);
  }
  {
    nn::Sequential net;
    net.append(LayerSpec::conv2d(2, 4, 3, 1, Padding::kSame, Activation::kReLU), rng);
    net.append(LayerSpec::max_pool2d(2, 2), rng);
    net.append(LayerSpec::flatten(), rng);
    net.append(LayerSpec::dense(4 * 4 * 4, 3, Activation::kLinear), rng);
    const Tensor input = random_tensor({2, 8, 8, 2}, rng);
    const Tensor target = random_tensor({2, 3}, rng);
    worst_conv = nn::gradient_check(net, input, target);
  }
  {
    const PretrainedBackbone backbone = freeze(build_backbone(tiny_spec(), 7));
    DMTLRModel model = build_dmtlr(backbone, 5, 2, 9);
    TrainData batch;
    batch.images = random_tensor({3, 16, 16, 3}, rng);
    batch.descriptors = random_tensor({3, 5}, rng);
    batch.targets = random_tensor({3, 2}, rng);
    worst_model = model_gradient_check(model, batch, 80);
  }
  const double seconds = elapsed_seconds(start);
  const double worst = std::max({worst_dense, worst_conv, worst_model});
  record(1, worst < 1e-4 && seconds < 30.0,
         format("gradient fidelity: dense %.2e, conv stack %.2e, full model %.2e "
                "(all < 1e-4), %.1fs (< 30s)",
                worst_dense, worst_conv, worst_model, seconds));
}

// --- criterion 7: metric correctness --------------------------------------

void criterion_metric_correctness() {
  bool pass = true;
  std::string detail;
  {
    const std::vector<double> truth = {0.0, 1.0, 2.0};
    const std::vector<double> predicted = {0.1, 0.9, 2.1};
    const double p_mean = (0.1 + 0.9 + 2.1) / 3.0;
    double s_tt = 0, s_pp = 0, s_tp = 0;
    for (int i = 0; i < 3; ++i) {
      const double dt = truth[static_cast<std::size_t>(i)] - 1.0;
      const double dp = predicted[static_cast<std::size_t>(i)] - p_mean;
      s_tt += dt * dt;
      s_pp += dp * dp;
      s_tp += dt * dp;
    }
    const eval::FitResult fit = eval::r_squared(truth, predicted);
    pass &= fit.valid;
    pass &= std::abs(fit.r2 - (s_tp * s_tp) / (s_tt * s_pp)) < 1e-12;
    pass &= std::abs(fit.slope - s_tp / s_tt) < 1e-12;
  }
  {
    const std::vector<double> truth = {1.0, 2.0, 5.0};
    const eval::FitResult fit = eval::r_squared(truth, truth);
    pass &= std::abs(fit.r2 - 1.0) < 1e-12 && std::abs(fit.slope - 1.0) < 1e-12;
  }
  {
    const std::vector<double> two = {0.9, 1.1};
    const eval::Interval interval = eval::confidence_interval(two);
    const double s = std::sqrt(0.02);
    const double oracle = std::tan(M_PI * 0.475) * s / std::sqrt(2.0);
    pass &= std::abs(interval.mean - 1.0) < 1e-12;
    pass &= std::abs(interval.halfwidth - oracle) < 1e-12;
    detail = format("metric correctness: 3-point OLS and 2-trial t-interval match "
                    "closed forms to 1e-12 (halfwidth %.12f)",
                    interval.halfwidth);
  }
  record(7, pass, detail);
}

// --- criterion 9: pipeline hygiene ----------------------------------------

void criterion_pipeline_hygiene() {
  bool pass = true;
  Rng rng(103);
  const Tensor rows = random_tensor({60, 7}, rng);
  data::StandardScaler scaler;
  scaler.fit(rows);
  const Tensor scaled = scaler.transform(rows);
  const Tensor back = scaler.inverse_transform(scaled);
  double round_trip = 0.0;
  for (std::int64_t i = 0; i < rows.numel(); ++i)
    round_trip = std::max(round_trip, std::abs(back[i] - rows[i]));
  pass &= round_trip < 1e-9;

  double worst_mean = 0.0, worst_var = 0.0;
  for (int j = 0; j < 7; ++j) {
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < 60; ++i) mean += scaled.at2(i, j);
    mean /= 60;
    for (int i = 0; i < 60; ++i) {
      const double d = scaled.at2(i, j) - mean;
      var += d * d;
    }
    var /= 60;
    worst_mean = std::max(worst_mean, std::abs(mean));
    worst_var = std::max(worst_var, std::abs(var - 1.0));
  }
  pass &= worst_mean < 1e-9 && worst_var < 1e-6;

  const data::SplitPlan big = data::split(2500, 1);
  const data::SplitPlan ours = data::split(900, 1);
  pass &= big.train_indices.size() == 1667 && big.test_indices.size() == 833;
  pass &= ours.train_indices.size() == 600 && ours.test_indices.size() == 300;

  record(9, pass,
         format("pipeline hygiene: scaler round-trip %.1e (< 1e-9), train mean "
                "%.1e, |var-1| %.1e, splits 2500->1667/833 and 900->600/300",
                round_trip, worst_mean, worst_var));
}

// --- criterion 4: simulator physics ---------------------------------------

void criterion_simulator_physics() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(104);
  double worst_drift = 0.0;
  double worst_energy_rise = -1.0;
  bool pass = true;
  for (int draw = 0; draw < 100; ++draw) {
    const sim::SimParams params = sim::sample_params(rng, sim::Regime::kTarget);
    Rng run_rng(derive_seed(104, static_cast<std::uint64_t>(draw)));
    std::vector<double> energies;
    const sim::PhaseField field =
        sim::run_simulation(params, 64, run_rng, 50, &energies);
    worst_drift =
        std::max(worst_drift, std::abs(field.mean() - params.mean_composition));
    for (std::size_t i = 1; i < energies.size(); ++i)
      worst_energy_rise = std::max(worst_energy_rise, energies[i] - energies[i - 1]);
  }
  const double seconds = elapsed_seconds(start);
  pass &= worst_drift < 1e-10;
  pass &= worst_energy_rise <= 1e-8;
  pass &= seconds < 180.0;
  record(4, pass,
         format("simulator physics over 100 draws: |mean drift| %.2e (< 1e-10), "
                "max energy rise per 50-step checkpoint %.2e (<= 1e-8), %.1fs (< 180s)",
                worst_drift, worst_energy_rise, seconds));
}

// --- criteria 5/2/6/8: the headline study ----------------------------------

struct StudyArtifacts {
  eval::ExperimentResult result;
  eval::ExperimentConfig config;
  fs::path dir;
  double mean_r2_dmtlr = 0.0, mean_r2_image = 0.0, mean_r2_stats = 0.0;
  bool ran = false;
};

double kind_mean_r2(const eval::ExperimentResult& result, ModelKind kind) {
  double sum = 0.0;
  int count = 0;
  for (const auto& row : result.metrics) {
    if (row.kind != kind) continue;
    if (!row.valid) return std::numeric_limits<double>::quiet_NaN();
    sum += row.r2_mean;
    ++count;
  }
  return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

StudyArtifacts criterion_headline_study() {
  StudyArtifacts study;
  study.dir = fs::path("acceptance_artifacts");
  fs::remove_all(study.dir);
  fs::create_directories(study.dir);

  const auto start = std::chrono::steady_clock::now();
  data::generate_dataset(900, sim::Regime::kTarget, 64, 3,
                         (study.dir / "target_ds").string());
  data::generate_dataset(400, sim::Regime::kSource, 64, 11,
                         (study.dir / "source_ds").string());

  // pretrain on the source regime, then freeze
  const auto source_raw =
      data::load_dataset((study.dir / "source_ds/manifest.csv").string());
  SourceDataset source;
  {
    const auto means = data::fit_channel_means(source_raw.images);
    source.images = data::prepare_images(source_raw.images, means);
    for (int i = 0; i < source_raw.size(); ++i)
      source.labels.push_back(quench_time_bin(source_raw.descriptors.at2(i, 5)));
  }
  PretrainedBackbone backbone = build_backbone(BackboneSpec{}, 7);
  backbone = pretrain_backbone(std::move(backbone), source, kPretrainEpochs,
                               kPretrainLr, 7);
  backbone = freeze(std::move(backbone));
  save_backbone(backbone, (study.dir / "backbone.ckpt").string());

  study.config.manifest_path = (study.dir / "target_ds/manifest.csv").string();
  study.config.backbone_path = (study.dir / "backbone.ckpt").string();
  study.config.kinds = {ModelKind::kDmtlr, ModelKind::kImageOnly,
                        ModelKind::kStatsOnly};
  study.config.target_index = 0;
  study.config.trials = 3;
  study.config.train.epochs = 20;
  study.config.train.batch_size = 32;
  study.config.train.lr = kExperimentLr;
  study.config.train.seed = 1;
  study.config.output_dir = (study.dir / "experiment").string();
  study.result = run_experiment(study.config);
  study.ran = true;

  const double seconds = elapsed_seconds(start);
  study.mean_r2_dmtlr = kind_mean_r2(study.result, ModelKind::kDmtlr);
  study.mean_r2_image = kind_mean_r2(study.result, ModelKind::kImageOnly);
  study.mean_r2_stats = kind_mean_r2(study.result, ModelKind::kStatsOnly);

  const bool pass = study.mean_r2_dmtlr >= study.mean_r2_stats &&
                    study.mean_r2_dmtlr >= study.mean_r2_image &&
                    study.mean_r2_dmtlr >= 0.75 && seconds < 600.0;
  record(5, pass,
         format("headline ordering: mean R2 dmtlr %.4f >= stats_only %.4f and >= "
                "image_only %.4f, dmtlr >= 0.75, %.0fs (< 600s)",
                study.mean_r2_dmtlr, study.mean_r2_stats, study.mean_r2_image,
                seconds));
  return study;
}

void criterion_frozen_hashes(const StudyArtifacts& study) {
  bool pass = study.ran;
  int checked = 0;
  for (const auto& outcome : study.result.outcomes) {
    if (outcome.kind == ModelKind::kStatsOnly) continue;
    ++checked;
    pass &= outcome.report.frozen_hash_before == outcome.report.frozen_hash_after;
    pass &= outcome.report.frozen_hash_before != 0;
  }
  pass &= checked == 6;  // 3 trials x {dmtlr, image_only}
  record(2, pass,
         format("frozen transfer contract: w_f hash identical before/after all %d "
                "20-epoch image-branch runs",
                checked));
}

void criterion_loss_curves(const StudyArtifacts& study) {
  int generalizing = 0, total = 0;
  for (const auto& outcome : study.result.outcomes) {
    if (outcome.kind != ModelKind::kDmtlr) continue;
    ++total;
    if (outcome.report.test_loss.back() <= 1.5 * outcome.report.train_loss.back())
      ++generalizing;
  }
  record(6, study.ran && total == 3 && generalizing >= 2,
         format("loss-curve shape: final test <= 1.5x final train in %d of %d "
                "dmtlr trials (need >= 2 of 3)",
                generalizing, total));
}

void criterion_determinism(const StudyArtifacts& study) {
  eval::ExperimentConfig config = study.config;
  config.output_dir = (study.dir / "experiment_repeat").string();
  run_experiment(config);
  const std::string first = slurp(fs::path(study.config.output_dir) / "metrics.csv");
  const std::string second = slurp(fs::path(config.output_dir) / "metrics.csv");
  record(8, !first.empty() && first == second,
         format("determinism: repeated study reproduces metrics.csv bit-for-bit "
                "(%zu bytes)",
                first.size()));
}

// --- criterion 3: memorization sanity --------------------------------------

void criterion_memorization(const StudyArtifacts& study) {
  const auto start = std::chrono::steady_clock::now();
  const auto raw =
      data::load_dataset((study.dir / "target_ds/manifest.csv").string());
  std::vector<int> rows(32);
  for (int i = 0; i < 32; ++i) rows[static_cast<std::size_t>(i)] = i;

  const Tensor images_raw = data::gather_rows(raw.images, rows);
  const auto means = data::fit_channel_means(images_raw);
  TrainData set;
  set.images = data::prepare_images(images_raw, means);
  data::StandardScaler desc_scaler, target_scaler;
  const Tensor desc_raw = data::gather_rows(raw.descriptors, rows);
  const Tensor target_raw = data::gather_rows(raw.targets, rows);
  desc_scaler.fit(desc_raw);
  target_scaler.fit(target_raw);
  set.descriptors = desc_scaler.transform(desc_raw);
  set.targets = target_scaler.transform(target_raw);

  const PretrainedBackbone backbone =
      load_backbone((study.dir / "backbone.ckpt").string());
  DMTLRModel model = build_dmtlr(backbone, 18, 6, 21);
  TrainConfig config;
  config.epochs = 500;
  config.batch_size = 32;  // full batch
  config.lr = 1e-3;
  config.lr_decay = 1.0;
  config.seed = 33;
  config.n_output = 6;
  const TrainReport report = train(model, set, set, config);
  double best = report.train_loss.front();
  for (double v : report.train_loss) best = std::min(best, v);
  const double seconds = elapsed_seconds(start);
  record(3, best < 1e-2 && seconds < 120.0,
         format("memorization sanity: best train MSE %.2e within 500 full-batch "
                "epochs (< 1e-2), %.1fs (< 120s)",
                best, seconds));
}

}  // namespace

int main() {
  std::printf("acceptance suite (artifacts under ./acceptance_artifacts)\n");
  criterion_gradient_fidelity();
  criterion_metric_correctness();
  criterion_pipeline_hygiene();
  criterion_simulator_physics();
  const StudyArtifacts study = criterion_headline_study();
  criterion_frozen_hashes(study);
  criterion_loss_curves(study);
  criterion_determinism(study);
  criterion_memorization(study);

  std::sort(g_outcomes.begin(), g_outcomes.end(),
            [](const Outcome& a, const Outcome& b) { return a.criterion < b.criterion; });
  int failures = 0;
  std::printf("\nsummary:\n");
  for (const auto& outcome : g_outcomes) {
    std::printf("  [%s] criterion %d\n", outcome.pass ? "PASS" : "FAIL",
                outcome.criterion);
    if (!outcome.pass) ++failures;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(g_outcomes.size()) - failures,
              g_outcomes.size());
  return failures;
}
