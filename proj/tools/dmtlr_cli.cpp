// Command-line front end: dataset generation, backbone pretraining, single
// training runs, multi-trial experiments and report re-rendering.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmtlr/checkpoint.hpp"
#include "dmtlr/dataset.hpp"
#include "dmtlr/experiment.hpp"
#include "dmtlr/pipeline.hpp"
#include "dmtlr/plot.hpp"
#include "dmtlr/regressor.hpp"

namespace fs = std::filesystem;

namespace {

int env_threads() {
  const char* value = std::getenv("DMTLR_THREADS");
  if (!value) return 1;
  const int parsed = std::atoi(value);
  return parsed > 0 ? parsed : 1;
}

std::vector<dmtlr::ModelKind> parse_kinds(const std::string& csv) {
  std::vector<dmtlr::ModelKind> kinds;
  std::istringstream is(csv);
  std::string token;
  while (std::getline(is, token, ','))
    if (!token.empty()) kinds.push_back(dmtlr::model_kind_from_string(token));
  if (kinds.empty()) throw CLI::ValidationError("--kinds", "no model kinds given");
  return kinds;
}

int parse_targets(const std::string& value) {
  if (value == "all") return 0;
  const int index = std::atoi(value.c_str());
  if (index < 1 || index > 6)
    throw CLI::ValidationError("--targets", "expected 'all' or an index 1..6");
  return index;
}

dmtlr::SourceDataset assemble_source(const dmtlr::data::RawDataset& raw,
                                     const dmtlr::BackboneSpec& spec) {
  dmtlr::SourceDataset source;
  source.images = dmtlr::data::resize_images(raw.images, spec.input_h, spec.input_w);
  const auto means = dmtlr::data::fit_channel_means(source.images);
  source.images = dmtlr::data::prepare_images(source.images, means);
  source.labels.reserve(static_cast<std::size_t>(raw.size()));
  for (int i = 0; i < raw.size(); ++i)
    source.labels.push_back(
        dmtlr::quench_time_bin(raw.descriptors.at2(i, 5)));  // p06, total time
  return source;
}

void print_metrics(const std::vector<dmtlr::eval::MetricsRow>& rows) {
  std::printf("%-8s %-12s %12s %14s %12s %8s\n", "target", "kind", "r2_mean",
              "r2_ci", "slope_mean", "trials");
  for (const auto& row : rows)
    std::printf("%-8d %-12s %12.4f %14.4f %12.4f %8d\n", row.target_index,
                dmtlr::to_string(row.kind).c_str(), row.r2_mean,
                row.r2_ci_halfwidth, row.slope_mean, row.trials);
}

int cmd_generate(const std::string& out_dir, int count, std::uint64_t seed,
                 const std::string& regime, int grid) {
  const auto reg = regime == "source" ? dmtlr::sim::Regime::kSource
                                      : dmtlr::sim::Regime::kTarget;
  const auto manifest = dmtlr::data::generate_dataset(count, reg, grid, seed, out_dir);
  std::printf("wrote %zu samples to %s (flagged: %zu)\n", manifest.rows.size(),
              out_dir.c_str(), manifest.flagged_ids.size());
  return 0;
}

int cmd_pretrain(const std::string& manifest_path, const std::string& out_path,
                 int epochs, double lr, std::uint64_t seed) {
  const dmtlr::BackboneSpec spec;  // 64x64x3, [(16,2),(32,2),(64,2)], [256,128]
  const auto raw = dmtlr::data::load_dataset(manifest_path);
  const auto source = assemble_source(raw, spec);
  auto backbone = dmtlr::build_backbone(spec, seed);
  backbone = dmtlr::pretrain_backbone(std::move(backbone), source, epochs, lr, seed);
  backbone = dmtlr::freeze(std::move(backbone));
  dmtlr::save_backbone(backbone, out_path);
  const auto& report = backbone.source_task_report;
  std::printf("pretrained on %d source samples: holdout loss %.4f -> %.4f, "
              "accuracy %.3f; frozen checkpoint at %s\n",
              raw.size(), report.initial_holdout_loss, report.final_holdout_loss,
              report.final_holdout_accuracy, out_path.c_str());
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& backbone_path,
              const std::string& kind_name, const std::string& targets,
              dmtlr::TrainConfig config, const std::string& out_dir) {
  dmtlr::eval::ExperimentConfig single;
  single.manifest_path = manifest_path;
  single.backbone_path = backbone_path;
  single.kinds = {dmtlr::model_kind_from_string(kind_name)};
  single.target_index = parse_targets(targets);
  single.train = config;
  single.output_dir = out_dir;

  const auto result = dmtlr::eval::run_single(single);
  print_metrics(result.metrics);
  std::printf("final losses: train %.6f test %.6f (%.1fs); reports in %s\n",
              result.report.train_loss.back(), result.report.test_loss.back(),
              result.report.wall_time_seconds, out_dir.c_str());
  return 0;
}

int cmd_experiment(dmtlr::eval::ExperimentConfig config) {
  config.threads = env_threads();
  const auto result = dmtlr::eval::run_experiment(config);
  print_metrics(result.metrics);
  std::printf("reports written to %s\n", config.output_dir.c_str());
  return 0;
}

int cmd_report(const std::string& in_dir) {
  const auto outcomes =
      dmtlr::eval::read_loss_curves_csv((fs::path(in_dir) / "loss_curves.csv").string());
  const auto predictions =
      dmtlr::eval::read_predictions_csv((fs::path(in_dir) / "predictions.csv").string());
  dmtlr::eval::render_experiment_plots(outcomes, predictions, in_dir);
  std::printf("plots re-rendered under %s/plots\n", in_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal transfer-learned regression on phase-field microstructures"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "Synthesize a dataset");
  std::string gen_out;
  int gen_count = 900;
  std::uint64_t gen_seed = 3;
  std::string gen_regime = "target";
  int gen_grid = 64;
  generate->add_option("--out", gen_out, "Output directory")->required();
  generate->add_option("--count", gen_count, "Number of samples");
  generate->add_option("--seed", gen_seed, "Dataset seed");
  generate->add_option("--regime", gen_regime, "Sampling regime")
      ->check(CLI::IsMember({"target", "source"}));
  generate->add_option("--grid", gen_grid, "Grid size (power of two)");

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "Pretrain and freeze a backbone");
  std::string pre_dataset, pre_out = "backbone.ckpt";
  int pre_epochs = 5;
  double pre_lr = 5e-4;
  std::uint64_t pre_seed = 7;
  pretrain->add_option("--dataset", pre_dataset, "Source manifest.csv")->required();
  pretrain->add_option("--out", pre_out, "Checkpoint path");
  pretrain->add_option("--epochs", pre_epochs, "Pretraining epochs");
  pretrain->add_option("--lr", pre_lr, "Learning rate");
  pretrain->add_option("--seed", pre_seed, "Pretraining seed");

  // shared training flags
  auto add_train_flags = [](CLI::App* cmd, dmtlr::TrainConfig& config) {
    cmd->add_option("--epochs", config.epochs, "Training epochs");
    cmd->add_option("--batch-size", config.batch_size, "Batch size");
    cmd->add_option("--lr", config.lr, "Learning rate");
    cmd->add_option("--lr-decay", config.lr_decay, "Per-epoch lr decay");
    cmd->add_option("--seed", config.seed, "Run seed");
    cmd->add_flag("--force-lr", config.lr_override,
                  "Allow lr outside [1e-4, 1e-3]");
  };

  // train
  auto* train = app.add_subcommand("train", "Train one model on one split");
  std::string train_dataset, train_backbone, train_kind = "dmtlr",
              train_targets = "all", train_out = "train_out";
  dmtlr::TrainConfig train_config;
  train->add_option("--dataset", train_dataset, "Target manifest.csv")->required();
  train->add_option("--backbone", train_backbone, "Frozen backbone checkpoint");
  train->add_option("--kind", train_kind, "dmtlr|image|stats");
  train->add_option("--targets", train_targets, "'all' or index 1..6");
  train->add_option("--out", train_out, "Output directory");
  add_train_flags(train, train_config);

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Multi-trial comparison study");
  dmtlr::eval::ExperimentConfig exp_config;
  std::string exp_kinds = "dmtlr,image,stats", exp_targets = "all";
  experiment->add_option("--dataset", exp_config.manifest_path, "Target manifest.csv")
      ->required();
  experiment->add_option("--backbone", exp_config.backbone_path,
                         "Frozen backbone checkpoint");
  experiment->add_option("--kinds", exp_kinds, "Comma list: dmtlr,image,stats");
  experiment->add_option("--targets", exp_targets, "'all' or index 1..6");
  experiment->add_option("--trials", exp_config.trials, "Independent trials");
  experiment->add_option("--out", exp_config.output_dir, "Output directory")
      ->required();
  add_train_flags(experiment, exp_config.train);

  // report
  auto* report = app.add_subcommand("report", "Re-render plots from CSV reports");
  std::string report_dir;
  report->add_option("--in", report_dir, "Experiment output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed())
      return cmd_generate(gen_out, gen_count, gen_seed, gen_regime, gen_grid);
    if (pretrain->parsed())
      return cmd_pretrain(pre_dataset, pre_out, pre_epochs, pre_lr, pre_seed);
    if (train->parsed())
      return cmd_train(train_dataset, train_backbone, train_kind, train_targets,
                       train_config, train_out);
    if (experiment->parsed()) {
      exp_config.kinds = parse_kinds(exp_kinds);
      exp_config.target_index = parse_targets(exp_targets);
      return cmd_experiment(exp_config);
    }
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 1;
  }
  return 0;
}
