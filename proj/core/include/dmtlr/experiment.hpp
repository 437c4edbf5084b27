#ifndef DMTLR_EXPERIMENT_HPP
#define DMTLR_EXPERIMENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dmtlr/metrics.hpp"
#include "dmtlr/pipeline.hpp"
#include "dmtlr/regressor.hpp"

namespace dmtlr::eval {

// Full multi-trial study: per trial a fresh split, fresh preprocessing fits
// and fresh models per kind, all sharing one TrainConfig.
struct ExperimentConfig {
  std::string manifest_path;
  std::string backbone_path;  // required when an image-bearing kind runs
  std::vector<ModelKind> kinds = {ModelKind::kDmtlr, ModelKind::kImageOnly,
                                  ModelKind::kStatsOnly};
  int target_index = 0;  // 1..6 single-target, 0 = all six targets
  int trials = 5;
  TrainConfig train;
  std::string output_dir;
  int threads = 1;  // trial-level parallelism cap
};

struct MetricsRow {
  int target_index = 0;  // 1-based
  ModelKind kind = ModelKind::kDmtlr;
  double r2_mean = 0.0;
  double r2_ci_halfwidth = 0.0;
  double slope_mean = 0.0;
  int trials = 0;
  bool valid = true;  // false rows carry nan metrics (flagged fit failure)
};

struct TrialOutcome {
  int trial = 0;
  ModelKind kind = ModelKind::kDmtlr;
  TrainReport report;
  std::vector<FitResult> per_target;  // physical-unit fits, one per target
};

struct PredictionRecord {
  ModelKind kind = ModelKind::kDmtlr;
  int trial = 0;
  std::int64_t sample_id = 0;
  int target_index = 0;  // 1-based
  double truth = 0.0;
  double predicted = 0.0;
};

struct ExperimentResult {
  std::vector<MetricsRow> metrics;          // ordered by (target, kind)
  std::vector<TrialOutcome> outcomes;       // ordered by (trial, kind)
  std::vector<PredictionRecord> predictions;
  std::vector<int> target_indices;          // 1-based targets evaluated
};

// Runs the study and writes metrics.csv, loss_curves.csv, predictions.csv and
// plots under output_dir. Missing inputs or an unwritable output directory
// are rejected before any training starts.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Split-and-preprocess step shared by the study trials and single training
// runs: fits channel means and scalers on the train split only.
struct PreparedSplits {
  TrainData train;
  TrainData test;
  nn::Tensor test_targets_raw;               // physical units
  std::vector<std::int64_t> test_sample_ids;
  data::StandardScaler target_scaler;
  std::vector<int> target_columns;  // 0-based into the 6-wide target rows
};

PreparedSplits prepare_splits(const data::RawDataset& raw,
                              const data::SplitPlan& plan, int target_index,
                              bool use_images);

// One split, one model, one training run; writes loss_curves.csv,
// predictions.csv, a model checkpoint and plots under output_dir. Uses
// kinds.front() and ignores `trials`.
struct SingleRunResult {
  TrainReport report;
  std::vector<MetricsRow> metrics;  // single-trial fits, halfwidth 0
};

SingleRunResult run_single(const ExperimentConfig& config);

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);
void write_loss_curves_csv(const std::vector<TrialOutcome>& outcomes,
                           const std::string& path);
void write_predictions_csv(const std::vector<PredictionRecord>& records,
                           const std::string& path);

// CSV re-readers (used by the `report` subcommand to re-render plots).
std::vector<TrialOutcome> read_loss_curves_csv(const std::string& path);
std::vector<PredictionRecord> read_predictions_csv(const std::string& path);

// Loss-curve and true-vs-predicted charts, written under <output_dir>/plots.
void render_experiment_plots(const std::vector<TrialOutcome>& outcomes,
                             const std::vector<PredictionRecord>& predictions,
                             const std::string& output_dir);

}  // namespace dmtlr::eval

#endif  // DMTLR_EXPERIMENT_HPP
