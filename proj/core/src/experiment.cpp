#include "dmtlr/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dmtlr/checkpoint.hpp"
#include "dmtlr/pipeline.hpp"
#include "dmtlr/plot.hpp"

namespace dmtlr::eval {

namespace fs = std::filesystem;
using nn::Tensor;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

bool needs_images(const std::vector<ModelKind>& kinds) {
  return std::any_of(kinds.begin(), kinds.end(), [](ModelKind k) {
    return k != ModelKind::kStatsOnly;
  });
}

void validate_config(const ExperimentConfig& config) {
  if (config.kinds.empty())
    throw std::invalid_argument("experiment: no model kinds selected");
  if (config.trials < 2)
    throw std::invalid_argument("experiment: trials must be >= 2 for confidence intervals");
  if (config.target_index < 0 || config.target_index > 6)
    throw std::invalid_argument("experiment: target_index must be 0 (all) or 1..6");
  if (config.output_dir.empty())
    throw std::invalid_argument("experiment: output_dir required");
}

// Ensures the output directory is usable before any training starts.
void prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "plots", ec);
  if (ec)
    throw std::runtime_error("experiment: cannot create output dir " + dir + ": " +
                             ec.message());
  const fs::path probe = fs::path(dir) / ".write_probe";
  std::ofstream os(probe);
  if (!os)
    throw std::runtime_error("experiment: output dir " + dir + " is not writable");
  os.close();
  fs::remove(probe, ec);
}

struct TrialInputs {
  const data::RawDataset* raw = nullptr;
  const PretrainedBackbone* backbone = nullptr;
  const ExperimentConfig* config = nullptr;
  std::vector<int> target_columns;  // 0-based columns of the 6-wide targets
  bool use_images = false;
};

struct TrialProducts {
  std::vector<TrialOutcome> outcomes;          // one per kind
  std::vector<PredictionRecord> predictions;   // ordered by (kind, sample, target)
};

DMTLRModel build_kind(ModelKind kind, const PretrainedBackbone& backbone,
                      int n_output, std::uint64_t seed) {
  switch (kind) {
    case ModelKind::kDmtlr:
      return build_dmtlr(backbone, 18, n_output, seed);
    case ModelKind::kImageOnly:
      return build_image_only(backbone, n_output, seed);
    case ModelKind::kStatsOnly:
      return build_stats_only(18, n_output, seed);
  }
  throw std::logic_error("unreachable model kind");
}

TrialProducts run_trial(const TrialInputs& in, int trial) {
  const ExperimentConfig& config = *in.config;
  const data::RawDataset& raw = *in.raw;
  const std::uint64_t trial_seed = derive_seed(config.train.seed, 0x7710a1ULL + static_cast<std::uint64_t>(trial));

  const data::SplitPlan plan = data::split(raw.size(), trial_seed);
  const PreparedSplits splits =
      prepare_splits(raw, plan, config.target_index, in.use_images);
  const int n_output = static_cast<int>(splits.target_columns.size());

  TrialProducts products;
  for (std::size_t ki = 0; ki < config.kinds.size(); ++ki) {
    const ModelKind kind = config.kinds[ki];
    DMTLRModel model =
        build_kind(kind, *in.backbone, n_output,
                   derive_seed(trial_seed, 100 + static_cast<std::uint64_t>(kind)));
    TrainConfig tc = config.train;
    tc.n_output = n_output;
    tc.seed = derive_seed(trial_seed, 200 + static_cast<std::uint64_t>(kind));

    TrialOutcome outcome;
    outcome.trial = trial;
    outcome.kind = kind;
    outcome.report = train(model, splits.train, splits.test, tc);

    const Tensor physical =
        splits.target_scaler.inverse_transform(outcome.report.final_test_predictions);
    const int n_test = physical.dim(0);
    for (int j = 0; j < n_output; ++j) {
      std::vector<double> truth(static_cast<std::size_t>(n_test));
      std::vector<double> predicted(static_cast<std::size_t>(n_test));
      for (int i = 0; i < n_test; ++i) {
        truth[static_cast<std::size_t>(i)] = splits.test_targets_raw.at2(i, j);
        predicted[static_cast<std::size_t>(i)] = physical.at2(i, j);
      }
      outcome.per_target.push_back(r_squared(truth, predicted));
    }
    for (int i = 0; i < n_test; ++i)
      for (int j = 0; j < n_output; ++j)
        products.predictions.push_back(
            {kind, trial, splits.test_sample_ids[static_cast<std::size_t>(i)],
             splits.target_columns[static_cast<std::size_t>(j)] + 1,
             splits.test_targets_raw.at2(i, j), physical.at2(i, j)});
    products.outcomes.push_back(std::move(outcome));
  }
  return products;
}

}  // namespace

PreparedSplits prepare_splits(const data::RawDataset& raw,
                              const data::SplitPlan& plan, int target_index,
                              bool use_images) {
  PreparedSplits splits;
  if (target_index == 0)
    splits.target_columns = {0, 1, 2, 3, 4, 5};
  else
    splits.target_columns = {target_index - 1};

  // Preprocessing statistics fit on the train split only.
  if (use_images) {
    const Tensor train_raw = data::gather_rows(raw.images, plan.train_indices);
    const Tensor test_raw = data::gather_rows(raw.images, plan.test_indices);
    const auto means = data::fit_channel_means(train_raw);
    splits.train.images = data::prepare_images(train_raw, means);
    splits.test.images = data::prepare_images(test_raw, means);
  }

  const Tensor train_desc_raw = data::gather_rows(raw.descriptors, plan.train_indices);
  const Tensor test_desc_raw = data::gather_rows(raw.descriptors, plan.test_indices);
  data::StandardScaler desc_scaler;
  desc_scaler.fit(train_desc_raw);
  splits.train.descriptors = desc_scaler.transform(train_desc_raw);
  splits.test.descriptors = desc_scaler.transform(test_desc_raw);

  const Tensor all_targets_train = data::gather_rows(raw.targets, plan.train_indices);
  const Tensor all_targets_test = data::gather_rows(raw.targets, plan.test_indices);
  const int n_output = static_cast<int>(splits.target_columns.size());
  Tensor train_targets_raw({all_targets_train.dim(0), n_output});
  splits.test_targets_raw = Tensor({all_targets_test.dim(0), n_output});
  for (int i = 0; i < all_targets_train.dim(0); ++i)
    for (int j = 0; j < n_output; ++j)
      train_targets_raw.at2(i, j) =
          all_targets_train.at2(i, splits.target_columns[static_cast<std::size_t>(j)]);
  for (int i = 0; i < all_targets_test.dim(0); ++i)
    for (int j = 0; j < n_output; ++j)
      splits.test_targets_raw.at2(i, j) =
          all_targets_test.at2(i, splits.target_columns[static_cast<std::size_t>(j)]);
  splits.target_scaler.fit(train_targets_raw);
  splits.train.targets = splits.target_scaler.transform(train_targets_raw);
  splits.test.targets = splits.target_scaler.transform(splits.test_targets_raw);

  for (int idx : plan.test_indices)
    splits.test_sample_ids.push_back(raw.sample_ids[static_cast<std::size_t>(idx)]);
  return splits;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate_config(config);

  // Up-front checks: inputs readable, output writable, before any training.
  data::RawDataset raw = data::load_dataset(config.manifest_path);
  const bool use_images = needs_images(config.kinds);
  PretrainedBackbone backbone;
  if (use_images) {
    if (config.backbone_path.empty())
      throw std::invalid_argument(
          "experiment: image-bearing kinds need a backbone checkpoint");
    backbone = load_backbone(config.backbone_path);
    if (!backbone.frozen)
      throw std::invalid_argument("experiment: backbone checkpoint is not frozen");
    raw.images = data::resize_images(raw.images, backbone.spec.input_h,
                                     backbone.spec.input_w);
  }
  prepare_output_dir(config.output_dir);

  TrialInputs inputs;
  inputs.raw = &raw;
  inputs.backbone = &backbone;
  inputs.config = &config;
  inputs.use_images = use_images;
  if (config.target_index == 0)
    inputs.target_columns = {0, 1, 2, 3, 4, 5};
  else
    inputs.target_columns = {config.target_index - 1};

  // Trials are independent given their derived seeds, so they may run on
  // worker threads; outcome slots keep the report order deterministic.
  std::vector<TrialProducts> per_trial(static_cast<std::size_t>(config.trials));
  const int threads = std::max(1, std::min(config.threads, config.trials));
  if (threads == 1) {
    for (int t = 0; t < config.trials; ++t)
      per_trial[static_cast<std::size_t>(t)] = run_trial(inputs, t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&]() {
        for (int t = next.fetch_add(1); t < config.trials; t = next.fetch_add(1))
          per_trial[static_cast<std::size_t>(t)] = run_trial(inputs, t);
      });
    for (auto& th : pool) th.join();
  }

  ExperimentResult result;
  for (int c : inputs.target_columns) result.target_indices.push_back(c + 1);
  for (auto& products : per_trial) {
    for (auto& outcome : products.outcomes) result.outcomes.push_back(std::move(outcome));
    for (auto& record : products.predictions) result.predictions.push_back(record);
  }

  // Aggregate rows ordered by (target, kind).
  for (std::size_t j = 0; j < inputs.target_columns.size(); ++j) {
    for (ModelKind kind : config.kinds) {
      MetricsRow row;
      row.target_index = inputs.target_columns[j] + 1;
      row.kind = kind;
      row.trials = config.trials;
      std::vector<double> r2s, slopes;
      for (const TrialOutcome& outcome : result.outcomes) {
        if (outcome.kind != kind) continue;
        const FitResult& fit = outcome.per_target[j];
        if (!fit.valid) row.valid = false;
        r2s.push_back(fit.r2);
        slopes.push_back(fit.slope);
      }
      if (row.valid) {
        const Interval ci = confidence_interval(r2s);
        row.r2_mean = ci.mean;
        row.r2_ci_halfwidth = ci.halfwidth;
        double slope_sum = 0.0;
        for (double s : slopes) slope_sum += s;
        row.slope_mean = slope_sum / static_cast<double>(slopes.size());
      } else {
        row.r2_mean = row.r2_ci_halfwidth = row.slope_mean =
            std::numeric_limits<double>::quiet_NaN();
      }
      result.metrics.push_back(row);
    }
  }

  write_metrics_csv(result.metrics, (fs::path(config.output_dir) / "metrics.csv").string());
  write_loss_curves_csv(result.outcomes,
                        (fs::path(config.output_dir) / "loss_curves.csv").string());
  write_predictions_csv(result.predictions,
                        (fs::path(config.output_dir) / "predictions.csv").string());
  render_experiment_plots(result.outcomes, result.predictions, config.output_dir);
  return result;
}

SingleRunResult run_single(const ExperimentConfig& config) {
  if (config.kinds.empty())
    throw std::invalid_argument("train: no model kind selected");
  if (config.target_index < 0 || config.target_index > 6)
    throw std::invalid_argument("train: target_index must be 0 (all) or 1..6");
  const ModelKind kind = config.kinds.front();

  data::RawDataset raw = data::load_dataset(config.manifest_path);
  const bool use_images = kind != ModelKind::kStatsOnly;
  PretrainedBackbone backbone;
  if (use_images) {
    if (config.backbone_path.empty())
      throw std::invalid_argument("train: this model kind needs a backbone checkpoint");
    backbone = load_backbone(config.backbone_path);
    raw.images = data::resize_images(raw.images, backbone.spec.input_h,
                                     backbone.spec.input_w);
  }
  prepare_output_dir(config.output_dir);

  const data::SplitPlan plan = data::split(raw.size(), config.train.seed);
  const PreparedSplits splits =
      prepare_splits(raw, plan, config.target_index, use_images);
  const int n_output = static_cast<int>(splits.target_columns.size());

  DMTLRModel model = build_kind(kind, backbone, n_output,
                                derive_seed(config.train.seed, 100));
  TrainConfig tc = config.train;
  tc.n_output = n_output;

  SingleRunResult result;
  result.report = train(model, splits.train, splits.test, tc);

  const Tensor physical =
      splits.target_scaler.inverse_transform(result.report.final_test_predictions);
  std::vector<TrialOutcome> outcomes(1);
  outcomes[0].trial = 0;
  outcomes[0].kind = kind;
  outcomes[0].report = result.report;
  std::vector<PredictionRecord> predictions;
  const int n_test = physical.dim(0);
  for (int j = 0; j < n_output; ++j) {
    std::vector<double> truth(static_cast<std::size_t>(n_test));
    std::vector<double> predicted(static_cast<std::size_t>(n_test));
    for (int i = 0; i < n_test; ++i) {
      truth[static_cast<std::size_t>(i)] = splits.test_targets_raw.at2(i, j);
      predicted[static_cast<std::size_t>(i)] = physical.at2(i, j);
    }
    const FitResult fit = r_squared(truth, predicted);
    MetricsRow row;
    row.target_index = splits.target_columns[static_cast<std::size_t>(j)] + 1;
    row.kind = kind;
    row.trials = 1;
    row.valid = fit.valid;
    row.r2_mean = fit.valid ? fit.r2 : std::numeric_limits<double>::quiet_NaN();
    row.slope_mean = fit.valid ? fit.slope : std::numeric_limits<double>::quiet_NaN();
    row.r2_ci_halfwidth = fit.valid ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    result.metrics.push_back(row);
    for (int i = 0; i < n_test; ++i)
      predictions.push_back({kind, 0, splits.test_sample_ids[static_cast<std::size_t>(i)],
                             row.target_index, truth[static_cast<std::size_t>(i)],
                             predicted[static_cast<std::size_t>(i)]});
  }

  const fs::path out(config.output_dir);
  write_metrics_csv(result.metrics, (out / "metrics.csv").string());
  write_loss_curves_csv(outcomes, (out / "loss_curves.csv").string());
  write_predictions_csv(predictions, (out / "predictions.csv").string());
  save_model(model, (out / "model.ckpt").string());
  render_experiment_plots(outcomes, predictions, config.output_dir);
  return result;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "target_index,kind,r2_mean,r2_ci_halfwidth,slope_mean,trials\n";
  for (const MetricsRow& row : rows) {
    os << row.target_index << ',' << to_string(row.kind) << ',' << fmt(row.r2_mean)
       << ',' << fmt(row.r2_ci_halfwidth) << ',' << fmt(row.slope_mean) << ','
       << row.trials << "\n";
  }
}

void write_loss_curves_csv(const std::vector<TrialOutcome>& outcomes,
                           const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "kind,trial,epoch,train_loss,test_loss\n";
  // kind-major, then trial, then epoch
  std::vector<const TrialOutcome*> ordered;
  for (const auto& outcome : outcomes) ordered.push_back(&outcome);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const TrialOutcome* a, const TrialOutcome* b) {
                     if (a->kind != b->kind) return a->kind < b->kind;
                     return a->trial < b->trial;
                   });
  for (const TrialOutcome* outcome : ordered)
    for (std::size_t e = 0; e < outcome->report.train_loss.size(); ++e)
      os << to_string(outcome->kind) << ',' << outcome->trial << ',' << e << ','
         << fmt(outcome->report.train_loss[e]) << ','
         << fmt(outcome->report.test_loss[e]) << "\n";
}

void write_predictions_csv(const std::vector<PredictionRecord>& records,
                           const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "kind,trial,sample_id,target_index,true_value,predicted_value\n";
  for (const PredictionRecord& r : records)
    os << to_string(r.kind) << ',' << r.trial << ',' << r.sample_id << ','
       << r.target_index << ',' << fmt(r.truth) << ',' << fmt(r.predicted) << "\n";
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

std::vector<TrialOutcome> read_loss_curves_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != "kind,trial,epoch,train_loss,test_loss")
    throw std::runtime_error(path + ": unexpected loss_curves header");
  std::map<std::pair<std::string, int>, TrialOutcome> grouped;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != 5) throw std::runtime_error(path + ": malformed row");
    const auto key = std::make_pair(fields[0], std::stoi(fields[1]));
    TrialOutcome& outcome = grouped[key];
    outcome.kind = model_kind_from_string(fields[0]);
    outcome.trial = key.second;
    outcome.report.train_loss.push_back(std::stod(fields[3]));
    outcome.report.test_loss.push_back(std::stod(fields[4]));
  }
  std::vector<TrialOutcome> outcomes;
  for (auto& [key, outcome] : grouped) outcomes.push_back(std::move(outcome));
  return outcomes;
}

std::vector<PredictionRecord> read_predictions_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) ||
      line != "kind,trial,sample_id,target_index,true_value,predicted_value")
    throw std::runtime_error(path + ": unexpected predictions header");
  std::vector<PredictionRecord> records;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != 6) throw std::runtime_error(path + ": malformed row");
    records.push_back({model_kind_from_string(fields[0]), std::stoi(fields[1]),
                       std::stoll(fields[2]), std::stoi(fields[3]),
                       std::stod(fields[4]), std::stod(fields[5])});
  }
  return records;
}

void render_experiment_plots(const std::vector<TrialOutcome>& outcomes,
                             const std::vector<PredictionRecord>& predictions,
                             const std::string& output_dir) {
  const fs::path plots = fs::path(output_dir) / "plots";
  std::error_code ec;
  fs::create_directories(plots, ec);

  // Loss curves per kind: blue = train, red = test, one pair per trial.
  std::map<ModelKind, std::vector<const TrialOutcome*>> by_kind;
  for (const auto& outcome : outcomes) by_kind[outcome.kind].push_back(&outcome);
  for (const auto& [kind, list] : by_kind) {
    std::vector<plot::Series> series;
    for (const TrialOutcome* outcome : list) {
      plot::Series train_series, test_series;
      train_series.color = plot::kBlue;
      test_series.color = plot::kRed;
      for (std::size_t e = 0; e < outcome->report.train_loss.size(); ++e) {
        train_series.x.push_back(static_cast<double>(e));
        train_series.y.push_back(outcome->report.train_loss[e]);
        test_series.x.push_back(static_cast<double>(e));
        test_series.y.push_back(outcome->report.test_loss[e]);
      }
      series.push_back(std::move(train_series));
      series.push_back(std::move(test_series));
    }
    plot::save_chart(series, 480, 320,
                     (plots / ("loss_" + to_string(kind))).string());
  }

  // True-vs-predicted scatter per (kind, target) with the identity line.
  std::map<std::pair<ModelKind, int>, plot::Series> scatter;
  std::map<std::pair<ModelKind, int>, std::pair<double, double>> bounds;
  for (const PredictionRecord& r : predictions) {
    const auto key = std::make_pair(r.kind, r.target_index);
    auto& series = scatter[key];
    series.lines = false;
    series.marker_radius = 1;
    series.color = plot::kBlue;
    series.x.push_back(r.truth);
    series.y.push_back(r.predicted);
    auto& [lo, hi] = bounds.try_emplace(key, r.truth, r.truth).first->second;
    lo = std::min({lo, r.truth, r.predicted});
    hi = std::max({hi, r.truth, r.predicted});
  }
  for (auto& [key, series] : scatter) {
    const auto [lo, hi] = bounds[key];
    plot::Series identity;
    identity.color = plot::kGray;
    identity.x = {lo, hi};
    identity.y = {lo, hi};
    plot::save_chart({identity, series}, 360, 360,
                     (plots / ("scatter_" + to_string(key.first) + "_t" +
                               std::to_string(key.second)))
                         .string());
  }
}

}  // namespace dmtlr::eval
