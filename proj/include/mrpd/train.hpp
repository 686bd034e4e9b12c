#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mrpd/metrics.hpp"
#include "mrpd/model.hpp"

namespace mrpd {

struct TrainOptions {
  int epochs = 30;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;  // minibatch order and dropout masks
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;  // mean over the epoch's minibatches
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Minibatch Adam on softmax cross-entropy with dropout active. Throws DivergedTrainingError on a non-finite loss.
std::vector<EpochLog> train(FusionModel<float>& model, std::span<const SampleWindow> train_set, const Normalization& norm,
                            const TrainOptions& options, std::span<const SampleWindow> val_set = {},
                            const EpochCallback& on_epoch = {});

/// Argmax predictions in evaluation mode.
std::vector<Region> predict_labels(const FusionModel<float>& model, std::span<const SampleWindow> windows,
                                   const Normalization& norm, int batch_size = 64);

struct Evaluation {
  ConfusionMatrix confusion;
  ClassificationMetrics metrics;
  ColumnCollapse columns;
};

Evaluation evaluate(const FusionModel<float>& model, std::span<const SampleWindow> windows, const Normalization& norm);

/// Windows picked out by index.
std::vector<SampleWindow> select(std::span<const SampleWindow> windows, std::span<const std::size_t> indices);

struct FoldResult {
  int fold = 0;
  std::size_t train_size = 0, validation_size = 0;
  Evaluation evaluation;
  std::vector<EpochLog> curve;
};

struct CrossValidation {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0, sd_accuracy = 0;
  double mean_f1 = 0, sd_f1 = 0;
};

/// Trains one fresh model per fold (fold i uses seed options.seed + i) and evaluates it on the fold's validation set.
/// Folds run on up to `jobs` threads; results do not depend on `jobs`.
CrossValidation cross_validate(const ModelConfig& config, ModalitySet modalities, std::span<const SampleWindow> windows,
                               std::span<const Fold> folds, const Normalization& norm, const TrainOptions& options,
                               int jobs = 1);

struct ComparisonRow {
  std::string model;  // face, imu, depth, fusion
  ClassificationMetrics metrics;
  PaperScores paper;
};

/// The three unimodal models and the fusion model trained and tested on the same split with the same seeds.
std::vector<ComparisonRow> compare_models(const ModelConfig& config, std::span<const SampleWindow> windows,
                                          const Split& split, const Normalization& norm, const TrainOptions& options,
                                          const std::function<void(const std::string&, const Evaluation&)>& on_model = {});

void write_loss_curve_csv(std::ostream& out, std::span<const EpochLog> curve);
void write_cv_csv(std::ostream& out, const CrossValidation& cv);
/// Table-3 layout: model, accuracy, f1, precision, recall, then the paper's values.
void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows);

}  // namespace mrpd
