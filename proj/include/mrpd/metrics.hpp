#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mrpd/data.hpp"

namespace mrpd {

/// Counts with rows = actual class, columns = predicted class.
using ConfusionMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

ConfusionMatrix confusion_matrix(std::span<const Region> actual, std::span<const Region> predicted);

/// One-vs-rest scores averaged without weighting. A class whose precision (recall) denominator is zero scores 0
/// and is listed in `undefined_precision` (`undefined_recall`).
struct ClassificationMetrics {
  double accuracy = 0;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  std::vector<double> precision, recall, f1;
  std::vector<int> undefined_precision, undefined_recall;
  long long total = 0;
};

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

/// Shelf-column view (Left, Center, Right) of a 9-class matrix: 3×3 blocks summed, with one-vs-rest accuracy
/// (TP + TN) / total per column.
struct ColumnCollapse {
  ConfusionMatrix counts;  // 3×3
  std::array<double, 3> accuracy{};
  double overall_accuracy = 0;
};

ColumnCollapse collapse_columns(const ConfusionMatrix& cm);

/// Reference values quoted by the paper, reported beside our measurements.
struct PaperScores {
  const char* model;
  double accuracy, f1, precision, recall;
};
inline constexpr std::array<PaperScores, 4> kPaperTable3 = {{
    {"face", 0.91, 0.59, 0.60, 0.59},
    {"imu", 0.93, 0.66, 0.66, 0.68},
    {"depth", 0.92, 0.64, 0.65, 0.64},
    {"fusion", 0.93, 0.69, 0.69, 0.69},
}};
inline constexpr std::array<double, 3> kPaperColumnAccuracy = {0.9715, 0.9660, 0.9347};

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm);
/// Per-class rows plus a macro row; `paper` (optional) adds a reference column.
void write_metrics_csv(std::ostream& out, const ClassificationMetrics& m, const PaperScores* paper = nullptr);

/// Row-normalized heatmap in [0, 255], `cell` pixels per entry.
ImageF confusion_heatmap(const ConfusionMatrix& cm, int cell = 16);

}  // namespace mrpd
