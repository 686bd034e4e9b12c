#include "mrpd/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace mrpd {

ConfusionMatrix confusion_matrix(std::span<const Region> actual, std::span<const Region> predicted) {
  if (actual.size() != predicted.size())
    throw DimensionError("confusion matrix: " + std::to_string(actual.size()) + " labels vs " +
                         std::to_string(predicted.size()) + " predictions");
  ConfusionMatrix cm = ConfusionMatrix::Zero(kNumRegions, kNumRegions);
  for (std::size_t i = 0; i < actual.size(); ++i) ++cm(region_index(actual[i]), region_index(predicted[i]));
  return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
  if (cm.rows() != cm.cols() || cm.rows() == 0) throw ValidationError("confusion matrix must be square and nonempty");
  if ((cm.array() < 0).any()) throw ValidationError("confusion matrix has negative counts");
  ClassificationMetrics m;
  m.total = cm.sum();
  if (m.total == 0) throw ValidationError("confusion matrix is empty");
  const auto k = cm.rows();
  m.accuracy = double(cm.trace()) / double(m.total);
  for (Eigen::Index c = 0; c < k; ++c) {
    const long long tp = cm(c, c), predicted = cm.col(c).sum(), actual = cm.row(c).sum();
    double p = 0.0, r = 0.0;
    if (predicted > 0)
      p = double(tp) / double(predicted);
    else
      m.undefined_precision.push_back(int(c));
    if (actual > 0)
      r = double(tp) / double(actual);
    else
      m.undefined_recall.push_back(int(c));
    m.precision.push_back(p);
    m.recall.push_back(r);
    m.f1.push_back(p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0);
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    m.macro_precision += m.precision[std::size_t(c)];
    m.macro_recall += m.recall[std::size_t(c)];
    m.macro_f1 += m.f1[std::size_t(c)];
  }
  m.macro_precision /= double(k);
  m.macro_recall /= double(k);
  m.macro_f1 /= double(k);
  return m;
}

ColumnCollapse collapse_columns(const ConfusionMatrix& cm) {
  if (cm.rows() != kNumRegions || cm.cols() != kNumRegions) throw DimensionError("column collapse needs a 9×9 matrix");
  ColumnCollapse out;
  out.counts = ConfusionMatrix::Zero(3, 3);
  for (Eigen::Index a = 0; a < kNumRegions; ++a)
    for (Eigen::Index p = 0; p < kNumRegions; ++p) out.counts(a % 3, p % 3) += cm(a, p);
  const double total = double(out.counts.sum());
  if (total > 0) {
    for (Eigen::Index c = 0; c < 3; ++c) {
      const long long tp = out.counts(c, c);
      const long long fp = out.counts.col(c).sum() - tp, fn = out.counts.row(c).sum() - tp;
      out.accuracy[std::size_t(c)] = (total - double(fp + fn)) / total;
    }
    out.overall_accuracy = double(out.counts.trace()) / total;
  }
  return out;
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
  const bool regions = cm.rows() == kNumRegions;
  auto name = [&](Eigen::Index i) { return regions ? std::string(region_name(region_from_index(int(i)))) : std::to_string(i); };
  out << "actual\\predicted";
  for (Eigen::Index c = 0; c < cm.cols(); ++c) out << ',' << name(c);
  out << '\n';
  for (Eigen::Index r = 0; r < cm.rows(); ++r) {
    out << name(r);
    for (Eigen::Index c = 0; c < cm.cols(); ++c) out << ',' << cm(r, c);
    out << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const ClassificationMetrics& m, const PaperScores* paper) {
  const bool regions = m.precision.size() == std::size_t(kNumRegions);
  out << std::setprecision(6);
  out << "class,precision,recall,f1,precision_undefined,recall_undefined\n";
  auto flagged = [](const std::vector<int>& v, int c) { return std::find(v.begin(), v.end(), c) != v.end() ? 1 : 0; };
  for (std::size_t c = 0; c < m.precision.size(); ++c) {
    out << (regions ? std::string(region_name(region_from_index(int(c)))) : std::to_string(c)) << ',' << m.precision[c]
        << ',' << m.recall[c] << ',' << m.f1[c] << ',' << flagged(m.undefined_precision, int(c)) << ','
        << flagged(m.undefined_recall, int(c)) << '\n';
  }
  out << "\nmetric,value" << (paper ? ",paper" : "") << '\n';
  out << "accuracy," << m.accuracy;
  if (paper) out << ',' << paper->accuracy;
  out << "\nmacro_precision," << m.macro_precision;
  if (paper) out << ',' << paper->precision;
  out << "\nmacro_recall," << m.macro_recall;
  if (paper) out << ',' << paper->recall;
  out << "\nmacro_f1," << m.macro_f1;
  if (paper) out << ',' << paper->f1;
  out << "\ntotal," << m.total << (paper ? "," : "") << '\n';
}

ImageF confusion_heatmap(const ConfusionMatrix& cm, int cell) {
  if (cell < 1) throw ValidationError("heatmap cell size must be positive");
  ImageF img = ImageF::Zero(cm.rows() * cell, cm.cols() * cell);
  for (Eigen::Index r = 0; r < cm.rows(); ++r) {
    const double row = double(cm.row(r).sum());
    for (Eigen::Index c = 0; c < cm.cols(); ++c) {
      const float v = row > 0 ? float(255.0 * double(cm(r, c)) / row) : 0.f;
      img.block(r * cell, c * cell, cell, cell).setConstant(v);
    }
  }
  return img;
}

}  // namespace mrpd
