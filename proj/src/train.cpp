#include "mrpd/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <thread>

#include "mrpd/optim.hpp"

namespace mrpd {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / double(v.size() - 1))};
}

}  // namespace

std::vector<EpochLog> train(FusionModel<float>& model, std::span<const SampleWindow> train_set, const Normalization& norm,
                            const TrainOptions& options, std::span<const SampleWindow> val_set,
                            const EpochCallback& on_epoch) {
  if (train_set.empty()) throw ValidationError("train: empty training set");
  if (options.epochs < 1 || options.batch_size < 1) throw ValidationError("train: epochs and batch size must be positive");
  const auto& cfg = model.config();
  const auto params = model.parameters();
  for (const auto& p : params) p.tensor.node()->requires_grad = true;
  Adam<float> adam(AdamOptions{options.lr});
  Rng rng(options.seed);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochLog> curve;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += std::size_t(options.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + std::size_t(options.batch_size));
      std::vector<const SampleWindow*> ptrs;
      for (std::size_t i = begin; i < end; ++i) ptrs.push_back(&train_set[order[i]]);
      const auto batch = make_batch<float>(std::span<const SampleWindow* const>(ptrs), cfg, norm, model.modalities());
      const auto loss = softmax_cross_entropy(model.forward(batch, true, rng), batch.labels);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        Tape<float>::current().clear();
        throw DivergedTrainingError(epoch, batches + 1);
      }
      backward(loss);
      adam.step(params);
      loss_sum += value;
      ++batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / batches;
    if (!val_set.empty()) log.val_accuracy = evaluate(model, val_set, norm).metrics.accuracy;
    log.seconds = seconds_since(t0);
    curve.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return curve;
}

std::vector<Region> predict_labels(const FusionModel<float>& model, std::span<const SampleWindow> windows,
                                   const Normalization& norm, int batch_size) {
  std::vector<Region> out;
  out.reserve(windows.size());
  for (std::size_t begin = 0; begin < windows.size(); begin += std::size_t(batch_size)) {
    const std::size_t end = std::min(windows.size(), begin + std::size_t(batch_size));
    const auto batch = make_batch<float>(windows.subspan(begin, end - begin), model.config(), norm, model.modalities());
    const auto logits = model.predict(batch);
    const auto m = logits.matrix();
    for (Index b = 0; b < m.rows(); ++b) {
      Index best = 0;
      m.row(b).maxCoeff(&best);
      out.push_back(region_from_index(int(best)));
    }
  }
  return out;
}

Evaluation evaluate(const FusionModel<float>& model, std::span<const SampleWindow> windows, const Normalization& norm) {
  if (windows.empty()) throw ValidationError("evaluate: no windows");
  const auto predicted = predict_labels(model, windows, norm);
  std::vector<Region> actual;
  actual.reserve(windows.size());
  for (const auto& w : windows) actual.push_back(w.label);
  Evaluation e;
  e.confusion = confusion_matrix(actual, predicted);
  e.metrics = classification_metrics(e.confusion);
  e.columns = collapse_columns(e.confusion);
  return e;
}

std::vector<SampleWindow> select(std::span<const SampleWindow> windows, std::span<const std::size_t> indices) {
  std::vector<SampleWindow> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    if (i >= windows.size()) throw ValidationError("select: index " + std::to_string(i) + " out of range");
    out.push_back(windows[i]);
  }
  return out;
}

CrossValidation cross_validate(const ModelConfig& config, ModalitySet modalities, std::span<const SampleWindow> windows,
                               std::span<const Fold> folds, const Normalization& norm, const TrainOptions& options,
                               int jobs) {
  if (folds.empty()) throw ValidationError("cross-validation: no folds");
  CrossValidation cv;
  cv.folds.resize(folds.size());
  auto run = [&](std::size_t f) {
    const auto train_set = select(windows, folds[f].train);
    const auto val_set = select(windows, folds[f].validation);
    FusionModel<float> model(config, modalities);
    auto opt = options;
    opt.seed = options.seed + f;
    auto& out = cv.folds[f];
    out.fold = int(f);
    out.train_size = train_set.size();
    out.validation_size = val_set.size();
    out.curve = train(model, train_set, norm, opt);
    out.evaluation = evaluate(model, val_set, norm);
  };

  const int workers = std::clamp(jobs, 1, int(folds.size()));
  if (workers == 1) {
    for (std::size_t f = 0; f < folds.size(); ++f) run(f);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(folds.size());
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t f; (f = next++) < folds.size();) {
          try {
            run(f);
          } catch (...) {
            errors[f] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<double> acc, f1;
  for (const auto& f : cv.folds) {
    acc.push_back(f.evaluation.metrics.accuracy);
    f1.push_back(f.evaluation.metrics.macro_f1);
  }
  std::tie(cv.mean_accuracy, cv.sd_accuracy) = mean_sd(acc);
  std::tie(cv.mean_f1, cv.sd_f1) = mean_sd(f1);
  return cv;
}

std::vector<ComparisonRow> compare_models(const ModelConfig& config, std::span<const SampleWindow> windows,
                                          const Split& split, const Normalization& norm, const TrainOptions& options,
                                          const std::function<void(const std::string&, const Evaluation&)>& on_model) {
  const auto train_set = select(windows, split.train);
  const auto test_set = select(windows, split.test);
  const std::pair<const char*, ModalitySet> variants[] = {{"face", ModalitySet::only(Modality::Face)},
                                                          {"imu", ModalitySet::only(Modality::Motion)},
                                                          {"depth", ModalitySet::only(Modality::Depth)},
                                                          {"fusion", ModalitySet::all()}};
  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < std::size(variants); ++i) {
    FusionModel<float> model(config, variants[i].second);
    train(model, train_set, norm, options);
    const auto e = evaluate(model, test_set, norm);
    if (on_model) on_model(variants[i].first, e);
    rows.push_back({variants[i].first, e.metrics, kPaperTable3[i]});
  }
  return rows;
}

void write_loss_curve_csv(std::ostream& out, std::span<const EpochLog> curve) {
  out << std::setprecision(8) << "epoch,train_loss,val_accuracy,seconds\n";
  for (const auto& e : curve) {
    out << e.epoch << ',' << e.train_loss << ',';
    if (!std::isnan(e.val_accuracy)) out << e.val_accuracy;
    out << ',' << e.seconds << '\n';
  }
}

void write_cv_csv(std::ostream& out, const CrossValidation& cv) {
  out << std::setprecision(6) << "fold,train,validation,accuracy,macro_precision,macro_recall,macro_f1\n";
  for (const auto& f : cv.folds) {
    const auto& m = f.evaluation.metrics;
    out << f.fold << ',' << f.train_size << ',' << f.validation_size << ',' << m.accuracy << ',' << m.macro_precision
        << ',' << m.macro_recall << ',' << m.macro_f1 << '\n';
  }
  out << "mean,,," << cv.mean_accuracy << ",,," << cv.mean_f1 << '\n';
  out << "sd,,," << cv.sd_accuracy << ",,," << cv.sd_f1 << '\n';
}

void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows) {
  out << std::setprecision(4)
      << "model,accuracy,f1,precision,recall,paper_accuracy,paper_f1,paper_precision,paper_recall\n";
  for (const auto& r : rows)
    out << r.model << ',' << r.metrics.accuracy << ',' << r.metrics.macro_f1 << ',' << r.metrics.macro_precision << ','
        << r.metrics.macro_recall << ',' << r.paper.accuracy << ',' << r.paper.f1 << ',' << r.paper.precision << ','
        << r.paper.recall << '\n';
}

}  // namespace mrpd
