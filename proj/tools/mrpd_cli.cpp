// mrpd — command-line front end: dataset generation, training, evaluation, statistics and latency replay.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "mrpd/checkpoint.hpp"
#include "mrpd/dataset_io.hpp"
#include "mrpd/gradcheck.hpp"
#include "mrpd/image_io.hpp"
#include "mrpd/replay.hpp"
#include "mrpd/stats.hpp"
#include "mrpd/synth.hpp"
#include "mrpd/train.hpp"

using namespace mrpd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailedCheck = 1;
constexpr int kExitUsage = 2;

/// A well-formed command that cannot run as given (wrong shapes, unknown ids, ...).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  if (const char* s = std::getenv("MRPD_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw UsageError(std::string("MRPD_SEED is not an unsigned integer: '") + s + "'");
    }
  }
  return 1;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  fn(out);
}

ModelConfig load_config(const std::string& path, const ModelConfig& fallback) {
  return path.empty() ? fallback : ModelConfig::from_json(read_text(path));
}

ModalitySet parse_modalities(const std::string& text) {
  if (text == "all" || text == "fusion") return ModalitySet::all();
  ModalitySet m{false, false, false};
  std::stringstream ss(text);
  for (std::string tag; std::getline(ss, tag, '+');) {
    try {
      switch (parse_modality(tag)) {
        case Modality::Face: m.face = true; break;
        case Modality::Motion: m.motion = true; break;
        case Modality::Depth: m.depth = true; break;
      }
    } catch (const std::exception&) {
      throw UsageError("unknown modality '" + tag + "' (use face, imu, depth, a '+' combination, or all)");
    }
  }
  return m;
}

std::string modalities_string(ModalitySet m) {
  if (m == ModalitySet::all()) return "all";
  std::string s;
  auto add = [&](bool on, const char* tag) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += tag;
  };
  add(m.face, "face");
  add(m.motion, "imu");
  add(m.depth, "depth");
  return s;
}

WindowSpec spec_for(const ModelConfig& cfg) {
  WindowSpec spec;
  spec.face_frames = cfg.face_frames;
  spec.depth_frames = cfg.depth_frames;
  spec.motion_frames = cfg.motion_frames;
  spec.depth_h = cfg.depth_h;
  spec.depth_w = cfg.depth_w;
  return spec;
}

void check_depth_size(const DatasetManifest& m, const ModelConfig& cfg) {
  if (m.depth_h != cfg.depth_h || m.depth_w != cfg.depth_w)
    throw UsageError("dataset depth frames are " + std::to_string(m.depth_h) + "x" + std::to_string(m.depth_w) +
                     ", model config expects " + std::to_string(cfg.depth_h) + "x" + std::to_string(cfg.depth_w));
}

json normalization_json(const Normalization& n) { return {{"imu_mean", n.imu_mean}, {"imu_sd", n.imu_sd}}; }

Normalization normalization_from(const json& j) {
  Normalization n;
  n.imu_mean = j.at("imu_mean").get<decltype(n.imu_mean)>();
  n.imu_sd = j.at("imu_sd").get<decltype(n.imu_sd)>();
  return n;
}

json train_options_json(const TrainOptions& o) {
  return {{"epochs", o.epochs}, {"batch_size", o.batch_size}, {"lr", o.lr}, {"seed", o.seed}};
}

/// Records how an output directory was produced.
void write_snapshot(const fs::path& dir, const std::string& command, json args) {
  json j = {{"command", command}, {"args", std::move(args)}};
  write_text(dir / "run.json", j.dump(2) + "\n");
}

struct LoadedModel {
  FusionModel<float> model;
  Normalization norm;
};

fs::path checkpoint_path(const fs::path& p) { return fs::is_directory(p) ? p / "model.ckpt" : p; }

LoadedModel load_model(const fs::path& given) {
  const auto ckpt = checkpoint_path(given);
  auto meta_path = ckpt;
  meta_path.replace_extension(".json");
  if (!fs::exists(ckpt)) throw UsageError("no checkpoint at " + ckpt.string());
  if (!fs::exists(meta_path)) throw UsageError("checkpoint " + ckpt.string() + " has no " + meta_path.string());
  const auto meta = json::parse(read_text(meta_path));
  const auto cfg = ModelConfig::from_json(meta.at("config").dump());
  LoadedModel out{FusionModel<float>(cfg, parse_modalities(meta.at("modalities").get<std::string>())),
                  normalization_from(meta.at("normalization"))};
  checkpoint::assign(out.model.parameters(), checkpoint::load(ckpt));
  return out;
}

void save_model(const fs::path& dir, const FusionModel<float>& model, const Normalization& norm, json extra) {
  checkpoint::save(dir / "model.ckpt", checkpoint::to_entries(model.parameters()));
  json meta = {{"config", json::parse(model.config().to_json())},
               {"modalities", modalities_string(model.modalities())},
               {"normalization", normalization_json(norm)}};
  meta.update(extra);
  write_text(dir / "model.json", meta.dump(2) + "\n");
}

/// Held-out indices, or every recording when the set was too small to split.
std::vector<std::size_t> test_indices(const DatasetManifest& m) {
  if (!m.split.test.empty()) return m.split.test;
  std::vector<std::size_t> all(m.recordings.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

std::vector<std::size_t> train_indices(const DatasetManifest& m) {
  if (!m.split.train.empty()) return m.split.train;
  return test_indices(m);
}

void print_metrics(const std::string& title, const Evaluation& e) {
  const auto& m = e.metrics;
  std::cout << std::fixed << std::setprecision(4) << title << ": accuracy " << m.accuracy << ", macro F1 "
            << m.macro_f1 << ", precision " << m.macro_precision << ", recall " << m.macro_recall << " (n=" << m.total
            << ")\n";
}

void write_evaluation(const fs::path& dir, const Evaluation& e, const PaperScores* paper) {
  write_file(dir / "metrics.csv", [&](std::ostream& o) { write_metrics_csv(o, e.metrics, paper); });
  write_file(dir / "confusion.csv", [&](std::ostream& o) { write_confusion_csv(o, e.confusion); });
  write_pgm(dir / "confusion.pgm", confusion_heatmap(e.confusion));
  write_file(dir / "columns.csv", [&](std::ostream& o) {
    o << "column,accuracy,paper_accuracy\n";
    const char* names[] = {"left", "center", "right"};
    for (int c = 0; c < 3; ++c) o << names[c] << ',' << e.columns.accuracy[std::size_t(c)] << ',' << kPaperColumnAccuracy[std::size_t(c)] << '\n';
    o << "overall," << e.columns.overall_accuracy << ",\n";
  });
}

const PaperScores* paper_row(ModalitySet m) {
  if (m == ModalitySet::all()) return &kPaperTable3[3];
  if (m == ModalitySet::only(Modality::Face)) return &kPaperTable3[0];
  if (m == ModalitySet::only(Modality::Motion)) return &kPaperTable3[1];
  if (m == ModalitySet::only(Modality::Depth)) return &kPaperTable3[2];
  return nullptr;
}

TrainOptions train_options(int epochs, int batch, double lr, std::uint64_t seed) {
  TrainOptions o;
  o.epochs = epochs;
  o.batch_size = batch;
  o.lr = lr;
  o.seed = seed;
  return o;
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenArgs {
  std::string out;
  int per_region = 171;
  std::uint64_t seed = 0;
  bool full_size = false;
  bool stratified = false;
  int folds = 10;
  std::string params;
};

int run_gen(const GenArgs& a) {
  auto params = a.params.empty() ? (a.full_size ? GeneratorParams::full_size() : GeneratorParams::defaults())
                                 : GeneratorParams::from_json(read_text(a.params));
  if (a.per_region < 1) throw UsageError("--per-region must be at least 1");
  DatasetOptions opts;
  opts.seed = a.seed;
  opts.stratified = a.stratified;
  opts.folds = a.folds;
  opts.generator = params.to_json();
  DatasetWriter writer(a.out, opts);
  generate_dataset(params, a.per_region, a.seed, [&](MotionRecording&& r) { writer.add(r); });
  const auto m = writer.finish();
  std::cout << "wrote " << m.recordings.size() << " recordings (" << m.depth_h << "x" << m.depth_w << " depth) to "
            << a.out << "; split " << m.split.train.size() << "/" << m.split.test.size() << ", " << m.folds.size()
            << " folds\n";
  return 0;
}

struct TrainArgs {
  std::string data, config, out, modality = "all";
  int epochs = 30, batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a) {
  const auto cfg = load_config(a.config, ModelConfig::desk());
  const auto mods = parse_modalities(a.modality);
  const auto manifest = read_manifest(a.data);
  check_depth_size(manifest, cfg);
  const auto windows = read_windows(a.data, manifest, spec_for(cfg));
  const auto train_set = select(windows, train_indices(manifest));
  const auto test_set = select(windows, test_indices(manifest));
  const auto opts = train_options(a.epochs, a.batch, a.lr, a.seed);

  fs::create_directories(a.out);
  FusionModel<float> model(cfg, mods);
  std::cout << "training " << modalities_string(mods) << " on " << train_set.size() << ", validating on "
            << test_set.size() << "\n";
  const auto curve = train(model, train_set, manifest.normalization, opts, test_set, [](const EpochLog& e) {
    std::cout << std::fixed << std::setprecision(4) << "epoch " << std::setw(3) << e.epoch << "  loss " << e.train_loss
              << "  held-out accuracy " << e.val_accuracy << "  (" << std::setprecision(1) << e.seconds << " s)\n";
  });
  const auto eval = evaluate(model, test_set, manifest.normalization);
  print_metrics("held-out", eval);

  save_model(a.out, model, manifest.normalization,
             {{"data", fs::absolute(a.data).string()}, {"train", train_options_json(opts)}});
  write_file(fs::path(a.out) / "loss_curve.csv", [&](std::ostream& o) { write_loss_curve_csv(o, curve); });
  write_evaluation(a.out, eval, paper_row(mods));
  write_snapshot(a.out, "train",
                 {{"data", a.data}, {"config", json::parse(cfg.to_json())}, {"modality", a.modality},
                  {"options", train_options_json(opts)}});
  return 0;
}

struct XvalArgs {
  std::string data, config, out, modality = "all";
  int k = 10, epochs = 30, batch = 32, jobs = 1;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

int run_xval(const XvalArgs& a) {
  const auto cfg = load_config(a.config, ModelConfig::desk());
  const auto mods = parse_modalities(a.modality);
  const auto manifest = read_manifest(a.data);
  check_depth_size(manifest, cfg);
  if (a.k < 2) throw UsageError("--k must be at least 2");
  const auto train_idx = train_indices(manifest);
  if (std::size_t(a.k) > train_idx.size()) throw UsageError("--k exceeds the number of training recordings");
  // Folds recorded in the manifest are reused when their count matches.
  const auto folds = int(manifest.folds.size()) == a.k ? manifest.folds : kfold(train_idx, a.k, manifest.seed + 1);
  const auto windows = read_windows(a.data, manifest, spec_for(cfg));
  const auto opts = train_options(a.epochs, a.batch, a.lr, a.seed);
  const auto cv = cross_validate(cfg, mods, windows, folds, manifest.normalization, opts, a.jobs);
  for (const auto& f : cv.folds)
    std::cout << std::fixed << std::setprecision(4) << "fold " << f.fold << ": accuracy "
              << f.evaluation.metrics.accuracy << ", macro F1 " << f.evaluation.metrics.macro_f1 << "\n";
  std::cout << "mean accuracy " << cv.mean_accuracy << " ± " << cv.sd_accuracy << ", mean macro F1 " << cv.mean_f1
            << " ± " << cv.sd_f1 << "\n";
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_file(fs::path(a.out) / "cv.csv", [&](std::ostream& o) { write_cv_csv(o, cv); });
    write_snapshot(a.out, "xval",
                   {{"data", a.data}, {"config", json::parse(cfg.to_json())}, {"modality", a.modality}, {"k", a.k},
                    {"jobs", a.jobs}, {"options", train_options_json(opts)}});
  } else {
    write_cv_csv(std::cout, cv);
  }
  return 0;
}

struct EvalArgs {
  std::string model, data, out, split = "test";
};

int run_eval(const EvalArgs& a) {
  auto loaded = load_model(a.model);
  const auto& cfg = loaded.model.config();
  const auto manifest = read_manifest(a.data);
  check_depth_size(manifest, cfg);
  const auto windows = read_windows(a.data, manifest, spec_for(cfg));
  const auto indices = a.split == "all" ? [&] {
    std::vector<std::size_t> v(windows.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
    return v;
  }()
                                         : test_indices(manifest);
  const auto eval = evaluate(loaded.model, select(windows, indices), loaded.norm);
  print_metrics(a.split, eval);
  const fs::path out = a.out.empty() ? checkpoint_path(a.model).parent_path() / "eval" : fs::path(a.out);
  fs::create_directories(out);
  write_evaluation(out, eval, paper_row(loaded.model.modalities()));
  write_snapshot(out, "eval", {{"model", a.model}, {"data", a.data}, {"split", a.split}});
  std::cout << "wrote " << (out / "metrics.csv").string() << " and " << (out / "confusion.pgm").string() << "\n";
  return 0;
}

struct CompareArgs {
  std::string data, config, out;
  int epochs = 30, batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

int run_compare(const CompareArgs& a) {
  const auto cfg = load_config(a.config, ModelConfig::desk());
  const auto manifest = read_manifest(a.data);
  check_depth_size(manifest, cfg);
  if (manifest.split.test.empty()) throw UsageError("dataset is too small to have a held-out split");
  const auto windows = read_windows(a.data, manifest, spec_for(cfg));
  const auto opts = train_options(a.epochs, a.batch, a.lr, a.seed);
  const auto rows = compare_models(cfg, windows, manifest.split, manifest.normalization, opts,
                                   [](const std::string& name, const Evaluation& e) { print_metrics(name, e); });
  write_comparison_csv(std::cout, rows);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_file(fs::path(a.out) / "comparison.csv", [&](std::ostream& o) { write_comparison_csv(o, rows); });
    write_snapshot(a.out, "compare",
                   {{"data", a.data}, {"config", json::parse(cfg.to_json())}, {"options", train_options_json(opts)}});
  }
  return 0;
}

struct StatsArgs {
  std::string data, out;
};

int run_stats(const StatsArgs& a) {
  const auto manifest = read_manifest(a.data);
  std::array<std::vector<double>, kNumRegions> durations;
  for_each_recording(a.data, manifest, [&](std::size_t, MotionRecording&& r) {
    durations[std::size_t(region_index(r.label))].push_back(r.duration());
  });
  std::vector<std::vector<double>> groups;
  for (const auto& d : durations)
    if (!d.empty()) groups.push_back(d);

  std::ostringstream table;
  table << std::fixed << std::setprecision(3) << "region,n,mean,median,max,min,sd\n";
  for (int r = 0; r < kNumRegions; ++r) {
    const auto& d = durations[std::size_t(r)];
    table << region_name(region_from_index(r)) << ',' << d.size();
    if (d.empty()) {
      table << ",,,,,\n";
      continue;
    }
    const auto s = describe(d);
    table << ',' << s.mean << ',' << s.median << ',' << s.max << ',' << s.min << ',' << s.sd << '\n';
  }
  std::cout << manifest.recordings.size() << " motions\n" << table.str();

  std::ostringstream anova_csv, tukey_csv;
  if (groups.size() >= 2 && std::all_of(groups.begin(), groups.end(), [](const auto& g) { return g.size() >= 2; })) {
    const auto an = one_way_anova(groups);
    anova_csv << std::setprecision(10) << "f,p,df_between,df_within,ss_between,ss_within\n"
              << an.f << ',' << an.p << ',' << an.df_between << ',' << an.df_within << ',' << an.ss_between << ','
              << an.ss_within << '\n';
    std::cout << std::setprecision(4) << "ANOVA F(" << an.df_between << ", " << an.df_within << ") = " << an.f
              << ", p = " << std::scientific << an.p << std::fixed << "\n";
    if (groups.size() == std::size_t(kNumRegions)) {
      const auto tk = tukey_hsd(groups);
      tukey_csv << std::setprecision(6) << "a,b,mean_diff,q,q_critical,significant\n";
      int significant = 0;
      for (const auto& p : tk.pairs) {
        tukey_csv << region_name(region_from_index(p.i)) << ',' << region_name(region_from_index(p.j)) << ','
                  << p.mean_diff << ',' << p.q << ',' << tk.q_critical << ',' << int(p.significant) << '\n';
        significant += p.significant;
      }
      std::cout << "Tukey HSD: " << significant << " of " << tk.pairs.size() << " pairs differ at alpha 0.05\n";
    }
  } else {
    std::cout << "ANOVA needs at least two regions with two motions each\n";
  }

  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "durations.csv", table.str());
    if (!anova_csv.str().empty()) write_text(fs::path(a.out) / "anova.csv", anova_csv.str());
    if (!tukey_csv.str().empty()) write_text(fs::path(a.out) / "tukey.csv", tukey_csv.str());
    write_snapshot(a.out, "stats", {{"data", a.data}});
  }
  return 0;
}

struct SadArgs {
  std::string data, out, csv;
  std::uint32_t rec = 0;
  int span = 10;
};

int run_sad(const SadArgs& a) {
  const auto manifest = read_manifest(a.data);
  std::size_t index = manifest.recordings.size();
  for (std::size_t i = 0; i < manifest.recordings.size(); ++i)
    if (manifest.recordings[i].id == a.rec) index = i;
  if (index == manifest.recordings.size()) throw UsageError("no recording with id " + std::to_string(a.rec));
  const auto rec = load_recording(a.data, manifest, index);
  std::vector<ImageF> frames;
  for (const auto& d : rec.depth)
    if (d.timestamp >= rec.start) frames.push_back(grayscale_from_depth(d.image));
  if (frames.size() < 2) throw UsageError("recording " + std::to_string(a.rec) + " has too few frames after onset");
  const auto sad = sad_image(frames, a.span);
  write_pgm(a.out, sad);
  if (!a.csv.empty()) write_file(a.csv, [&](std::ostream& o) { write_image_csv(o, sad); });
  std::cout << "SAD over " << std::min<std::size_t>(frames.size(), std::size_t(a.span)) << " frames of recording "
            << a.rec << " (" << region_name(rec.label) << ") written to " << a.out << "\n";
  return 0;
}

struct ReplayArgs {
  std::string model, data, out;
  std::size_t n = 100;
  bool virtual_clock = false;
  double speed = 1.0, mean_motion = 1.47;
};

int run_replay(const ReplayArgs& a) {
  const auto loaded = load_model(a.model);
  const auto manifest = read_manifest(a.data);
  check_depth_size(manifest, loaded.model.config());
  const auto indices = test_indices(manifest);
  std::vector<MotionRecording> recs;
  for (std::size_t i = 0; i < std::min(indices.size(), a.n); ++i)
    recs.push_back(load_recording(a.data, manifest, indices[i]));
  const auto report = measure_latency(loaded.model, recs, loaded.norm, a.n,
                                      a.virtual_clock ? ClockMode::Virtual : ClockMode::Real, a.speed, a.mean_motion);
  write_latency_text(std::cout, report);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_file(fs::path(a.out) / "latency.csv", [&](std::ostream& o) { write_latency_csv(o, report); });
    write_file(fs::path(a.out) / "latency.txt", [&](std::ostream& o) { write_latency_text(o, report); });
    write_snapshot(a.out, "replay",
                   {{"model", a.model}, {"data", a.data}, {"n", a.n}, {"virtual_clock", a.virtual_clock},
                    {"speed", a.speed}, {"mean_motion", a.mean_motion}});
  }
  return report.grace.budget_exceeded ? kExitFailedCheck : 0;
}

struct ParamsArgs {
  std::string config, modality = "all";
  bool analytic_only = false;
};

int run_params(const ParamsArgs& a) {
  const auto cfg = load_config(a.config, ModelConfig::paper());
  const auto mods = parse_modalities(a.modality);
  cfg.validate();
  const auto analytic = analytic_parameter_count(cfg, mods);
  ParameterCounts built = analytic;
  if (!a.analytic_only) built = count_parameters(FusionModel<float>(cfg, mods));
  const bool reference = cfg == ModelConfig::paper() && mods == ModalitySet::all();

  std::cout << "branch,instantiated,closed_form,paper_reference\n";
  auto row = [&](const char* name, Index b, Index c, Index ref) {
    std::cout << name << ',' << b << ',' << c << ',';
    if (reference && ref >= 0) std::cout << ref;
    std::cout << '\n';
  };
  row("face", built.face, analytic.face, ReferenceParameterCounts::face);
  row("motion", built.motion, analytic.motion, ReferenceParameterCounts::motion);
  row("depth", built.depth, analytic.depth, ReferenceParameterCounts::depth);
  row("classifier", built.classifier, analytic.classifier, -1);
  row("total", built.total, analytic.total, ReferenceParameterCounts::total);
  const Index fused = (mods.face ? cfg.face_out : 0) + (mods.motion ? cfg.motion_out : 0) +
                      (mods.depth ? cfg.depth_lstm_out : 0) + 1;
  std::cout << "fused_dim " << fused << "\n";
  std::cout << "depth_flat_dim " << cfg.depth_flat_dim() << " (reference table lists " << kReferenceDepthFcInput
            << ")\n";
  if (built != analytic) {
    std::cerr << "instantiated parameter count differs from the closed form\n";
    return kExitFailedCheck;
  }
  return 0;
}

struct GradcheckArgs {
  std::string config;
  int samples = 200;
  double tolerance = 1e-2;
  std::uint64_t seed = 0;
};

SampleWindow random_window(const ModelConfig& cfg, Rng& rng, Region label) {
  std::normal_distribution<float> n(0.f, 0.5f);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  SampleWindow w;
  w.face = RowMatrixXf(cfg.face_frames, cfg.face_in);
  for (Index i = 0; i < w.face.size(); ++i) w.face.data()[i] = n(rng);
  w.motion = RowMatrixXf(cfg.motion_frames, cfg.motion_in);
  for (Index i = 0; i < w.motion.size(); ++i) w.motion.data()[i] = n(rng);
  w.depth = RowMatrixXf(cfg.depth_frames, cfg.depth_pixels() + 1);
  for (Index i = 0; i < w.depth.size(); ++i) w.depth.data()[i] = u(rng);
  w.elapsed = u(rng);
  w.label = label;
  return w;
}

int run_gradcheck(const GradcheckArgs& a) {
  const auto cfg = load_config(a.config, ModelConfig::desk());
  Rng rng(a.seed);
  std::vector<SampleWindow> ws = {random_window(cfg, rng, Region::TL), random_window(cfg, rng, Region::BC)};
  const FusionModel<float> model(cfg);
  const FusionModel<double> twin(cfg);
  const auto batch = make_batch<float>(std::span<const SampleWindow>(ws), cfg, Normalization::identity());
  const auto batch64 = make_batch<double>(std::span<const SampleWindow>(ws), cfg, Normalization::identity());
  auto loss_for = [&]<typename Scalar>(const FusionModel<Scalar>& m, const Batch<Scalar>& b) {
    return [&] {
      Rng drop(123);
      return softmax_cross_entropy(m.forward(b, true, drop), b.labels);
    };
  };
  auto opt = GradCheckOptions::for_float_reference();
  opt.samples = a.samples;
  opt.tolerance = a.tolerance;
  opt.seed = a.seed;
  const auto report = gradient_check_with_reference(model.parameters(), loss_for(model, batch), twin.parameters(),
                                                    loss_for(twin, batch64), opt);
  std::set<std::string> tensors;
  for (const auto& e : report.entries) tensors.insert(e.name);
  std::cout << std::scientific << std::setprecision(3) << "checked " << report.entries.size() << " coordinates in "
            << tensors.size() << " tensors; max rel err " << report.max_rel_err << " (tolerance " << a.tolerance
            << "); " << report.failures << " failures\n";
  for (const auto& e : report.entries)
    if (e.rel_err > a.tolerance)
      std::cout << "  " << e.name << "[" << e.index << "] analytic " << e.analytic << " numeric " << e.numeric << "\n";
  return report.passed() ? 0 : kExitFailedCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal reaching-position prediction: synthetic data, training, evaluation and replay"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mrpd 1.0");

  std::uint64_t seed = 1;
  try {
    seed = default_seed();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  const auto existing_dir = CLI::ExistingDirectory;
  const auto existing_path = CLI::ExistingPath;
  const auto existing_file = CLI::ExistingFile;
  std::function<int()> action;

  GenArgs gen;
  gen.seed = seed;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset container");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--per-region", gen.per_region, "Recordings per region")->capture_default_str();
  g->add_option("--seed", gen.seed, "Generator and split seed (default: MRPD_SEED or 1)")->capture_default_str();
  g->add_flag("--full-size", gen.full_size, "Render 256x188 depth frames instead of 64x47");
  g->add_flag("--stratified", gen.stratified, "Stratify the train/test split by region");
  g->add_option("--folds", gen.folds, "Cross-validation folds recorded in the manifest")->capture_default_str();
  g->add_option("--params", gen.params, "Generator parameters as JSON")->check(existing_file);
  g->callback([&] { action = [&] { return run_gen(gen); }; });

  TrainArgs tr;
  tr.seed = seed;
  auto* t = app.add_subcommand("train", "Train on a dataset's training split");
  t->add_option("--data", tr.data, "Dataset directory")->required()->check(existing_dir);
  t->add_option("--config", tr.config, "Model configuration JSON (default: desk scale)")->check(existing_file);
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--modality", tr.modality, "all, face, imu, depth or a '+' combination")->capture_default_str();
  t->add_option("--epochs", tr.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--batch", tr.batch)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--lr", tr.lr)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--seed", tr.seed, "Minibatch and dropout seed")->capture_default_str();
  t->callback([&] { action = [&] { return run_train(tr); }; });

  XvalArgs xv;
  xv.seed = seed;
  auto* x = app.add_subcommand("xval", "k-fold cross-validation on the training split");
  x->add_option("--data", xv.data, "Dataset directory")->required()->check(existing_dir);
  x->add_option("--k", xv.k, "Number of folds")->capture_default_str();
  x->add_option("--config", xv.config, "Model configuration JSON")->check(existing_file);
  x->add_option("--out", xv.out, "Output directory for cv.csv");
  x->add_option("--modality", xv.modality)->capture_default_str();
  x->add_option("--epochs", xv.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  x->add_option("--batch", xv.batch)->capture_default_str()->check(CLI::PositiveNumber);
  x->add_option("--lr", xv.lr)->capture_default_str()->check(CLI::PositiveNumber);
  x->add_option("--jobs", xv.jobs, "Parallel fold workers")->capture_default_str()->check(CLI::PositiveNumber);
  x->add_option("--seed", xv.seed)->capture_default_str();
  x->callback([&] { action = [&] { return run_xval(xv); }; });

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a trained model");
  e->add_option("--model", ev.model, "Checkpoint file or run directory")->required()->check(existing_path);
  e->add_option("--data", ev.data, "Dataset directory")->required()->check(existing_dir);
  e->add_option("--out", ev.out, "Output directory (default: <run>/eval)");
  e->add_option("--split", ev.split, "test or all")->capture_default_str()->check(CLI::IsMember({"test", "all"}));
  e->callback([&] { action = [&] { return run_eval(ev); }; });

  CompareArgs cmp;
  cmp.seed = seed;
  auto* c = app.add_subcommand("compare", "Train and test the unimodal and fusion models on one split");
  c->add_option("--data", cmp.data, "Dataset directory")->required()->check(existing_dir);
  c->add_option("--config", cmp.config, "Model configuration JSON")->check(existing_file);
  c->add_option("--out", cmp.out, "Output directory for comparison.csv");
  c->add_option("--epochs", cmp.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--batch", cmp.batch)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--lr", cmp.lr)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--seed", cmp.seed)->capture_default_str();
  c->callback([&] { action = [&] { return run_compare(cmp); }; });

  StatsArgs st;
  auto* s = app.add_subcommand("stats", "Reach-duration statistics per region with ANOVA and Tukey HSD");
  s->add_option("--data", st.data, "Dataset directory")->required()->check(existing_dir);
  s->add_option("--out", st.out, "Output directory for CSV tables");
  s->callback([&] { action = [&] { return run_stats(st); }; });

  SadArgs sd;
  auto* sa = app.add_subcommand("sad", "Sum-of-absolute-differences image of one recording");
  sa->add_option("--data", sd.data, "Dataset directory")->required()->check(existing_dir);
  sa->add_option("--rec", sd.rec, "Recording id")->required();
  sa->add_option("--span", sd.span, "Frames summed")->capture_default_str()->check(CLI::Range(2, 1000000));
  sa->add_option("--out", sd.out, "Output PGM")->required();
  sa->add_option("--csv", sd.csv, "Also write the image as CSV");
  sa->callback([&] { action = [&] { return run_sad(sd); }; });

  ReplayArgs rp;
  auto* r = app.add_subcommand("replay", "Replay held-out recordings and measure prediction latency");
  r->add_option("--model", rp.model, "Checkpoint file or run directory")->required()->check(existing_path);
  r->add_option("--data", rp.data, "Dataset directory")->required()->check(existing_dir);
  r->add_option("--n", rp.n, "Number of timed predictions")->capture_default_str()->check(CLI::PositiveNumber);
  r->add_flag("--virtual-clock", rp.virtual_clock, "Deliver frames immediately instead of in real time");
  r->add_option("--speed", rp.speed, "Real-clock playback speed")->capture_default_str()->check(CLI::PositiveNumber);
  r->add_option("--mean-motion", rp.mean_motion, "Mean reach duration for the grace time (s)")->capture_default_str();
  r->add_option("--out", rp.out, "Output directory for latency.csv");
  r->callback([&] { action = [&] { return run_replay(rp); }; });

  ParamsArgs pa;
  auto* p = app.add_subcommand("params", "Per-branch parameter counts");
  p->add_option("--config", pa.config, "Model configuration JSON (default: full size)")->check(existing_file);
  p->add_option("--modality", pa.modality)->capture_default_str();
  p->add_flag("--analytic-only", pa.analytic_only, "Skip instantiating the model");
  p->callback([&] { action = [&] { return run_params(pa); }; });

  GradcheckArgs gc;
  gc.seed = seed;
  auto* gk = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  gk->add_option("--config", gc.config, "Model configuration JSON (default: desk scale)")->check(existing_file);
  gk->add_option("--samples", gc.samples, "Coordinates checked")->capture_default_str()->check(CLI::PositiveNumber);
  gk->add_option("--tolerance", gc.tolerance)->capture_default_str()->check(CLI::PositiveNumber);
  gk->add_option("--seed", gc.seed)->capture_default_str();
  gk->callback([&] { action = [&] { return run_gradcheck(gc); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailedCheck;
  }
}
