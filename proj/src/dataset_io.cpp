#include "mrpd/dataset_io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <algorithm>
#include <limits>
#include <sstream>

#include "mrpd/binary_io.hpp"

namespace mrpd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[7] = {'M', 'R', 'P', 'D', 'R', 'E', 'C'};
constexpr std::uint32_t kFaceStride = 3 + kFaceCoords;
constexpr std::uint32_t kMotionStride = 2 + kImuChannels;

std::uint32_t checked_u32(std::size_t n, const char* what) {
  if (n > std::numeric_limits<std::uint32_t>::max()) throw ValidationError(std::string("too many ") + what);
  return static_cast<std::uint32_t>(n);
}

void expect_stride(BinaryReader& in, std::uint32_t expected, const std::string& stream) {
  const auto at = in.offset();
  const auto stride = in.u32(stream + " frame width");
  if (stride != expected)
    throw FormatError(stream + " frames hold " + std::to_string(stride) + " values, expected " + std::to_string(expected), at);
}

std::string record_file(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rec_%06zu.bin", index);
  return buf;
}

json index_list(const std::vector<std::size_t>& v) { return json(v); }

std::vector<std::size_t> index_list(const json& j, std::size_t n, const char* what) {
  auto v = j.get<std::vector<std::size_t>>();
  for (auto i : v)
    if (i >= n) throw FormatError(std::string("manifest ") + what + " index " + std::to_string(i) + " out of range", 0);
  return v;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string(), 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Blobs

void write_recording(std::ostream& out, const MotionRecording& rec) {
  rec.validate();
  BinaryWriter w(out);
  w.bytes(kMagic, sizeof kMagic);
  w.u16(kRecordVersion);
  w.u8(static_cast<std::uint8_t>(region_index(rec.label)));
  w.f64(rec.start);
  w.f64(rec.end);

  w.u32(checked_u32(rec.face.size(), "face frames"));
  w.u32(kFaceStride);
  for (const auto& f : rec.face) {
    w.f32(f.timestamp);
    w.f32(f.elapsed);
    w.f32(f.present ? 1.f : 0.f);
    w.f32s(f.landmarks.data(), kFaceCoords);
  }

  w.u32(checked_u32(rec.motion.size(), "motion frames"));
  w.u32(kMotionStride);
  for (const auto& m : rec.motion) {
    w.f32(m.timestamp);
    w.f32(m.elapsed);
    w.f32s(m.channels.data(), kImuChannels);
  }

  const auto h = rec.depth_h(), wd = rec.depth_w();
  w.u32(checked_u32(rec.depth.size(), "depth frames"));
  w.u32(checked_u32(std::size_t(2 + h * wd), "depth pixels"));
  w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(wd));
  for (const auto& d : rec.depth) {
    w.f32(d.timestamp);
    w.f32(d.elapsed);
    w.f32s(d.image.data(), static_cast<std::size_t>(d.image.size()));
  }
  if (!out) throw std::runtime_error("write failed");
}

MotionRecording read_recording(std::istream& is, const std::string& record) {
  BinaryReader in(is, record);
  char magic[sizeof kMagic];
  in.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("bad magic, not a recording blob", 0, record);
  const auto version = in.u16("version");
  if (version != kRecordVersion)
    throw FormatError("unsupported recording version " + std::to_string(version), sizeof kMagic, record);
  const auto label_at = in.offset();
  const auto label = in.u8("label");
  if (label >= kNumRegions) throw FormatError("invalid label " + std::to_string(label), label_at, record);

  MotionRecording rec;
  rec.label = region_from_index(label);
  rec.start = in.f64("start annotation");
  rec.end = in.f64("end annotation");

  const auto n_face = in.u32("face frame count");
  expect_stride(in, kFaceStride, "face");
  rec.face.resize(0);
  for (std::uint32_t i = 0; i < n_face; ++i) {
    FaceFrame f;
    const std::string what = "face frame " + std::to_string(i);
    f.timestamp = in.f32(what);
    f.elapsed = in.f32(what);
    f.present = in.f32(what) != 0.f;
    in.f32s(f.landmarks.data(), kFaceCoords, what);
    rec.face.push_back(std::move(f));
  }

  const auto n_motion = in.u32("motion frame count");
  expect_stride(in, kMotionStride, "motion");
  for (std::uint32_t i = 0; i < n_motion; ++i) {
    MotionFrame m;
    const std::string what = "motion frame " + std::to_string(i);
    m.timestamp = in.f32(what);
    m.elapsed = in.f32(what);
    in.f32s(m.channels.data(), kImuChannels, what);
    rec.motion.push_back(m);
  }

  const auto n_depth = in.u32("depth frame count");
  const auto stride_at = in.offset();
  const auto stride = in.u32("depth frame width");
  const auto h = in.u32("depth height"), w = in.u32("depth width");
  if (std::uint64_t(stride) != 2 + std::uint64_t(h) * w)
    throw FormatError("depth frame width " + std::to_string(stride) + " does not match " + std::to_string(h) + "x" +
                          std::to_string(w),
                      stride_at, record);
  for (std::uint32_t i = 0; i < n_depth; ++i) {
    DepthFrame d;
    const std::string what = "depth frame " + std::to_string(i);
    d.timestamp = in.f32(what);
    d.elapsed = in.f32(what);
    d.image.resize(h, w);
    in.f32s(d.image.data(), std::size_t(h) * w, what);
    rec.depth.push_back(std::move(d));
  }
  if (!in.at_end()) throw FormatError("trailing bytes after recording", in.offset(), record);
  return rec;
}

// ---------------------------------------------------------------------------
// Manifest

std::vector<Region> DatasetManifest::labels() const {
  std::vector<Region> out;
  out.reserve(recordings.size());
  for (const auto& r : recordings) out.push_back(r.label);
  return out;
}

bool DatasetManifest::operator==(const DatasetManifest& o) const {
  auto same_folds = [](const std::vector<Fold>& a, const std::vector<Fold>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].train != b[i].train || a[i].validation != b[i].validation) return false;
    return true;
  };
  return version == o.version && seed == o.seed && depth_h == o.depth_h && depth_w == o.depth_w &&
         normalization == o.normalization && stratified == o.stratified && split.train == o.split.train &&
         split.test == o.split.test && same_folds(folds, o.folds) && generator == o.generator &&
         recordings == o.recordings;
}

std::string DatasetManifest::to_json() const {
  json j;
  j["format"] = "mrpd-dataset";
  j["version"] = version;
  json per_region = json::object();
  for (Region r : kAllRegions) per_region[std::string(region_name(r))] = 0;
  for (const auto& e : recordings) per_region[std::string(region_name(e.label))] = per_region[std::string(region_name(e.label))].get<int>() + 1;
  j["counts"] = {{"recordings", recordings.size()}, {"per_region", per_region}};
  j["labels"] = json::array();
  for (Region r : kAllRegions) j["labels"].push_back(region_name(r));
  j["seed"] = seed;
  j["depth"] = {{"height", depth_h}, {"width", depth_w}};
  j["normalization"] = {{"imu_mean", normalization.imu_mean},
                        {"imu_sd", normalization.imu_sd},
                        {"depth", "meters clamped to [0, 4] then divided by 4"},
                        {"landmarks", "image-relative"}};
  j["split"] = {{"stratified", stratified}, {"train", index_list(split.train)}, {"test", index_list(split.test)}};
  j["folds"] = json::array();
  for (const auto& f : folds) j["folds"].push_back(index_list(f.validation));
  j["generator"] = generator.empty() ? json(nullptr) : json::parse(generator);
  j["recordings"] = json::array();
  for (const auto& e : recordings)
    j["recordings"].push_back(
        {{"id", e.id}, {"participant", e.participant}, {"label", region_name(e.label)}, {"file", e.file}});
  return j.dump(1);
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    if (j.value("format", std::string{}) != "mrpd-dataset") throw FormatError("manifest: not a dataset manifest", 0);
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion) throw FormatError("manifest: unsupported version " + std::to_string(m.version), 0);
    m.seed = j.at("seed").get<std::uint64_t>();
    m.depth_h = j.at("depth").at("height").get<Eigen::Index>();
    m.depth_w = j.at("depth").at("width").get<Eigen::Index>();
    m.normalization.imu_mean = j.at("normalization").at("imu_mean").get<std::array<float, kImuChannels>>();
    m.normalization.imu_sd = j.at("normalization").at("imu_sd").get<std::array<float, kImuChannels>>();
    for (const auto& e : j.at("recordings")) {
      const auto label = parse_region(e.at("label").get<std::string>());
      if (!label) throw FormatError("manifest: unknown label " + e.at("label").dump(), 0);
      m.recordings.push_back({e.at("id").get<std::uint32_t>(), e.at("participant").get<std::uint32_t>(), *label,
                              e.at("file").get<std::string>()});
    }
    const auto n = m.recordings.size();
    if (j.at("counts").at("recordings").get<std::size_t>() != n) throw FormatError("manifest: recording count mismatch", 0);
    const auto& s = j.at("split");
    m.stratified = s.at("stratified").get<bool>();
    m.split.train = index_list(s.at("train"), n, "split");
    m.split.test = index_list(s.at("test"), n, "split");
    // Folds are stored as validation sets over the training split; the fold-train side is the complement.
    for (const auto& v : j.at("folds")) {
      Fold f;
      f.validation = index_list(v, n, "fold");
      std::set_difference(m.split.train.begin(), m.split.train.end(), f.validation.begin(), f.validation.end(),
                          std::back_inserter(f.train));
      m.folds.push_back(std::move(f));
    }
    if (!j.at("generator").is_null()) m.generator = j["generator"].dump(2);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what(), 0);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Container

DatasetWriter::DatasetWriter(fs::path dir, DatasetOptions options) : dir_(std::move(dir)), options_(std::move(options)) {
  fs::create_directories(dir_);
  manifest_.seed = options_.seed;
  manifest_.stratified = options_.stratified;
  manifest_.generator = options_.generator.empty() ? std::string{} : json::parse(options_.generator).dump(2);
}

void DatasetWriter::add(const MotionRecording& rec) {
  if (finished_) throw ContractError("dataset writer: add after finish");
  const std::size_t index = manifest_.recordings.size();
  if (index == 0) {
    manifest_.depth_h = rec.depth_h();
    manifest_.depth_w = rec.depth_w();
  } else if (rec.depth_h() != manifest_.depth_h || rec.depth_w() != manifest_.depth_w) {
    throw ValidationError("dataset writer: recording " + std::to_string(rec.id) + " has a different depth size");
  }
  const auto file = record_file(index);
  {
    std::ofstream out(dir_ / file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir_ / file).string());
    write_recording(out, rec);
  }
  manifest_.recordings.push_back({rec.id, rec.participant, rec.label, file});
  ImuSums s;
  for (const auto& m : rec.motion) {
    for (Eigen::Index c = 0; c < kImuChannels; ++c) {
      const double v = m.channels[c];
      s.sum[std::size_t(c)] += v;
      s.sq[std::size_t(c)] += v * v;
    }
    s.count += 1;
  }
  imu_.push_back(s);
}

DatasetManifest DatasetWriter::finish() {
  if (finished_) throw ContractError("dataset writer: finish called twice");
  finished_ = true;
  const std::size_t n = manifest_.recordings.size();
  if (n >= 10) {
    const auto labels = manifest_.labels();
    manifest_.split = options_.stratified ? split_dataset_stratified(labels, options_.seed) : split_dataset(n, options_.seed);
    if (options_.folds >= 2 && manifest_.split.train.size() >= std::size_t(options_.folds))
      manifest_.folds = kfold(manifest_.split.train, options_.folds, options_.seed + 1);
  }

  // IMU standardization from the training recordings only.
  std::vector<std::size_t> fit_on = manifest_.split.train;
  if (fit_on.empty())
    for (std::size_t i = 0; i < n; ++i) fit_on.push_back(i);
  ImuSums total;
  for (auto i : fit_on) {
    for (std::size_t c = 0; c < std::size_t(kImuChannels); ++c) {
      total.sum[c] += imu_[i].sum[c];
      total.sq[c] += imu_[i].sq[c];
    }
    total.count += imu_[i].count;
  }
  manifest_.normalization = Normalization::identity();
  if (total.count >= 2)
    for (std::size_t c = 0; c < std::size_t(kImuChannels); ++c) {
      const double mu = total.sum[c] / total.count;
      const double sd = std::sqrt(std::max(0.0, (total.sq[c] - total.count * mu * mu) / (total.count - 1)));
      manifest_.normalization.imu_mean[c] = float(mu);
      manifest_.normalization.imu_sd[c] = sd > 1e-6 ? float(sd) : 1.f;
    }

  std::ofstream out(dir_ / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir_ / "manifest.json").string());
  out << manifest_.to_json() << '\n';
  return manifest_;
}

DatasetManifest write_dataset(const fs::path& dir, std::span<const MotionRecording> recordings,
                              const DatasetOptions& options) {
  DatasetWriter w(dir, options);
  for (const auto& r : recordings) w.add(r);
  return w.finish();
}

DatasetManifest read_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) throw FormatError("no manifest.json in " + dir.string(), 0);
  return DatasetManifest::from_json(read_text(path));
}

MotionRecording load_recording(const fs::path& dir, const DatasetManifest& manifest, std::size_t index) {
  const auto& e = manifest.recordings.at(index);
  std::ifstream in(dir / e.file, std::ios::binary);
  if (!in) throw FormatError("cannot open " + (dir / e.file).string(), 0, std::to_string(e.id));
  auto rec = read_recording(in, std::to_string(e.id));
  if (rec.label != e.label)
    throw FormatError("label in blob disagrees with the manifest", 9, std::to_string(e.id));
  rec.id = e.id;
  rec.participant = e.participant;
  return rec;
}

void for_each_recording(const fs::path& dir, const DatasetManifest& manifest,
                        const std::function<void(std::size_t, MotionRecording&&)>& visit) {
  for (std::size_t i = 0; i < manifest.recordings.size(); ++i) visit(i, load_recording(dir, manifest, i));
}

std::vector<MotionRecording> read_dataset(const fs::path& dir) {
  const auto manifest = read_manifest(dir);
  std::vector<MotionRecording> out;
  out.reserve(manifest.recordings.size());
  for_each_recording(dir, manifest, [&out](std::size_t, MotionRecording&& r) { out.push_back(std::move(r)); });
  return out;
}

std::vector<SampleWindow> read_windows(const fs::path& dir, const DatasetManifest& manifest, const WindowSpec& spec) {
  std::vector<SampleWindow> out;
  out.reserve(manifest.recordings.size());
  for_each_recording(dir, manifest,
                     [&](std::size_t, MotionRecording&& r) { out.push_back(extract_window(r, spec)); });
  return out;
}

void export_frames_csv(const MotionRecording& rec, const fs::path& stem) {
  auto open = [&stem](const char* suffix) {
    std::ofstream f(stem.string() + suffix);
    if (!f) throw std::runtime_error("cannot write " + stem.string() + suffix);
    f << std::setprecision(9);
    return f;
  };
  {
    auto f = open("_face.csv");
    f << "timestamp,elapsed,present";
    for (Eigen::Index i = 0; i < kLandmarks; ++i) f << ",x" << i << ",y" << i << ",z" << i;
    f << '\n';
    for (const auto& fr : rec.face) {
      f << fr.timestamp << ',' << fr.elapsed << ',' << int(fr.present);
      for (Eigen::Index i = 0; i < kFaceCoords; ++i) f << ',' << fr.landmarks[i];
      f << '\n';
    }
  }
  {
    auto f = open("_motion.csv");
    f << "timestamp,elapsed,mag_x,mag_y,mag_z,gyro_x,gyro_y,gyro_z,acc_x,acc_y,acc_z,acc_norm\n";
    for (const auto& m : rec.motion) {
      f << m.timestamp << ',' << m.elapsed;
      for (Eigen::Index c = 0; c < kImuChannels; ++c) f << ',' << m.channels[c];
      f << '\n';
    }
  }
  {
    auto f = open("_depth.csv");
    f << "timestamp,elapsed";
    for (Eigen::Index r = 0; r < rec.depth_h(); ++r)
      for (Eigen::Index c = 0; c < rec.depth_w(); ++c) f << ",r" << r << "c" << c;
    f << '\n';
    for (const auto& d : rec.depth) {
      f << d.timestamp << ',' << d.elapsed;
      for (Eigen::Index i = 0; i < d.image.size(); ++i) f << ',' << d.image.data()[i];
      f << '\n';
    }
  }
}

}  // namespace mrpd
