#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mrpd/dataset_io.hpp"
#include "mrpd/synth.hpp"

using namespace mrpd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("mrpd_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

GeneratorParams small_params() {
  auto p = GeneratorParams::defaults();
  p.depth_h = 16;
  p.depth_w = 12;
  return p;
}

WindowSpec small_spec() {
  WindowSpec s;
  s.depth_h = 16;
  s.depth_w = 12;
  return s;
}

// Hand-built recording with frames on an exact grid, so expected window contents are known.
MotionRecording grid_recording(double start, int face_n = 30, int depth_n = 30, int motion_n = 200) {
  MotionRecording r;
  r.id = 4;
  r.label = Region::TR;
  r.start = start;
  r.end = start + 1.0;
  for (int i = 0; i < face_n; ++i) {
    FaceFrame f;
    f.timestamp = float(i / 15.0);
    f.elapsed = float(f.timestamp - start);
    f.landmarks.setConstant(float(i));
    r.face.push_back(f);
  }
  for (int i = 0; i < depth_n; ++i) {
    DepthFrame d;
    d.timestamp = float(i / 15.0);
    d.elapsed = float(d.timestamp - start);
    d.image = ImageF::Constant(16, 12, float(i) * 0.1f);
    r.depth.push_back(d);
  }
  for (int i = 0; i < motion_n; ++i) {
    MotionFrame m;
    m.timestamp = float(i / 100.0);
    m.elapsed = float(m.timestamp - start);
    m.channels.setConstant(float(i));
    r.motion.push_back(m);
  }
  return r;
}

std::string blob_of(const MotionRecording& r) {
  std::ostringstream out(std::ios::binary);
  write_recording(out, r);
  return out.str();
}

}  // namespace

TEST_CASE("half-second windows hold 7 / 7 / 50 frames") {
  const auto spec = small_spec();
  CHECK(spec.face_frames == 7);
  CHECK(spec.depth_frames == 7);
  CHECK(spec.motion_frames == 50);
  // 0.5 s at 15 and 100 FPS, counting the first frame at the start: floor(0.5·15) = 7, 0.5·100 = 50.
  CHECK(spec.face_frames == Eigen::Index(0.5 * 15.0));
  CHECK(spec.motion_frames == Eigen::Index(0.5 * 100.0));

  const auto rec = grid_recording(0.3);
  const auto w = extract_window(rec, spec);
  CHECK(w.face.rows() == 7);
  CHECK(w.face.cols() == kFaceFeatures);
  CHECK(w.depth.rows() == 7);
  CHECK(w.depth.cols() == 16 * 12 + 1);
  CHECK(w.motion.rows() == 50);
  CHECK(w.motion.cols() == kMotionFeatures);
  // First face frame at or after 0.3 s on a 15 Hz grid is frame 5 (0.333 s); motion frame 30.
  CHECK(w.face(0, 0) == 5.f);
  CHECK(w.face(6, 0) == 11.f);
  CHECK(w.motion(0, 0) == 30.f);
  CHECK(w.motion(49, 0) == 79.f);
  CHECK(w.face(0, kFaceCoords) == doctest::Approx(1.0 / 3.0 - 0.3).epsilon(1e-5));
  CHECK(w.motion(0, kImuChannels) == doctest::Approx(0.0).epsilon(1e-5));
  // Depth is scaled from meters to [0, 1].
  CHECK(w.depth(0, 0) == doctest::Approx(0.5f / 4.f));
  CHECK(w.label == Region::TR);
  CHECK(w.recording_id == 4);
  // Pure and repeatable.
  CHECK(extract_window(rec, spec) == w);
}

TEST_CASE("absent face frames are zero-padded except for elapsed") {
  auto rec = grid_recording(0.0);
  rec.face[0].present = false;
  rec.face[1].present = false;
  rec.face[0].landmarks.setZero();
  rec.face[1].landmarks.setZero();
  const auto w = extract_window(rec, small_spec());
  for (int r = 0; r < 2; ++r) {
    CHECK(w.face.row(r).head(kFaceCoords).isZero());
    CHECK(w.face(r, kFaceCoords) == rec.face[std::size_t(r)].elapsed);
  }
  CHECK(w.face(2, 0) == 2.f);
  CHECK(w.face.allFinite());
}

TEST_CASE("a recording too short for a window is rejected with counts") {
  const auto rec = grid_recording(0.0, 5, 30, 200);
  try {
    (void)extract_window(rec, small_spec());
    FAIL("expected TruncatedWindowError");
  } catch (const TruncatedWindowError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("5 face") != std::string::npos);
    CHECK(msg.find("7/7/50") != std::string::npos);
  }
  CHECK_THROWS_AS(extract_window(grid_recording(0.0, 30, 30, 49), small_spec()), TruncatedWindowError);
  CHECK_NOTHROW(extract_window(grid_recording(0.0, 7, 7, 50), small_spec()));
}

TEST_CASE("train/test split proportions") {
  SUBCASE("1538 recordings") {
    const auto s = split_dataset(1538, 1);
    CHECK(s.train.size() == 1341);
    CHECK(s.test.size() == 197);
  }
  SUBCASE("100 recordings") {
    const auto s = split_dataset(100, 1);
    CHECK(s.train.size() == 87);
    CHECK(s.test.size() == 13);
  }
  SUBCASE("determinism and partition") {
    const auto a = split_dataset(300, 9), b = split_dataset(300, 9), c = split_dataset(300, 10);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.test != c.test);
    std::vector<std::size_t> all = a.train;
    all.insert(all.end(), a.test.begin(), a.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  }
  SUBCASE("stratified") {
    std::vector<Region> labels;
    for (int i = 0; i < 9 * 171; ++i) labels.push_back(region_from_index(i % 9));
    const auto s = split_dataset_stratified(labels, 3);
    CHECK(s.train.size() + s.test.size() == labels.size());
    for (Region r : kAllRegions)
      CHECK(std::count_if(s.test.begin(), s.test.end(), [&](std::size_t i) { return labels[i] == r; }) == 22);
  }
  CHECK_THROWS_AS(split_dataset(0, 1), ValidationError);
  CHECK_THROWS_AS(split_dataset(9, 1), ValidationError);
}

TEST_CASE("k-fold partitions") {
  SUBCASE("1341 items into 10 folds") {
    std::vector<std::size_t> items(1341);
    for (std::size_t i = 0; i < items.size(); ++i) items[i] = 2 * i + 1;  // arbitrary ids
    const auto folds = kfold(items, 10, 5);
    REQUIRE(folds.size() == 10);
    std::multiset<std::size_t> seen;
    for (const auto& f : folds) {
      CHECK((f.validation.size() == 134 || f.validation.size() == 135));
      CHECK(f.train.size() + f.validation.size() == items.size());
      std::vector<std::size_t> both;
      std::set_intersection(f.train.begin(), f.train.end(), f.validation.begin(), f.validation.end(),
                            std::back_inserter(both));
      CHECK(both.empty());
      seen.insert(f.validation.begin(), f.validation.end());
    }
    CHECK(seen.size() == items.size());
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()) == std::set<std::size_t>(items.begin(), items.end()));
  }
  SUBCASE("singletons") {
    std::vector<std::size_t> items{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    for (const auto& f : kfold(items, 10, 1)) CHECK(f.validation.size() == 1);
  }
  std::vector<std::size_t> few{1, 2, 3};
  CHECK_THROWS_AS(kfold(few, 4, 1), ValidationError);
}

TEST_CASE("recording blobs round-trip bit-exactly") {
  auto rec = generate_recording(small_params(), Region::BL, 31).recording;
  rec.face[2].present = false;
  rec.face[2].landmarks.setZero();
  rec.motion[3].channels[0] = -0.f;  // signed zero survives
  const auto blob = blob_of(rec);
  std::istringstream in(blob, std::ios::binary);
  auto back = read_recording(in);
  back.id = rec.id;
  back.participant = rec.participant;
  CHECK(back == rec);
  CHECK(std::signbit(back.motion[3].channels[0]));
  CHECK(blob_of(back) == blob);
}

TEST_CASE("corrupted blobs produce format errors") {
  const auto rec = generate_recording(small_params(), Region::C, 2).recording;
  const auto blob = blob_of(rec);

  SUBCASE("bad magic is reported at offset 0") {
    auto bad = blob;
    bad[0] = 'X';
    std::istringstream in(bad, std::ios::binary);
    try {
      (void)read_recording(in, "17");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
      CHECK(e.record() == "17");
    }
  }
  SUBCASE("unknown version") {
    auto bad = blob;
    bad[7] = 9;
    std::istringstream in(bad, std::ios::binary);
    CHECK_THROWS_AS(read_recording(in), FormatError);
  }
  SUBCASE("invalid label") {
    auto bad = blob;
    bad[9] = 12;
    std::istringstream in(bad, std::ios::binary);
    try {
      (void)read_recording(in);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 9);
    }
  }
  SUBCASE("truncation names the record") {
    std::istringstream in(blob.substr(0, blob.size() - 100), std::ios::binary);
    try {
      (void)read_recording(in, "42");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.record() == "42");
      CHECK(e.offset() == blob.size() - 100);
      CHECK(std::string(e.what()).find("record 42") != std::string::npos);
    }
  }
  SUBCASE("trailing garbage") {
    std::istringstream in(blob + "xx", std::ios::binary);
    CHECK_THROWS_AS(read_recording(in), FormatError);
  }
}

TEST_CASE("dataset containers round-trip") {
  TempDir dir("container");
  auto params = small_params();
  auto data = generate_dataset(params, 2, 77);
  DatasetOptions opt;
  opt.seed = 5;
  opt.folds = 3;
  opt.generator = params.to_json();
  const auto written = write_dataset(dir.path, data, opt);
  CHECK(fs::exists(dir.path / "manifest.json"));
  CHECK(written.recordings.size() == 18);
  CHECK(written.split.train.size() + written.split.test.size() == 18);
  CHECK(written.folds.size() == 3);
  CHECK(written.depth_h == 16);

  const auto manifest = read_manifest(dir.path);
  CHECK(manifest == written);
  CHECK(GeneratorParams::from_json(manifest.generator) == params);

  const auto back = read_dataset(dir.path);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(back[i] == data[i]);

  // Normalization comes from the training recordings.
  std::vector<MotionRecording> train;
  for (auto i : manifest.split.train) train.push_back(data[i]);
  const auto fit = Normalization::fit(train);
  for (std::size_t c = 0; c < std::size_t(kImuChannels); ++c) {
    CHECK(manifest.normalization.imu_mean[c] == doctest::Approx(fit.imu_mean[c]).epsilon(1e-5));
    CHECK(manifest.normalization.imu_sd[c] == doctest::Approx(fit.imu_sd[c]).epsilon(1e-4));
  }

  // Windows come out in manifest order with their ids.
  const auto windows = read_windows(dir.path, manifest, params.window_spec());
  REQUIRE(windows.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(windows[i] == extract_window(data[i], params.window_spec()));

  // Writing the same data again gives identical bytes.
  TempDir again("container_again");
  write_dataset(again.path, data, opt);
  for (const auto& e : manifest.recordings) {
    std::ifstream a(dir.path / e.file, std::ios::binary), b(again.path / e.file, std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
  }
}

TEST_CASE("container faults") {
  TempDir dir("faults");
  const auto data = generate_dataset(small_params(), 2, 3);
  const auto manifest = write_dataset(dir.path, data);

  SUBCASE("missing manifest") { CHECK_THROWS_AS(read_manifest(dir.path / "nope"), FormatError); }
  SUBCASE("corrupt manifest") {
    std::ofstream(dir.path / "manifest.json") << "{\"format\": \"mrpd-dataset\", \"version\": 1";
    CHECK_THROWS_AS(read_manifest(dir.path), FormatError);
  }
  SUBCASE("truncated blob names its recording id") {
    const auto& e = manifest.recordings[5];
    const auto size = fs::file_size(dir.path / e.file);
    fs::resize_file(dir.path / e.file, size / 2);
    try {
      (void)read_dataset(dir.path);
      FAIL("expected FormatError");
    } catch (const FormatError& err) {
      CHECK(err.record() == std::to_string(e.id));
    }
  }
  SUBCASE("mixed depth sizes are refused at write time") {
    auto other = small_params();
    other.depth_h = 8;
    DatasetWriter w(dir.path / "mixed", {});
    w.add(data[0]);
    CHECK_THROWS_AS(w.add(generate_recording(other, Region::C, 1).recording), ValidationError);
  }
}

TEST_CASE("CSV export") {
  TempDir dir("csv");
  const auto rec = generate_recording(small_params(), Region::TL, 8).recording;
  export_frames_csv(rec, dir.path / "r");
  std::ifstream motion(dir.path / "r_motion.csv");
  std::string header, line;
  std::getline(motion, header);
  CHECK(header.rfind("timestamp,elapsed,mag_x", 0) == 0);
  std::size_t lines = 0;
  while (std::getline(motion, line)) ++lines;
  CHECK(lines == rec.motion.size());
  CHECK(fs::exists(dir.path / "r_face.csv"));
  CHECK(fs::exists(dir.path / "r_depth.csv"));
}
