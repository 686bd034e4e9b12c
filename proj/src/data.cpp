#include "mrpd/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mrpd {

namespace {

template <typename Frame>
void require_sorted(const std::vector<Frame>& frames, const char* stream, std::uint32_t id) {
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (frames[i].timestamp < frames[i - 1].timestamp)
      throw ValidationError("recording " + std::to_string(id) + ": " + stream + " timestamps not sorted at frame " +
                            std::to_string(i));
}

template <typename Frame>
std::size_t first_at_or_after(const std::vector<Frame>& frames, double t) {
  auto it = std::find_if(frames.begin(), frames.end(), [t](const Frame& f) { return double(f.timestamp) >= t; });
  return static_cast<std::size_t>(it - frames.begin());
}

}  // namespace

void MotionRecording::validate() const {
  if (!(start < end))
    throw ValidationError("recording " + std::to_string(id) + ": start annotation must precede end");
  if (region_index(label) < 0 || region_index(label) >= kNumRegions)
    throw ValidationError("recording " + std::to_string(id) + ": invalid label");
  require_sorted(face, "face", id);
  require_sorted(depth, "depth", id);
  require_sorted(motion, "motion", id);
  for (const auto& f : face)
    if (f.landmarks.size() != kFaceCoords)
      throw ValidationError("recording " + std::to_string(id) + ": face frame with " +
                            std::to_string(f.landmarks.size()) + " coordinates");
  for (const auto& d : depth)
    if (d.image.rows() != depth_h() || d.image.cols() != depth_w())
      throw ValidationError("recording " + std::to_string(id) + ": depth frames differ in size");
}

SampleWindow assemble_window(std::span<const FaceFrame> face, std::span<const DepthFrame> depth,
                             std::span<const MotionFrame> motion, const WindowSpec& spec, Region label,
                             std::uint32_t recording_id) {
  if (static_cast<Eigen::Index>(face.size()) != spec.face_frames ||
      static_cast<Eigen::Index>(depth.size()) != spec.depth_frames ||
      static_cast<Eigen::Index>(motion.size()) != spec.motion_frames)
    throw DimensionError("window assembly: got " + std::to_string(face.size()) + "/" + std::to_string(depth.size()) +
                         "/" + std::to_string(motion.size()) + " face/depth/motion frames, expected " +
                         std::to_string(spec.face_frames) + "/" + std::to_string(spec.depth_frames) + "/" +
                         std::to_string(spec.motion_frames));
  const Eigen::Index pixels = spec.depth_h * spec.depth_w;

  SampleWindow w;
  w.label = label;
  w.recording_id = recording_id;
  w.face = RowMatrixXf::Zero(spec.face_frames, kFaceFeatures);
  for (Eigen::Index i = 0; i < spec.face_frames; ++i) {
    const auto& f = face[static_cast<std::size_t>(i)];
    if (f.present) w.face.row(i).head(kFaceCoords) = f.landmarks.transpose();
    w.face(i, kFaceCoords) = f.elapsed;
  }

  w.depth.resize(spec.depth_frames, pixels + 1);
  for (Eigen::Index i = 0; i < spec.depth_frames; ++i) {
    const auto& d = depth[static_cast<std::size_t>(i)];
    if (d.image.rows() != spec.depth_h || d.image.cols() != spec.depth_w)
      throw DimensionError("window assembly: depth frame " + std::to_string(d.image.rows()) + "x" +
                           std::to_string(d.image.cols()) + ", expected " + std::to_string(spec.depth_h) + "x" +
                           std::to_string(spec.depth_w));
    const float* src = d.image.data();
    for (Eigen::Index p = 0; p < pixels; ++p) w.depth(i, p) = depth_to_unit(src[p]);
    w.depth(i, pixels) = d.elapsed;
  }

  w.motion.resize(spec.motion_frames, kMotionFeatures);
  for (Eigen::Index i = 0; i < spec.motion_frames; ++i) {
    const auto& m = motion[static_cast<std::size_t>(i)];
    w.motion.row(i).head(kImuChannels) = m.channels.transpose();
    w.motion(i, kImuChannels) = m.elapsed;
  }

  w.elapsed = std::max({face.back().elapsed, depth.back().elapsed, motion.back().elapsed});
  return w;
}

SampleWindow extract_window(const MotionRecording& rec, const WindowSpec& spec) {
  const std::size_t f0 = first_at_or_after(rec.face, rec.start);
  const std::size_t d0 = first_at_or_after(rec.depth, rec.start);
  const std::size_t m0 = first_at_or_after(rec.motion, rec.start);
  const auto have_f = rec.face.size() - f0, have_d = rec.depth.size() - d0, have_m = rec.motion.size() - m0;
  if (static_cast<Eigen::Index>(have_f) < spec.face_frames || static_cast<Eigen::Index>(have_d) < spec.depth_frames ||
      static_cast<Eigen::Index>(have_m) < spec.motion_frames)
    throw TruncatedWindowError("recording " + std::to_string(rec.id) + ": after start annotation has " +
                               std::to_string(have_f) + " face, " + std::to_string(have_d) + " depth, " +
                               std::to_string(have_m) + " motion frames; window needs " +
                               std::to_string(spec.face_frames) + "/" + std::to_string(spec.depth_frames) + "/" +
                               std::to_string(spec.motion_frames));
  return assemble_window(std::span(rec.face).subspan(f0, static_cast<std::size_t>(spec.face_frames)),
                         std::span(rec.depth).subspan(d0, static_cast<std::size_t>(spec.depth_frames)),
                         std::span(rec.motion).subspan(m0, static_cast<std::size_t>(spec.motion_frames)), spec,
                         rec.label, rec.id);
}

Normalization Normalization::identity() {
  Normalization n;
  n.imu_mean.fill(0.f);
  n.imu_sd.fill(1.f);
  return n;
}

Normalization Normalization::fit(std::span<const MotionRecording> recordings) {
  Eigen::Matrix<double, kImuChannels, 1> sum = Eigen::Matrix<double, kImuChannels, 1>::Zero();
  Eigen::Matrix<double, kImuChannels, 1> sq = sum;
  double count = 0;
  for (const auto& r : recordings)
    for (const auto& m : r.motion) {
      const auto c = m.channels.cast<double>();
      sum += c;
      sq += c.cwiseProduct(c);
      count += 1;
    }
  if (count < 2) return identity();
  Normalization n;
  for (Eigen::Index i = 0; i < kImuChannels; ++i) {
    const double mu = sum[i] / count;
    const double var = std::max(0.0, (sq[i] - count * mu * mu) / (count - 1));
    const double sd = std::sqrt(var);
    n.imu_mean[static_cast<std::size_t>(i)] = float(mu);
    n.imu_sd[static_cast<std::size_t>(i)] = sd > 1e-6 ? float(sd) : 1.f;
  }
  return n;
}

std::size_t test_count(std::size_t n) { return static_cast<std::size_t>(std::llround(double(n) * 197.0 / 1538.0)); }

Split split_dataset(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("split: empty dataset");
  if (n < 10) throw ValidationError("split: need at least 10 recordings, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t held = test_count(n);
  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Split split_dataset_stratified(std::span<const Region> labels, std::uint64_t seed) {
  if (labels.empty()) throw ValidationError("split: empty dataset");
  if (labels.size() < 10) throw ValidationError("split: need at least 10 recordings, got " + std::to_string(labels.size()));
  std::mt19937_64 rng(seed);
  Split s;
  for (Region r : kAllRegions) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == r) group.push_back(i);
    std::shuffle(group.begin(), group.end(), rng);
    const std::size_t held = test_count(group.size());
    s.test.insert(s.test.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(held));
    s.train.insert(s.train.end(), group.begin() + static_cast<std::ptrdiff_t>(held), group.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<Fold> kfold(std::span<const std::size_t> items, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("kfold: k must be at least 2, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) > items.size())
    throw ValidationError("kfold: k=" + std::to_string(k) + " exceeds " + std::to_string(items.size()) + " items");
  std::vector<std::size_t> order(items.begin(), items.end());
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t base = order.size() / static_cast<std::size_t>(k);
  const std::size_t extra = order.size() % static_cast<std::size_t>(k);
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  std::size_t begin = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    auto& fold = folds[f];
    fold.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                           order.begin() + static_cast<std::ptrdiff_t>(begin + len));
    fold.train.reserve(order.size() - len);
    fold.train.insert(fold.train.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(begin));
    fold.train.insert(fold.train.end(), order.begin() + static_cast<std::ptrdiff_t>(begin + len), order.end());
    std::sort(fold.validation.begin(), fold.validation.end());
    std::sort(fold.train.begin(), fold.train.end());
    begin += len;
  }
  return folds;
}

}  // namespace mrpd
