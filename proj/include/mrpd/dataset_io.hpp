#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mrpd/data.hpp"

namespace mrpd {

inline constexpr std::uint16_t kRecordVersion = 1;
inline constexpr int kManifestVersion = 1;

/// One recording blob: "MRPDREC", u16 version, u8 label, f64 start/end, then face, motion and depth frame arrays.
///
/// Each array is a u32 frame count and a u32 per-frame float count (the depth array also stores u32 height and
/// width), followed by the frames as little-endian f32 rows:
///   face   [timestamp, elapsed, present, x0, y0, z0, ... x467, y467, z467]
///   motion [timestamp, elapsed, 10 IMU channels]
///   depth  [timestamp, elapsed, H·W row-major pixels]
/// Id and participant live in the manifest, not the blob.
void write_recording(std::ostream& out, const MotionRecording& rec);
MotionRecording read_recording(std::istream& in, const std::string& record = {});

struct ManifestEntry {
  std::uint32_t id = 0;
  std::uint32_t participant = 0;
  Region label = Region::C;
  std::string file;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  int version = kManifestVersion;
  std::uint64_t seed = 0;
  Eigen::Index depth_h = 0, depth_w = 0;
  /// Fitted on the training split only (on everything when the set is too small to split).
  Normalization normalization = Normalization::identity();
  bool stratified = false;
  /// Indices into `recordings`.
  Split split;
  std::vector<Fold> folds;
  std::string generator;  // generator parameters as JSON; empty for imported data
  std::vector<ManifestEntry> recordings;

  std::vector<Region> labels() const;
  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);

  bool operator==(const DatasetManifest& o) const;
};

struct DatasetOptions {
  std::uint64_t seed = 0;  // split and fold seed
  bool stratified = false;
  int folds = 10;
  std::string generator;
};

/// Streams recordings into a container directory; the manifest is written by finish().
class DatasetWriter {
 public:
  DatasetWriter(std::filesystem::path dir, DatasetOptions options);

  void add(const MotionRecording& rec);
  DatasetManifest finish();

 private:
  struct ImuSums {
    std::array<double, kImuChannels> sum{}, sq{};
    double count = 0;
  };

  std::filesystem::path dir_;
  DatasetOptions options_;
  DatasetManifest manifest_;
  std::vector<ImuSums> imu_;
  bool finished_ = false;
};

DatasetManifest write_dataset(const std::filesystem::path& dir, std::span<const MotionRecording> recordings,
                              const DatasetOptions& options = {});

DatasetManifest read_manifest(const std::filesystem::path& dir);

/// Loads entry `index` of the manifest, with id and participant filled in.
MotionRecording load_recording(const std::filesystem::path& dir, const DatasetManifest& manifest, std::size_t index);

std::vector<MotionRecording> read_dataset(const std::filesystem::path& dir);

/// Visits every recording in manifest order without holding more than one in memory.
void for_each_recording(const std::filesystem::path& dir, const DatasetManifest& manifest,
                        const std::function<void(std::size_t, MotionRecording&&)>& visit);

/// Windows of every recording, in manifest order.
std::vector<SampleWindow> read_windows(const std::filesystem::path& dir, const DatasetManifest& manifest,
                                       const WindowSpec& spec);

/// Writes `<stem>_face.csv`, `<stem>_motion.csv` and `<stem>_depth.csv` for inspection.
void export_frames_csv(const MotionRecording& rec, const std::filesystem::path& stem);

}  // namespace mrpd
