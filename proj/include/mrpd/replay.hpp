#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "mrpd/model.hpp"

namespace mrpd {

enum class Stream : std::uint8_t { Face, Depth, Motion };

/// One frame arrival: which stream, which frame of it, and its recorded timestamp.
struct FrameEvent {
  Stream stream = Stream::Face;
  std::size_t index = 0;
  double time = 0.0;

  bool operator==(const FrameEvent&) const = default;
};

/// All frames of a recording in global timestamp order; ties keep face, depth, motion order and per-stream order.
std::vector<FrameEvent> schedule(const MotionRecording& rec);

enum class ClockMode { Virtual, Real };

/// Delivers every frame to `sink`. A virtual clock delivers immediately; a real clock sleeps so that frames
/// arrive at their recorded spacing (divided by `speed`). Returning false from `sink` stops the replay.
/// Throws ValidationError on unsorted streams.
void replay(const MotionRecording& rec, ClockMode clock, const std::function<bool(const FrameEvent&)>& sink,
            double speed = 1.0);

/// Collects the frames at or after a start annotation until a window's worth of each stream is present.
/// One producer pushes; readers take consistent snapshots. Safe to share between threads.
class FrameBuffer {
 public:
  using Clock = std::chrono::steady_clock;

  FrameBuffer(const WindowSpec& spec, double start);

  /// Frames before the start annotation, and frames beyond the window, are dropped.
  void push(const FaceFrame& f);
  void push(const DepthFrame& f);
  void push(const MotionFrame& f);
  void push(const MotionRecording& rec, const FrameEvent& e);

  bool complete() const;
  /// Blocks until complete; returns the monotonic time at which the completing frame was buffered.
  Clock::time_point wait_complete() const;

  struct Snapshot {
    std::vector<FaceFrame> face;
    std::vector<DepthFrame> depth;
    std::vector<MotionFrame> motion;
  };
  Snapshot snapshot() const;

  /// The window the model sees, once complete.
  SampleWindow window(Region label, std::uint32_t recording_id) const;

 private:
  template <typename Frame>
  void add(std::vector<Frame>& dst, const Frame& f, Eigen::Index limit);

  WindowSpec spec_;
  double start_;
  mutable std::mutex mutex_;
  mutable std::condition_variable ready_;
  Snapshot frames_;
  std::optional<Clock::time_point> completed_at_;
};

/// Replays a recording into a fresh buffer until the window is complete and returns that window.
SampleWindow replay_window(const MotionRecording& rec, const WindowSpec& spec, ClockMode clock = ClockMode::Virtual,
                           double speed = 1.0);

struct GraceTime {
  double seconds = 0;
  bool budget_exceeded = false;  // no time left for acting on the prediction
};

/// mean_motion − window − inference. Inputs must be non-negative.
GraceTime grace_time(double mean_motion, double window, double inference);

struct LatencyReport {
  std::size_t n = 0;
  double mean = 0, sd = 0, max = 0;  // seconds, window completion to logits
  double mean_assembly = 0;         // conversion and trimming into model input
  double mean_inference = 0;        // forward pass
  std::vector<double> samples;
  GraceTime grace;
  double mean_motion = 1.47, window = 0.5;

  static constexpr double kPaperMean = 0.0086, kPaperSd = 0.0036, kPaperMax = 0.022, kPaperGrace = 0.96;
};

/// For each of `n` runs (cycling through `recordings`), replays frames into a buffer; the timer starts when the
/// last needed frame is buffered and stops when logits exist. Loading recordings is not timed.
LatencyReport measure_latency(const FusionModel<float>& model, std::span<const MotionRecording> recordings,
                              const Normalization& norm, std::size_t n = 100, ClockMode clock = ClockMode::Real,
                              double speed = 1.0, double mean_motion = 1.47);

void write_latency_csv(std::ostream& out, const LatencyReport& r);
void write_latency_text(std::ostream& out, const LatencyReport& r);

}  // namespace mrpd
