#include "mrpd/replay.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <thread>

namespace mrpd {

std::vector<FrameEvent> schedule(const MotionRecording& rec) {
  rec.validate();
  std::vector<FrameEvent> events;
  events.reserve(rec.face.size() + rec.depth.size() + rec.motion.size());
  for (std::size_t i = 0; i < rec.face.size(); ++i) events.push_back({Stream::Face, i, rec.face[i].timestamp});
  for (std::size_t i = 0; i < rec.depth.size(); ++i) events.push_back({Stream::Depth, i, rec.depth[i].timestamp});
  for (std::size_t i = 0; i < rec.motion.size(); ++i) events.push_back({Stream::Motion, i, rec.motion[i].timestamp});
  std::stable_sort(events.begin(), events.end(), [](const FrameEvent& a, const FrameEvent& b) { return a.time < b.time; });
  return events;
}

void replay(const MotionRecording& rec, ClockMode clock, const std::function<bool(const FrameEvent&)>& sink,
            double speed) {
  if (!(speed > 0.0)) throw ValidationError("replay speed must be positive");
  const auto events = schedule(rec);
  if (events.empty()) return;
  const auto t0 = std::chrono::steady_clock::now();
  const double first = events.front().time;
  for (const auto& e : events) {
    if (clock == ClockMode::Real) {
      const auto due = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                std::chrono::duration<double>((e.time - first) / speed));
      std::this_thread::sleep_until(due);
    }
    if (!sink(e)) return;
  }
}

// ---------------------------------------------------------------------------

FrameBuffer::FrameBuffer(const WindowSpec& spec, double start) : spec_(spec), start_(start) {}

template <typename Frame>
void FrameBuffer::add(std::vector<Frame>& dst, const Frame& f, Eigen::Index limit) {
  if (double(f.timestamp) < start_) return;
  {
    std::lock_guard lock(mutex_);
    if (Eigen::Index(dst.size()) >= limit) return;
    dst.push_back(f);
    if (completed_at_ || Eigen::Index(frames_.face.size()) < spec_.face_frames ||
        Eigen::Index(frames_.depth.size()) < spec_.depth_frames ||
        Eigen::Index(frames_.motion.size()) < spec_.motion_frames)
      return;
    completed_at_ = Clock::now();
  }
  ready_.notify_all();
}

void FrameBuffer::push(const FaceFrame& f) { add(frames_.face, f, spec_.face_frames); }
void FrameBuffer::push(const DepthFrame& f) { add(frames_.depth, f, spec_.depth_frames); }
void FrameBuffer::push(const MotionFrame& f) { add(frames_.motion, f, spec_.motion_frames); }

void FrameBuffer::push(const MotionRecording& rec, const FrameEvent& e) {
  switch (e.stream) {
    case Stream::Face: push(rec.face.at(e.index)); break;
    case Stream::Depth: push(rec.depth.at(e.index)); break;
    case Stream::Motion: push(rec.motion.at(e.index)); break;
  }
}

bool FrameBuffer::complete() const {
  std::lock_guard lock(mutex_);
  return completed_at_.has_value();
}

FrameBuffer::Clock::time_point FrameBuffer::wait_complete() const {
  std::unique_lock lock(mutex_);
  ready_.wait(lock, [this] { return completed_at_.has_value(); });
  return *completed_at_;
}

FrameBuffer::Snapshot FrameBuffer::snapshot() const {
  std::lock_guard lock(mutex_);
  return frames_;
}

SampleWindow FrameBuffer::window(Region label, std::uint32_t recording_id) const {
  std::lock_guard lock(mutex_);
  if (!completed_at_)
    throw TruncatedWindowError("frame buffer holds " + std::to_string(frames_.face.size()) + " face, " +
                               std::to_string(frames_.depth.size()) + " depth, " +
                               std::to_string(frames_.motion.size()) + " motion frames; window incomplete");
  return assemble_window(frames_.face, frames_.depth, frames_.motion, spec_, label, recording_id);
}

SampleWindow replay_window(const MotionRecording& rec, const WindowSpec& spec, ClockMode clock, double speed) {
  FrameBuffer buffer(spec, rec.start);
  replay(
      rec, clock,
      [&](const FrameEvent& e) {
        buffer.push(rec, e);
        return !buffer.complete();
      },
      speed);
  return buffer.window(rec.label, rec.id);
}

// ---------------------------------------------------------------------------

GraceTime grace_time(double mean_motion, double window, double inference) {
  if (!(mean_motion >= 0.0) || !(window >= 0.0) || !(inference >= 0.0))
    throw ValidationError("grace time inputs must be non-negative");
  GraceTime g;
  g.seconds = mean_motion - window - inference;
  g.budget_exceeded = g.seconds <= 0.0;
  return g;
}

LatencyReport measure_latency(const FusionModel<float>& model, std::span<const MotionRecording> recordings,
                              const Normalization& norm, std::size_t n, ClockMode clock, double speed,
                              double mean_motion) {
  if (recordings.empty() || n == 0) throw ValidationError("latency measurement needs recordings and n > 0");
  const auto& cfg = model.config();
  WindowSpec spec;
  spec.face_frames = cfg.face_frames;
  spec.depth_frames = cfg.depth_frames;
  spec.motion_frames = cfg.motion_frames;
  spec.depth_h = cfg.depth_h;
  spec.depth_w = cfg.depth_w;
  for (const auto& r : recordings)
    if (r.depth_h() != cfg.depth_h || r.depth_w() != cfg.depth_w)
      throw ValidationError("recording " + std::to_string(r.id) + " depth frames are " + std::to_string(r.depth_h()) +
                            "x" + std::to_string(r.depth_w()) + ", model expects " + std::to_string(cfg.depth_h) +
                            "x" + std::to_string(cfg.depth_w));

  LatencyReport report;
  report.n = n;
  report.mean_motion = mean_motion;
  report.window = double(cfg.motion_frames) / 100.0;
  double assembly = 0.0, inference = 0.0;
  for (std::size_t run = 0; run < n; ++run) {
    const auto& rec = recordings[run % recordings.size()];
    FrameBuffer buffer(spec, rec.start);
    // The producer delivers frames on its own thread; this thread is the inference consumer.
    std::thread producer([&] {
      replay(
          rec, clock,
          [&](const FrameEvent& e) {
            buffer.push(rec, e);
            return !buffer.complete();
          },
          speed);
    });
    const auto t_complete = buffer.wait_complete();
    const auto window = buffer.window(rec.label, rec.id);
    const SampleWindow* ptr = &window;
    const auto batch = make_batch<float>(std::span<const SampleWindow* const>(&ptr, 1), cfg, norm, model.modalities());
    const auto t_ready = FrameBuffer::Clock::now();
    const auto logits = model.predict(batch);
    const auto t_done = FrameBuffer::Clock::now();
    producer.join();
    if (logits.size() != cfg.num_classes) throw ContractError("latency run produced malformed logits");
    const double total = std::chrono::duration<double>(t_done - t_complete).count();
    assembly += std::chrono::duration<double>(t_ready - t_complete).count();
    inference += std::chrono::duration<double>(t_done - t_ready).count();
    report.samples.push_back(total);
  }
  report.mean_assembly = assembly / double(n);
  report.mean_inference = inference / double(n);
  double sum = 0.0;
  for (double s : report.samples) sum += s;
  report.mean = sum / double(n);
  double ss = 0.0;
  for (double s : report.samples) ss += (s - report.mean) * (s - report.mean);
  report.sd = n > 1 ? std::sqrt(ss / double(n - 1)) : 0.0;
  report.max = *std::max_element(report.samples.begin(), report.samples.end());
  report.grace = grace_time(mean_motion, report.window, report.mean);
  return report;
}

void write_latency_csv(std::ostream& out, const LatencyReport& r) {
  out << std::setprecision(6) << "statistic,measured_s,paper_s\n";
  out << "n," << r.n << ",100\n";
  out << "mean," << r.mean << ',' << LatencyReport::kPaperMean << '\n';
  out << "sd," << r.sd << ',' << LatencyReport::kPaperSd << '\n';
  out << "max," << r.max << ',' << LatencyReport::kPaperMax << '\n';
  out << "mean_assembly," << r.mean_assembly << ",\n";
  out << "mean_inference," << r.mean_inference << ",\n";
  out << "grace_time," << r.grace.seconds << ',' << LatencyReport::kPaperGrace << '\n';
  out << "budget_exceeded," << int(r.grace.budget_exceeded) << ",0\n";
}

void write_latency_text(std::ostream& out, const LatencyReport& r) {
  out << std::fixed << std::setprecision(4);
  out << "prediction latency over " << r.n << " runs (window complete -> logits)\n";
  out << "  mean " << r.mean << " s   (paper " << LatencyReport::kPaperMean << " s)\n";
  out << "  sd   " << r.sd << " s   (paper " << LatencyReport::kPaperSd << " s)\n";
  out << "  max  " << r.max << " s   (paper " << LatencyReport::kPaperMax << " s)\n";
  out << "  of which assembly " << r.mean_assembly << " s, inference " << r.mean_inference << " s\n";
  out << "grace time " << r.mean_motion << " - " << r.window << " - " << r.mean << " = " << r.grace.seconds << " s"
      << "   (paper " << LatencyReport::kPaperGrace << " s)" << (r.grace.budget_exceeded ? "  BUDGET EXCEEDED" : "")
      << '\n';
}

}  // namespace mrpd
