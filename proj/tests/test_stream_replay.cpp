#include <doctest.h>

#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include "mrpd/replay.hpp"
#include "mrpd/synth.hpp"

using namespace mrpd;

namespace {

std::vector<MotionRecording> desk_recordings(int per_region, std::uint64_t seed) {
  return generate_dataset(GeneratorParams::defaults(), per_region, seed);
}

// Motion frames only, every 10 ms from t = 0 to t = 0.5 s.
MotionRecording half_second_of_motion() {
  MotionRecording rec;
  rec.start = 0.0;
  rec.end = 0.5;
  for (int i = 0; i <= 50; ++i) {
    MotionFrame f;
    f.timestamp = float(i) * 0.01f;
    rec.motion.push_back(f);
  }
  return rec;
}

}  // namespace

TEST_CASE("schedule interleaves every frame in global timestamp order") {
  const auto rec = desk_recordings(1, 3).front();
  const auto events = schedule(rec);
  REQUIRE(events.size() == rec.face.size() + rec.depth.size() + rec.motion.size());
  std::size_t face = 0, depth = 0, motion = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i > 0) CHECK(events[i - 1].time <= events[i].time);
    // Within one stream, frames come out in their recorded order.
    switch (events[i].stream) {
      case Stream::Face: CHECK(events[i].index == face++); break;
      case Stream::Depth: CHECK(events[i].index == depth++); break;
      case Stream::Motion: CHECK(events[i].index == motion++); break;
    }
  }
}

TEST_CASE("schedule rejects unsorted streams") {
  auto rec = half_second_of_motion();
  std::swap(rec.motion[3], rec.motion[4]);
  CHECK_THROWS_AS(schedule(rec), ValidationError);
}

TEST_CASE("a window assembled from replayed frames is bit-identical to offline extraction") {
  const auto spec = GeneratorParams::defaults().window_spec();
  for (const auto& rec : desk_recordings(1, 11)) {
    const auto offline = extract_window(rec, spec);
    CHECK(replay_window(rec, spec) == offline);
  }
  // Real-time delivery changes when frames arrive, never which frames make the window.
  const auto rec = desk_recordings(1, 12)[4];
  CHECK(replay_window(rec, spec, ClockMode::Real, 20.0) == extract_window(rec, spec));
}

TEST_CASE("virtual-clock replay is deterministic") {
  const auto rec = desk_recordings(1, 5)[2];
  std::vector<FrameEvent> a, b;
  replay(rec, ClockMode::Virtual, [&](const FrameEvent& e) { a.push_back(e); return true; });
  replay(rec, ClockMode::Virtual, [&](const FrameEvent& e) { b.push_back(e); return true; });
  CHECK(a == b);
  CHECK(a == schedule(rec));
}

TEST_CASE("a sink returning false stops the replay") {
  const auto rec = half_second_of_motion();
  int delivered = 0;
  replay(rec, ClockMode::Virtual, [&](const FrameEvent&) { return ++delivered < 10; });
  CHECK(delivered == 10);
  CHECK_THROWS_AS(replay(rec, ClockMode::Virtual, [](const FrameEvent&) { return true; }, 0.0), ValidationError);
}

TEST_CASE("real-clock replay of half a second takes half a second") {
  const auto rec = half_second_of_motion();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> arrival;
  replay(rec, ClockMode::Real, [&](const FrameEvent&) {
    arrival.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return true;
  });
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(elapsed >= 0.45);
  CHECK(elapsed <= 0.55);
  // No frame is delivered ahead of its schedule.
  for (std::size_t i = 0; i < arrival.size(); ++i) CHECK(arrival[i] >= double(rec.motion[i].timestamp) - 1e-4);
}

TEST_CASE("frame buffer keeps only the window after the start annotation") {
  WindowSpec spec;
  spec.face_frames = 0;
  spec.depth_frames = 0;
  spec.motion_frames = 5;
  const auto rec = half_second_of_motion();
  FrameBuffer buffer(spec, 0.105);
  for (const auto& f : rec.motion) buffer.push(f);
  const auto snap = buffer.snapshot();
  REQUIRE(snap.motion.size() == 5);
  CHECK(snap.motion.front().timestamp == rec.motion[11].timestamp);
  CHECK(snap.motion.back().timestamp == rec.motion[15].timestamp);
  CHECK(buffer.complete());

  FrameBuffer partial(GeneratorParams::defaults().window_spec(), 0.0);
  partial.push(rec.motion[0]);
  CHECK_FALSE(partial.complete());
  CHECK_THROWS_AS(partial.window(Region::C, 0), TruncatedWindowError);
}

TEST_CASE("snapshots taken while a producer pushes are consistent") {
  const auto rec = desk_recordings(1, 21)[0];
  const auto spec = GeneratorParams::defaults().window_spec();
  FrameBuffer buffer(spec, rec.start);
  std::atomic<bool> done{false};
  std::thread producer([&] {
    replay(rec, ClockMode::Real, [&](const FrameEvent& e) { buffer.push(rec, e); return true; }, 10.0);
    done = true;
  });
  std::size_t last_motion = 0;
  bool ok = true;
  while (!done) {
    const auto snap = buffer.snapshot();
    ok = ok && snap.motion.size() >= last_motion && Eigen::Index(snap.motion.size()) <= spec.motion_frames &&
         Eigen::Index(snap.face.size()) <= spec.face_frames && Eigen::Index(snap.depth.size()) <= spec.depth_frames;
    for (std::size_t i = 1; i < snap.motion.size(); ++i) ok = ok && snap.motion[i - 1].timestamp < snap.motion[i].timestamp;
    last_motion = snap.motion.size();
  }
  producer.join();
  CHECK(ok);
  buffer.wait_complete();
  CHECK(buffer.window(rec.label, rec.id) == extract_window(rec, spec));
}

TEST_CASE("grace time subtracts window and inference from the mean motion") {
  const auto g = grace_time(1.47, 0.5, 0.0086);
  CHECK(g.seconds == doctest::Approx(0.9614).epsilon(1e-9));
  CHECK_FALSE(g.budget_exceeded);

  const auto worst = grace_time(1.33, 0.5, 0.022);
  CHECK(worst.seconds == doctest::Approx(0.808).epsilon(1e-9));

  const auto none = grace_time(1.0, 1.0, 0.0);
  CHECK(none.seconds == 0.0);
  CHECK(none.budget_exceeded);
  CHECK(grace_time(0.4, 0.5, 0.01).budget_exceeded);
  CHECK_THROWS_AS(grace_time(1.0, -0.1, 0.0), ValidationError);
}

TEST_CASE("latency harness times window completion to logits") {
  const auto recs = desk_recordings(1, 31);
  const auto norm = Normalization::fit(recs);
  const FusionModel<float> model(ModelConfig::desk());
  const auto report = measure_latency(model, recs, norm, 12, ClockMode::Virtual);
  REQUIRE(report.samples.size() == 12);
  CHECK(report.n == 12);
  CHECK(report.mean > 0.0);
  CHECK(report.mean <= report.max);
  CHECK(report.sd >= 0.0);
  CHECK(report.mean_assembly + report.mean_inference <= report.mean + 1e-12);
  CHECK(report.mean < 0.05);
  CHECK(report.window == doctest::Approx(0.5));
  CHECK(report.grace.seconds == doctest::Approx(1.47 - 0.5 - report.mean));

  std::ostringstream csv, text;
  write_latency_csv(csv, report);
  write_latency_text(text, report);
  CHECK(csv.str().find("grace_time,") != std::string::npos);
  CHECK(text.str().find("grace time") != std::string::npos);

  auto small = GeneratorParams::defaults();
  small.depth_h = 16;
  small.depth_w = 12;
  const auto wrong = generate_dataset(small, 1, 2);
  CHECK_THROWS_AS(measure_latency(model, wrong, norm, 1, ClockMode::Virtual), ValidationError);
}
