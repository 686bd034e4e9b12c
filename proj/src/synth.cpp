#include "mrpd/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mrpd {

using nlohmann::json;

namespace {

// Minimum-jerk shape s(τ) = 10τ³ − 15τ⁴ + 6τ⁵ and its derivatives with respect to τ.
double mj(double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }
double mj_d1(double u) { return 30.0 * u * u * (1.0 - u) * (1.0 - u); }
double mj_d2(double u) { return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u); }

double unit_phase(double t, double onset, double duration) { return std::clamp((t - onset) / duration, 0.0, 1.0); }

Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, std::cos(a), std::sin(a), 0, -std::sin(a), std::cos(a);
  return r;
}

double gauss(std::mt19937_64& rng, double sd) {
  if (sd <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sd)(rng);
}

Vec3 gauss3(std::mt19937_64& rng, double sd) { return {gauss(rng, sd), gauss(rng, sd), gauss(rng, sd)}; }

// The torso leans a little toward the target as the reach progresses.
Vec3 torso_shift(const MotionScene& scene, double t) {
  const Vec3 d = scene.reach.to - scene.reach.from;
  return 0.06 * mj(scene.reach.phase(t)) * Vec3(d.x(), 0.0, d.z());
}

const Vec3 kEarthField{0.0, -0.35, 0.25};  // Gauss, world frame

struct Camera {
  Vec3 origin;
  double f, cx, cy;

  Camera(const GeneratorParams& p, Eigen::Index h, Eigen::Index w)
      : origin(p.camera), f(0.75 * double(h)), cx(0.5 * double(w - 1)), cy(0.5 * double(h - 1)) {}

  double distance(const Vec3& p) const { return origin.z() - p.z(); }
  // The camera faces the participant, so the participant's right appears on the image left.
  double col(const Vec3& p) const { return cx - f * (p.x() - origin.x()) / distance(p); }
  double row(const Vec3& p) const { return cy - f * (p.y() - origin.y()) / distance(p); }
};

class DepthCanvas {
 public:
  DepthCanvas(const Camera& cam, Eigen::Index h, Eigen::Index w, double background)
      : cam_(cam), depth_(ImageF::Constant(h, w, float(background))), owner_(Eigen::MatrixXi::Zero(h, w)) {}

  void sphere(const Vec3& c, double r, int id) {
    const double d = cam_.distance(c);
    if (d <= r) return;
    const double u = cam_.col(c), v = cam_.row(c), rp = cam_.f * r / d, scale = d / cam_.f;
    const auto r0 = std::max<Eigen::Index>(0, Eigen::Index(std::floor(v - rp)));
    const auto r1 = std::min<Eigen::Index>(depth_.rows() - 1, Eigen::Index(std::ceil(v + rp)));
    const auto c0 = std::max<Eigen::Index>(0, Eigen::Index(std::floor(u - rp)));
    const auto c1 = std::min<Eigen::Index>(depth_.cols() - 1, Eigen::Index(std::ceil(u + rp)));
    for (Eigen::Index y = r0; y <= r1; ++y)
      for (Eigen::Index x = c0; x <= c1; ++x) {
        const double rho2 = ((double(x) - u) * (double(x) - u) + (double(y) - v) * (double(y) - v)) * scale * scale;
        if (rho2 >= r * r) continue;
        const double z = d - std::sqrt(r * r - rho2);
        if (z < depth_(y, x)) {
          depth_(y, x) = float(z);
          owner_(y, x) = id;
        }
      }
  }

  void capsule(const Vec3& a, const Vec3& b, double r, int id) {
    const int steps = std::max(1, int(std::ceil((b - a).norm() / (0.5 * r))));
    for (int i = 0; i <= steps; ++i) sphere(a + (b - a) * (double(i) / steps), r, id);
  }

  /// Axis-aligned rectangle facing the camera at depth plane z.
  void panel(double x0, double x1, double y0, double y1, double z, int id) {
    const Vec3 a(x0, y1, z), b(x1, y0, z);
    const double d = cam_.distance(a);
    auto cmin = std::min(cam_.col(a), cam_.col(b)), cmax = std::max(cam_.col(a), cam_.col(b));
    auto rmin = std::min(cam_.row(a), cam_.row(b)), rmax = std::max(cam_.row(a), cam_.row(b));
    for (Eigen::Index y = std::max<Eigen::Index>(0, Eigen::Index(std::ceil(rmin)));
         y <= std::min<Eigen::Index>(depth_.rows() - 1, Eigen::Index(std::floor(rmax))); ++y)
      for (Eigen::Index x = std::max<Eigen::Index>(0, Eigen::Index(std::ceil(cmin)));
           x <= std::min<Eigen::Index>(depth_.cols() - 1, Eigen::Index(std::floor(cmax))); ++x)
        if (d < depth_(y, x)) {
          depth_(y, x) = float(d);
          owner_(y, x) = id;
        }
  }

  ImageF& depth() { return depth_; }
  const Eigen::MatrixXi& owner() const { return owner_; }

 private:
  const Camera& cam_;
  ImageF depth_;
  Eigen::MatrixXi owner_;
};

constexpr int kBody = 1, kArm = 2;

Vec3 vec3_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

// ---------------------------------------------------------------------------

GeneratorParams GeneratorParams::defaults() {
  GeneratorParams p;
  // Shelf regions: columns left/center/right, rows top/center/bottom, on a plane in front of the participant.
  const double xs[3] = {-0.30, 0.0, 0.30};
  const double ys[3] = {0.35, 0.05, -0.25};
  for (int i = 0; i < kNumRegions; ++i) {
    p.targets[static_cast<std::size_t>(i)] = Vec3(xs[i % 3], ys[i / 3], 0.50);
    const auto& ref = kReferenceReachTimes[static_cast<std::size_t>(i)];
    p.reach_time[static_cast<std::size_t>(i)] = {ref.mean, ref.sd, ref.min};
  }
  return p;
}

GeneratorParams GeneratorParams::full_size() {
  auto p = defaults();
  p.depth_h = 256;
  p.depth_w = 188;
  return p;
}

GeneratorParams GeneratorParams::noiseless() const {
  auto p = *this;
  p.target_jitter = p.rest_jitter = 0.0;
  p.participant_offset = p.speed_sd = 0.0;
  p.head_gain_sd = p.head_bias_sd = 0.0;
  p.imu_acc_sd = p.imu_gyro_sd = p.imu_mag_sd = 0.0;
  p.landmark_sd = p.depth_sd = p.face_dropout = 0.0;
  return p;
}

WindowSpec GeneratorParams::window_spec() const {
  WindowSpec w;
  w.depth_h = depth_h;
  w.depth_w = depth_w;
  return w;
}

std::string GeneratorParams::to_json() const {
  json j;
  j["targets"] = json::array();
  j["reach_time"] = json::array();
  for (int i = 0; i < kNumRegions; ++i) {
    const auto& rt = reach_time[static_cast<std::size_t>(i)];
    j["targets"].push_back(targets[static_cast<std::size_t>(i)]);
    j["reach_time"].push_back({{"region", region_name(Region(i))}, {"mean", rt.mean}, {"sd", rt.sd}, {"min", rt.min}});
  }
  j["shoulder"] = shoulder;
  j["rest"] = rest;
  j["head"] = head;
  j["camera"] = camera;
  j["upper_arm"] = upper_arm;
  j["forearm"] = forearm;
  j["arm_radius"] = arm_radius;
  j["target_jitter"] = target_jitter;
  j["rest_jitter"] = rest_jitter;
  j["participants"] = participants;
  j["participant_offset"] = participant_offset;
  j["speed_sd"] = speed_sd;
  j["head_yaw_gain"] = head_yaw_gain;
  j["head_pitch_gain"] = head_pitch_gain;
  j["head_gain_sd"] = head_gain_sd;
  j["head_bias_sd"] = head_bias_sd;
  j["head_lead"] = head_lead;
  j["head_fraction"] = head_fraction;
  j["imu_acc_sd"] = imu_acc_sd;
  j["imu_gyro_sd"] = imu_gyro_sd;
  j["imu_mag_sd"] = imu_mag_sd;
  j["landmark_sd"] = landmark_sd;
  j["depth_sd"] = depth_sd;
  j["face_dropout"] = face_dropout;
  j["face_fps"] = face_fps;
  j["depth_fps"] = depth_fps;
  j["motion_fps"] = motion_fps;
  j["lead_min"] = lead_min;
  j["lead_max"] = lead_max;
  j["tail"] = tail;
  j["depth_h"] = depth_h;
  j["depth_w"] = depth_w;
  return j.dump(2);
}

GeneratorParams GeneratorParams::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("generator params: ") + e.what());
  }
  auto p = j.value("full_size", false) ? full_size() : defaults();
  if (j.contains("targets")) {
    if (j["targets"].size() != kNumRegions) throw ValidationError("generator params: need 9 targets");
    for (int i = 0; i < kNumRegions; ++i) p.targets[static_cast<std::size_t>(i)] = vec3_from(j["targets"][i]);
  }
  if (j.contains("reach_time")) {
    if (j["reach_time"].size() != kNumRegions) throw ValidationError("generator params: need 9 reach times");
    for (int i = 0; i < kNumRegions; ++i) {
      const auto& r = j["reach_time"][i];
      p.reach_time[static_cast<std::size_t>(i)] = {r.at("mean").get<double>(), r.at("sd").get<double>(),
                                                    r.at("min").get<double>()};
    }
  }
  auto vec = [&j](const char* key, Vec3& v) {
    if (j.contains(key)) v = vec3_from(j[key]);
  };
  auto num = [&j](const char* key, auto& v) {
    if (j.contains(key)) v = j[key].get<std::decay_t<decltype(v)>>();
  };
  vec("shoulder", p.shoulder);
  vec("rest", p.rest);
  vec("head", p.head);
  vec("camera", p.camera);
  num("upper_arm", p.upper_arm);
  num("forearm", p.forearm);
  num("arm_radius", p.arm_radius);
  num("target_jitter", p.target_jitter);
  num("rest_jitter", p.rest_jitter);
  num("participants", p.participants);
  num("participant_offset", p.participant_offset);
  num("speed_sd", p.speed_sd);
  num("head_yaw_gain", p.head_yaw_gain);
  num("head_pitch_gain", p.head_pitch_gain);
  num("head_gain_sd", p.head_gain_sd);
  num("head_bias_sd", p.head_bias_sd);
  num("head_lead", p.head_lead);
  num("head_fraction", p.head_fraction);
  num("imu_acc_sd", p.imu_acc_sd);
  num("imu_gyro_sd", p.imu_gyro_sd);
  num("imu_mag_sd", p.imu_mag_sd);
  num("landmark_sd", p.landmark_sd);
  num("depth_sd", p.depth_sd);
  num("face_dropout", p.face_dropout);
  num("face_fps", p.face_fps);
  num("depth_fps", p.depth_fps);
  num("motion_fps", p.motion_fps);
  num("lead_min", p.lead_min);
  num("lead_max", p.lead_max);
  num("tail", p.tail);
  num("depth_h", p.depth_h);
  num("depth_w", p.depth_w);

  for (const auto& rt : p.reach_time)
    if (!(rt.sd >= 0.0) || !(rt.mean > 0.0)) throw ValidationError("generator params: reach times need mean > 0, SD >= 0");
  for (double sd : {p.target_jitter, p.rest_jitter, p.participant_offset, p.speed_sd, p.head_gain_sd, p.head_bias_sd,
                    p.imu_acc_sd, p.imu_gyro_sd, p.imu_mag_sd, p.landmark_sd, p.depth_sd})
    if (!(sd >= 0.0)) throw ValidationError("generator params: standard deviations must be >= 0");
  if (p.participants < 1) throw ValidationError("generator params: need at least one participant");
  if (!(p.lead_min >= 0.0 && p.lead_max >= p.lead_min)) throw ValidationError("generator params: bad lead interval");
  return p;
}

// ---------------------------------------------------------------------------

double ReachPlan::phase(double t) const { return unit_phase(t, onset, duration); }

Vec3 ReachPlan::position(double t) const { return from + (to - from) * mj(phase(t)); }

Vec3 ReachPlan::velocity(double t) const {
  if (t <= onset || t >= onset + duration) return Vec3::Zero();
  return (to - from) * (mj_d1(phase(t)) / duration);
}

Vec3 ReachPlan::acceleration(double t) const {
  if (t <= onset || t >= onset + duration) return Vec3::Zero();
  return (to - from) * (mj_d2(phase(t)) / (duration * duration));
}

Eigen::Vector2d HeadPlan::angles(double t) const {
  const double s = mj(unit_phase(t, onset, duration));
  return {bias_yaw + yaw * s, bias_pitch + pitch * s};
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 over (seed, index)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Participant make_participant(const GeneratorParams& params, std::uint32_t id, std::uint64_t seed) {
  std::mt19937_64 rng(substream_seed(seed ^ 0x5041525449434950ull, id));
  Participant p;
  p.id = id;
  p.offset = gauss3(rng, params.participant_offset);
  p.speed = std::max(0.7, 1.0 + gauss(rng, params.speed_sd));
  p.head_gain = std::max(0.2, 1.0 + gauss(rng, params.head_gain_sd));
  p.head_bias_yaw = gauss(rng, params.head_bias_sd);
  p.head_bias_pitch = gauss(rng, params.head_bias_sd);
  return p;
}

MotionScene plan_scene(const GeneratorParams& params, Region region, const Participant& who, std::mt19937_64& rng) {
  MotionScene s;
  s.region = region;
  s.participant = who;
  s.shoulder = params.shoulder + who.offset;

  const auto& rt = params.reach_time[static_cast<std::size_t>(region_index(region))];
  const double duration = std::max(rt.min, rt.mean + gauss(rng, rt.sd) * 1.0) * who.speed;
  const double lead = std::uniform_real_distribution<double>(params.lead_min, params.lead_max)(rng);
  s.reach.from = params.rest + who.offset + gauss3(rng, params.rest_jitter);
  s.reach.to = params.targets[static_cast<std::size_t>(region_index(region))] + gauss3(rng, params.target_jitter);
  s.reach.onset = lead;
  s.reach.duration = duration;

  const Vec3 head = params.head + who.offset;
  const Vec3 look = s.reach.to - head;
  s.head.yaw = params.head_yaw_gain * who.head_gain * std::atan2(look.x(), look.z());
  s.head.pitch = params.head_pitch_gain * who.head_gain * std::atan2(look.y(), std::hypot(look.x(), look.z()));
  s.head.bias_yaw = who.head_bias_yaw;
  s.head.bias_pitch = who.head_bias_pitch;
  s.head.onset = std::max(0.0, lead - params.head_lead);
  s.head.duration = params.head_fraction * duration;

  s.length = lead + duration + params.tail;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  s.phase_face = unit(rng) / params.face_fps;
  s.phase_depth = unit(rng) / params.depth_fps;
  s.phase_motion = unit(rng) / params.motion_fps;
  return s;
}

Vec3 elbow_position(const GeneratorParams& params, const Vec3& shoulder, const Vec3& wrist) {
  const double l1 = params.upper_arm, l2 = params.forearm;
  const Vec3 span = wrist - shoulder;
  const double d = span.norm();
  if (d < 1e-9) return shoulder + Vec3(0, -l1, 0);
  const Vec3 dir = span / d;
  if (d >= l1 + l2) return shoulder + dir * (l1 * d / (l1 + l2));
  const double a = (l1 * l1 - l2 * l2 + d * d) / (2.0 * d);
  const double h = std::sqrt(std::max(0.0, l1 * l1 - a * a));
  Vec3 bend = Vec3(0.3, -1.0, 0.0).normalized();
  bend -= bend.dot(dir) * dir;
  if (bend.norm() < 1e-9) bend = Vec3(1.0, 0.0, 0.0) - dir.x() * dir;
  return shoulder + a * dir + h * bend.normalized();
}

ImageF render_depth(const GeneratorParams& params, const MotionScene& scene, double t, std::mt19937_64* noise,
                    ImageF* arm_mask) {
  const Camera cam(params, params.depth_h, params.depth_w);
  DepthCanvas canvas(cam, params.depth_h, params.depth_w, params.camera.z() + 1.2);
  const Vec3 lean = torso_shift(scene, t);
  const Vec3 body = scene.participant.offset + lean;

  // Static body: torso, head, legs, the resting left arm.
  canvas.panel(-0.19 + body.x(), 0.19 + body.x(), -0.45 + body.y(), 0.18 + body.y(), -0.08 + body.z(), kBody);
  canvas.sphere(params.head + body, 0.10, kBody);
  const Vec3 legs = scene.participant.offset;
  for (double side : {-1.0, 1.0}) {
    const Vec3 hip(0.10 * side, -0.50, -0.05), knee(0.12 * side, -0.52, 0.38), ankle(0.12 * side, -0.95, 0.42);
    canvas.capsule(hip + legs, knee + legs, 0.07, kBody);
    canvas.capsule(knee + legs, ankle + legs, 0.05, kBody);
  }
  const Vec3 l_shoulder = Vec3(-params.shoulder.x(), params.shoulder.y(), params.shoulder.z()) + body;
  const Vec3 l_wrist = Vec3(-params.rest.x(), params.rest.y(), params.rest.z()) + legs;
  const Vec3 l_elbow = elbow_position(params, l_shoulder, l_wrist);
  canvas.capsule(l_shoulder, l_elbow, params.arm_radius, kBody);
  canvas.capsule(l_elbow, l_wrist, params.arm_radius, kBody);

  // Reaching right arm.
  const Vec3 shoulder = scene.shoulder + lean;
  const Vec3 wrist = scene.reach.position(t);
  const Vec3 elbow = elbow_position(params, shoulder, wrist);
  canvas.capsule(shoulder, elbow, params.arm_radius, kArm);
  canvas.capsule(elbow, wrist, params.arm_radius, kArm);
  canvas.sphere(wrist, params.arm_radius + 0.01, kArm);

  if (arm_mask) *arm_mask = (canvas.owner().array() == kArm).cast<float>().matrix();
  ImageF img = std::move(canvas.depth());
  if (noise && params.depth_sd > 0.0) {
    std::normal_distribution<float> n(0.f, float(params.depth_sd));
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = std::max(0.f, img.data()[i] + n(*noise));
  }
  return img;
}

const Eigen::VectorXd& face_template() {
  static const Eigen::VectorXd points = [] {
    // Fibonacci lattice over the front half of an ellipsoid, with a nose ridge.
    Eigen::VectorXd p(kFaceCoords);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (Eigen::Index i = 0; i < kLandmarks; ++i) {
      const double z = 1.0 - (double(i) + 0.5) / double(kLandmarks);
      const double r = std::sqrt(1.0 - z * z);
      const double x = r * std::cos(golden * double(i)), y = r * std::sin(golden * double(i));
      const double X = 0.075 * x, Y = 0.10 * y;
      const double nose = 0.025 * std::exp(-(X * X + (Y + 0.01) * (Y + 0.01)) / 4e-4);
      p.segment<3>(3 * i) = Eigen::Vector3d(X, Y, 0.06 * z + nose);
    }
    return p;
  }();
  return points;
}

Eigen::VectorXf render_face(const GeneratorParams& params, const MotionScene& scene, double t) {
  const Eigen::Vector2d ang = scene.head.angles(t);
  const Eigen::Matrix3d rot = rot_y(ang.x()) * rot_x(ang.y());
  const Vec3 center = params.head + scene.participant.offset + torso_shift(scene, t);
  // Color camera: 90° × 59° field of view, coordinates normalized to the image size.
  const double fu = 0.5 / std::tan(std::numbers::pi / 4.0), fv = 0.5 / std::tan(29.5 * std::numbers::pi / 180.0);
  const auto& tpl = face_template();
  Eigen::VectorXf out(kFaceCoords);
  for (Eigen::Index i = 0; i < kLandmarks; ++i) {
    const Vec3 local = rot * tpl.segment<3>(3 * i);
    const Vec3 p = center + local;
    const double d = params.camera.z() - p.z();
    out[3 * i] = float(0.5 - fu * (p.x() - params.camera.x()) / d);
    out[3 * i + 1] = float(0.5 - fv * (p.y() - params.camera.y()) / d);
    out[3 * i + 2] = float(-fu * local.z() / d);
  }
  return out;
}

ImuVector imu_reading(const GeneratorParams& params, const MotionScene& scene, double t) {
  (void)params;
  const Vec3 shoulder = scene.shoulder + torso_shift(scene, t);
  const Vec3 p = scene.reach.position(t), v = scene.reach.velocity(t), a = scene.reach.acceleration(t);
  const Vec3 rel = p - shoulder;
  const Vec3 omega = rel.cross(v) / rel.squaredNorm();
  const double yaw = std::atan2(rel.x(), rel.z());
  const double elevation = std::atan2(rel.y(), std::hypot(rel.x(), rel.z()));
  const Vec3 mag = rot_x(elevation) * rot_y(-yaw) * kEarthField;
  const Vec3 acc = a + Vec3(0.0, kGravity, 0.0);
  ImuVector out;
  out << mag.cast<float>(), omega.cast<float>(), acc.cast<float>(), float(acc.norm());
  return out;
}

// ---------------------------------------------------------------------------

GeneratedRecording generate_recording(const GeneratorParams& params, Region region, std::uint64_t seed,
                                      std::uint32_t id) {
  return generate_recording(params, region, make_participant(params, 0, seed), seed, id);
}

GeneratedRecording generate_recording(const GeneratorParams& params, Region region, const Participant& who,
                                      std::uint64_t seed, std::uint32_t id) {
  std::mt19937_64 rng(seed);
  GeneratedRecording g;
  g.scene = plan_scene(params, region, who, rng);
  const auto& s = g.scene;
  auto& rec = g.recording;
  rec.id = id;
  rec.participant = who.id;
  rec.label = region;
  rec.start = s.reach.onset;
  rec.end = s.reach.onset + s.reach.duration;

  std::bernoulli_distribution dropped(params.face_dropout);
  for (double t = s.phase_face; t <= s.length; t += 1.0 / params.face_fps) {
    FaceFrame f;
    f.timestamp = float(t);
    f.elapsed = float(t - rec.start);
    f.present = !(params.face_dropout > 0.0 && dropped(rng));
    if (f.present) {
      f.landmarks = render_face(params, s, t);
      if (params.landmark_sd > 0.0) {
        std::normal_distribution<float> n(0.f, float(params.landmark_sd));
        for (Eigen::Index i = 0; i < f.landmarks.size(); ++i) f.landmarks[i] += n(rng);
      }
    }
    rec.face.push_back(std::move(f));
  }
  for (double t = s.phase_depth; t <= s.length; t += 1.0 / params.depth_fps) {
    DepthFrame d;
    d.timestamp = float(t);
    d.elapsed = float(t - rec.start);
    d.image = render_depth(params, s, t, &rng);
    rec.depth.push_back(std::move(d));
  }
  for (double t = s.phase_motion; t <= s.length; t += 1.0 / params.motion_fps) {
    MotionFrame m;
    m.timestamp = float(t);
    m.elapsed = float(t - rec.start);
    m.channels = imu_reading(params, s, t);
    if (params.imu_mag_sd > 0.0 || params.imu_gyro_sd > 0.0 || params.imu_acc_sd > 0.0) {
      for (int c = 0; c < 3; ++c) {
        m.channels[c] += float(gauss(rng, params.imu_mag_sd));
        m.channels[3 + c] += float(gauss(rng, params.imu_gyro_sd));
        m.channels[6 + c] += float(gauss(rng, params.imu_acc_sd));
      }
      m.channels[9] = m.channels.segment<3>(6).norm();
    }
    rec.motion.push_back(m);
  }
  return g;
}

void generate_dataset(const GeneratorParams& params, int per_region, std::uint64_t seed,
                      const std::function<void(MotionRecording&&)>& sink) {
  if (per_region < 1) throw ValidationError("generator: per-region count must be at least 1");
  std::vector<Region> labels;
  for (Region r : kAllRegions)
    for (int i = 0; i < per_region; ++i) labels.push_back(r);
  std::mt19937_64 order(seed);
  std::shuffle(labels.begin(), labels.end(), order);

  std::vector<Participant> people;
  for (int p = 0; p < params.participants; ++p) people.push_back(make_participant(params, std::uint32_t(p), seed));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& who = people[i % people.size()];
    sink(generate_recording(params, labels[i], who, substream_seed(seed, i), std::uint32_t(i)).recording);
  }
}

std::vector<MotionRecording> generate_dataset(const GeneratorParams& params, int per_region, std::uint64_t seed) {
  std::vector<MotionRecording> out;
  out.reserve(static_cast<std::size_t>(per_region) * kNumRegions);
  generate_dataset(params, per_region, seed, [&out](MotionRecording&& r) { out.push_back(std::move(r)); });
  return out;
}

}  // namespace mrpd
