#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mrpd/data.hpp"

namespace mrpd {

using Vec3 = Eigen::Vector3d;

/// Reach-time distribution for one region, seconds.
struct ReachTime {
  double mean = 1.47;
  double sd = 0.25;
  double min = 0.9;
  bool operator==(const ReachTime&) const = default;
};

/// Descriptive reach-time statistics of the human recordings, indexed like Region.
struct ReferenceReachTime {
  int n;
  double mean, median, max, min, sd;
};
inline constexpr std::array<ReferenceReachTime, kNumRegions> kReferenceReachTimes = {{
    {173, 1.56, 1.56, 2.20, 1.10, 0.230},   // TL
    {169, 1.56, 1.50, 2.28, 0.969, 0.295},  // TC
    {171, 1.58, 1.56, 2.43, 1.07, 0.267},   // TR
    {174, 1.45, 1.46, 2.77, 1.00, 0.260},   // CL
    {172, 1.42, 1.37, 2.10, 0.900, 0.242},  // C
    {170, 1.48, 1.47, 2.38, 0.902, 0.289},  // CR
    {171, 1.44, 1.45, 1.97, 0.883, 0.219},  // BL
    {170, 1.33, 1.33, 1.93, 0.868, 0.227},  // BC
    {170, 1.37, 1.35, 2.57, 0.732, 0.285},  // BR
}};

/// Scene, kinematics and sensor settings for synthetic reaching motions.
///
/// World frame (meters): x toward the participant's right, y up, z forward toward the shelf.
/// The origin sits at sternum height on the body midline; the camera faces the participant from the shelf side.
struct GeneratorParams {
  std::array<Vec3, kNumRegions> targets;
  std::array<ReachTime, kNumRegions> reach_time;
  Vec3 shoulder{0.18, 0.0, 0.0};
  Vec3 rest{0.20, -0.45, 0.30};  // right hand on the knee
  Vec3 head{0.0, 0.28, -0.02};
  Vec3 camera{0.0, 0.0, 1.30};
  double upper_arm = 0.32;
  double forearm = 0.32;
  double arm_radius = 0.045;

  // Variability
  double target_jitter = 0.05;   // object position inside its region, per axis SD
  double rest_jitter = 0.03;     // hand placement on the knee, per axis SD
  int participants = 12;
  double participant_offset = 0.02;  // body placement SD, m
  double speed_sd = 0.06;            // per-participant relative reach-time factor SD

  // Head turn toward the target; it starts slightly before the hand and finishes early.
  double head_yaw_gain = 1.0;
  double head_pitch_gain = 0.9;
  double head_gain_sd = 0.10;
  double head_bias_sd = 0.05;   // rad
  double head_lead = 0.25;      // s before hand onset
  double head_fraction = 0.45;  // of the reach duration

  // Sensor noise
  double imu_acc_sd = 0.15;    // m/s²
  double imu_gyro_sd = 0.05;   // rad/s
  double imu_mag_sd = 0.01;    // Gauss
  double landmark_sd = 0.003;  // image-relative
  double depth_sd = 0.01;      // m
  double face_dropout = 0.02;  // probability a face frame has no detection

  // Timing
  double face_fps = 15.0;
  double depth_fps = 15.0;
  double motion_fps = 100.0;
  double lead_min = 0.25;  // recording time before onset
  double lead_max = 0.50;
  double tail = 0.10;      // recording time after the end annotation

  Eigen::Index depth_h = 64;
  Eigen::Index depth_w = 47;

  static GeneratorParams defaults();
  /// Same scene rendered at 256×188.
  static GeneratorParams full_size();
  /// Every noise source and every random variation switched off.
  GeneratorParams noiseless() const;

  WindowSpec window_spec() const;

  std::string to_json() const;
  static GeneratorParams from_json(const std::string& text);

  bool operator==(const GeneratorParams&) const = default;
};

/// Minimum-jerk point-to-point trajectory.
struct ReachPlan {
  Vec3 from = Vec3::Zero();
  Vec3 to = Vec3::Zero();
  double onset = 0.0;
  double duration = 1.0;

  /// Normalized phase in [0, 1].
  double phase(double t) const;
  Vec3 position(double t) const;
  Vec3 velocity(double t) const;
  Vec3 acceleration(double t) const;
};

/// Head yaw (about y, positive toward +x) and pitch (positive up), radians, following a minimum-jerk ramp.
struct HeadPlan {
  double yaw = 0.0, pitch = 0.0;
  double bias_yaw = 0.0, bias_pitch = 0.0;
  double onset = 0.0;
  double duration = 0.5;

  Eigen::Vector2d angles(double t) const;
};

/// Per-participant body and behavior offsets.
struct Participant {
  std::uint32_t id = 0;
  Vec3 offset = Vec3::Zero();
  double speed = 1.0;
  double head_gain = 1.0;
  double head_bias_yaw = 0.0, head_bias_pitch = 0.0;
};

Participant make_participant(const GeneratorParams& params, std::uint32_t id, std::uint64_t seed);

/// Everything needed to render one recording.
struct MotionScene {
  Region region = Region::C;
  Participant participant;
  ReachPlan reach;
  HeadPlan head;
  Vec3 shoulder = Vec3::Zero();
  double length = 0.0;  // recording length, s
  double phase_face = 0.0, phase_depth = 0.0, phase_motion = 0.0;
};

MotionScene plan_scene(const GeneratorParams& params, Region region, const Participant& who, std::mt19937_64& rng);

/// Elbow placement for a two-link arm reaching `wrist` from `shoulder`, bending down and outward.
Vec3 elbow_position(const GeneratorParams& params, const Vec3& shoulder, const Vec3& wrist);

/// Depth image of the scene at time t, meters. `arm_mask` (optional) receives 1 where the reaching arm is visible.
ImageF render_depth(const GeneratorParams& params, const MotionScene& scene, double t, std::mt19937_64* noise = nullptr,
                    ImageF* arm_mask = nullptr);

/// The 468-point rigid face template in head coordinates (meters), interleaved xyz.
const Eigen::VectorXd& face_template();

/// Image-relative landmarks for the head pose at time t.
Eigen::VectorXf render_face(const GeneratorParams& params, const MotionScene& scene, double t);

/// IMU reading at time t: magnetometer, angular velocity, acceleration (specific force), |acceleration|.
ImuVector imu_reading(const GeneratorParams& params, const MotionScene& scene, double t);

inline constexpr double kGravity = 9.81;

struct GeneratedRecording {
  MotionRecording recording;
  MotionScene scene;
};

/// Seed of the independent sub-stream used for recording `index` of a dataset.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

/// One recording drawn from the sub-stream `seed`. Without a participant, one is derived from the seed.
GeneratedRecording generate_recording(const GeneratorParams& params, Region region, std::uint64_t seed,
                                      std::uint32_t id = 0);
GeneratedRecording generate_recording(const GeneratorParams& params, Region region, const Participant& who,
                                      std::uint64_t seed, std::uint32_t id = 0);

/// Balanced dataset: `per_region` recordings for every region, in shuffled order, ids 0..N-1 in that order.
std::vector<MotionRecording> generate_dataset(const GeneratorParams& params, int per_region, std::uint64_t seed);

/// Streaming form of generate_dataset for when holding every recording at once is too costly.
void generate_dataset(const GeneratorParams& params, int per_region, std::uint64_t seed,
                      const std::function<void(MotionRecording&&)>& sink);

}  // namespace mrpd
