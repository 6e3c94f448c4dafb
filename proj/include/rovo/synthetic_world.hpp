#pragma once

#include <cstdint>
#include <vector>

#include "rovo/rig.hpp"

namespace rovo {

enum class TrajectoryShape { Straight, Circle, Lawnmower };

struct SceneSpec {
  TrajectoryShape shape = TrajectoryShape::Circle;
  int frames = 300;
  double frame_rate = 10.0;        // Hz
  double circle_radius = 55.7;     // m (circle)
  double path_length = 350.0;      // m (straight / lawnmower)
  double lawnmower_row_length = 60.0;
  double lawnmower_row_spacing = 12.0;
  double landmark_density = 2.0;   // static landmarks per meter of path
  double wall_offset = 10.0;       // lateral distance of the facade walls
  double wall_height = 8.0;
  double ground_fraction = 0.3;    // share of landmarks on the ground plane
  double body_height = 1.5;        // rig origin above the ground
  int dynamic_count = 0;           // moving point clusters
  double dynamic_speed = 8.0;      // m/s
  uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

// A moving point: position(t) = start + velocity * t.
struct DynamicTrack {
  int64_t id = 0;
  Vector3d start{0, 0, 0};
  Vector3d velocity{0, 0, 0};
};

struct SyntheticScene {
  std::vector<std::pair<int64_t, Vector3d>> landmarks;  // static, ids ascending
  std::vector<DynamicTrack> dynamic;
  std::vector<RigidTransform> trajectory;  // per frame, body-in-world (T_wb)
  double frame_rate = 10.0;

  int frame_count() const { return static_cast<int>(trajectory.size()); }
  double time_of(int frame) const { return frame / frame_rate; }
  RigidTransform body_from_world(int frame) const;  // T_bw
};

// Track ids at or above this value belong to dynamic points.
inline constexpr int64_t kDynamicTrackBase = INT64_C(1) << 40;

// Deterministic scene from the spec's seed: landmarks on two facade walls
// flanking the path plus the ground plane, optional constant-velocity point
// clusters crossing the path.
SyntheticScene generate_scene(const SceneSpec& spec);

// One tracked bearing. (frame, cam, track) is unique; the track id is what a
// feature tracker would report and lies about under outlier corruption.
struct Observation {
  int frame = 0;
  int cam = 0;
  int64_t track = 0;
  UnitRay bearing;  // camera frame
};

// Projects every visible scene point (range <= 100 m, incidence within the
// lens FOV) into each camera, perturbs bearings with tangent-plane Gaussian
// noise of std noise_sigma (radians), and corrupts the track ids of a
// uniform outlier_rate fraction of the static observations by shuffling them
// within the frame. Dynamic points keep their own (stale) ids.
std::vector<Observation> observe_frame(const SyntheticScene& scene, const RigConfig& rig,
                                       int frame, double noise_sigma, double outlier_rate,
                                       Rng& rng);

}  // namespace rovo
