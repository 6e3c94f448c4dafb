#pragma once

#include <vector>

#include "rovo/fisheye.hpp"
#include "rovo/geometry.hpp"
#include "rovo/rng.hpp"

namespace rovo {

// Frame conventions used throughout:
//   T_bw maps world coordinates to body (rig) coordinates,
//   T_cb maps body coordinates to camera coordinates (the extrinsic).
// Body axes: x forward, y left, z up. Camera axes: x right, y down,
// z forward (optical axis).

struct BaselinePair {
  int cam_i = 0;
  int cam_j = 0;
  double length = 0.0;  // meters, fixed reference distance between centers
};

struct RigConfig {
  std::vector<RigidTransform> extrinsics;        // per camera, T_cb
  std::vector<FisheyeIntrinsics> intrinsics;     // per camera
  std::vector<BaselinePair> baselines;           // neighboring pairs

  int camera_count() const { return static_cast<int>(extrinsics.size()); }

  // Camera center expressed in the body frame.
  Vector3d camera_center(int cam) const;

  // Current center distance for a pair (independent of the stored length).
  double pair_distance(int cam_i, int cam_j) const;

  // Checks sizes and that stored baseline lengths match the extrinsics to
  // within tol; throws std::invalid_argument otherwise.
  void validate(double tol = 1e-12) const;
};

// Builds a rig from extrinsics + intrinsics, deriving baseline lengths for
// the given pairs (ring order i -> i+1 if pairs omitted).
RigConfig make_rig(std::vector<RigidTransform> extrinsics,
                   std::vector<FisheyeIntrinsics> intrinsics,
                   std::vector<std::pair<int, int>> pairs = {});

// T_cb for a camera at body-frame position `center` looking along body-frame
// `forward` with camera-up = body +z.
RigidTransform look_extrinsic(const Vector3d& center, const Vector3d& forward);

// Four cameras at the corners of a 2m x 1m rectangle on the rig plane,
// optical axes outward at 90-degree spacing (+x, +y, -x, -y), each with the
// synthetic default lens.
RigConfig default_rig();

// Composes each camera rotation with a random axis-angle whose components
// are N(0, sigma_deg). Cameras are rotated about their own centers, so all
// pairwise center distances (and the stored baseline lengths) are preserved
// exactly.
RigConfig perturb_extrinsics(const RigConfig& rig, double sigma_deg, Rng& rng);

}  // namespace rovo
