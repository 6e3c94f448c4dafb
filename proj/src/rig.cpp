#include "rovo/rig.hpp"

#include <cmath>
#include <stdexcept>

namespace rovo {

Vector3d RigConfig::camera_center(int cam) const {
  const RigidTransform& T = extrinsics.at(cam);
  return -(T.rotation_matrix().transpose() * T.translation);
}

double RigConfig::pair_distance(int cam_i, int cam_j) const {
  return (camera_center(cam_i) - camera_center(cam_j)).norm();
}

void RigConfig::validate(double tol) const {
  if (extrinsics.empty() || extrinsics.size() != intrinsics.size()) {
    throw std::invalid_argument("rig: extrinsics/intrinsics size mismatch");
  }
  for (const auto& phi : intrinsics) phi.validate();
  for (const auto& b : baselines) {
    if (b.cam_i < 0 || b.cam_i >= camera_count() || b.cam_j < 0 ||
        b.cam_j >= camera_count() || b.cam_i == b.cam_j) {
      throw std::invalid_argument("rig: baseline pair indices out of range");
    }
    const double d = pair_distance(b.cam_i, b.cam_j);
    if (std::abs(d - b.length) > tol * std::max(1.0, b.length)) {
      throw std::invalid_argument("rig: stored baseline length inconsistent with extrinsics");
    }
  }
}

RigConfig make_rig(std::vector<RigidTransform> extrinsics,
                   std::vector<FisheyeIntrinsics> intrinsics,
                   std::vector<std::pair<int, int>> pairs) {
  RigConfig rig;
  rig.extrinsics = std::move(extrinsics);
  rig.intrinsics = std::move(intrinsics);
  const int n = rig.camera_count();
  if (pairs.empty() && n >= 2) {
    for (int i = 0; i < n; ++i) pairs.emplace_back(i, (i + 1) % n);
    if (n == 2) pairs.resize(1);
  }
  for (const auto& [i, j] : pairs) {
    rig.baselines.push_back({i, j, rig.pair_distance(i, j)});
  }
  rig.validate();
  return rig;
}

RigidTransform look_extrinsic(const Vector3d& center, const Vector3d& forward) {
  const Vector3d z_cam = forward.normalized();       // optical axis in body coords
  const Vector3d y_cam = Vector3d(0, 0, -1);         // image down = body -z
  const Vector3d x_cam = y_cam.cross(z_cam).normalized();
  Matrix3d R_bc;  // camera axes as body-frame columns
  R_bc.col(0) = x_cam;
  R_bc.col(1) = y_cam;
  R_bc.col(2) = z_cam;
  RigidTransform T_cb;
  T_cb.rotation = matrix_to_axis_angle(R_bc.transpose());
  T_cb.translation = -(R_bc.transpose() * center);
  return T_cb;
}

RigConfig default_rig() {
  const double hx = 1.0, hy = 0.5;  // rectangle half-extents
  // Ring order front(+x), left(+y), rear(-x), right(-y); each camera sits at
  // the corner reached by rotating its axis direction clockwise.
  const std::vector<Vector3d> centers = {
      {hx, -hy, 0.0}, {hx, hy, 0.0}, {-hx, hy, 0.0}, {-hx, -hy, 0.0}};
  const std::vector<Vector3d> axes = {
      {1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}};
  std::vector<RigidTransform> extrinsics;
  std::vector<FisheyeIntrinsics> intrinsics;
  for (int i = 0; i < 4; ++i) {
    extrinsics.push_back(look_extrinsic(centers[i], axes[i]));
    intrinsics.push_back(FisheyeIntrinsics::synthetic_default());
  }
  return make_rig(std::move(extrinsics), std::move(intrinsics));
}

RigConfig perturb_extrinsics(const RigConfig& rig, double sigma_deg, Rng& rng) {
  if (sigma_deg < 0) throw std::invalid_argument("perturb_extrinsics: sigma must be >= 0");
  RigConfig out = rig;
  const double sigma = deg2rad(sigma_deg);
  for (int c = 0; c < rig.camera_count(); ++c) {
    const Vector3d w(sigma * rng.gaussian(), sigma * rng.gaussian(), sigma * rng.gaussian());
    if (sigma == 0.0) continue;
    const Vector3d center = rig.camera_center(c);
    const Matrix3d R_new = axis_angle_to_matrix(w) * rig.extrinsics[c].rotation_matrix();
    out.extrinsics[c].rotation = matrix_to_axis_angle(R_new);
    out.extrinsics[c].translation = -(R_new * center);
  }
  return out;
}

}  // namespace rovo
