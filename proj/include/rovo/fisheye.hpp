#pragma once

#include <optional>

#include "rovo/geometry.hpp"

namespace rovo {

// Equidistant fisheye model: pixel radius = focal * incidence angle. Handles
// fields of view beyond 180 degrees (points with negative z still project as
// long as the incidence angle stays within fov_max).
struct FisheyeIntrinsics {
  double focal = 0.0;        // pixels per radian
  Vector2d principal_point{0.0, 0.0};
  int width = 0;
  int height = 0;
  double fov_max = 0.0;      // half-angle limit, radians, in (0, pi]

  // throws std::invalid_argument if the fields are inconsistent
  void validate() const;

  // The synthetic rig camera: 1600x1532, 220-degree lens, principal point at
  // the image center, focal such that fov_max lands on the short half-axis.
  static FisheyeIntrinsics synthetic_default();
};

// Camera-frame point -> pixel. nullopt when X is (near) zero or the incidence
// angle exceeds fov_max. A point on the +z axis maps exactly to the principal
// point.
std::optional<Vector2d> project(const Vector3d& X_cam, const FisheyeIntrinsics& phi);

// Pixel -> camera-frame unit ray. nullopt when the pixel radius corresponds
// to an angle beyond fov_max.
std::optional<UnitRay> unproject(const Vector2d& px, const FisheyeIntrinsics& phi);

}  // namespace rovo
