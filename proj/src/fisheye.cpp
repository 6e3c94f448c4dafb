#include "rovo/fisheye.hpp"

#include <cmath>
#include <stdexcept>

namespace rovo {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kFovSlack = 1e-12;  // keeps boundary round-trips valid
}  // namespace

void FisheyeIntrinsics::validate() const {
  if (!(focal > 0.0)) throw std::invalid_argument("intrinsics: focal must be positive");
  if (!(fov_max > 0.0 && fov_max <= kPi)) {
    throw std::invalid_argument("intrinsics: fov_max must be in (0, pi]");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("intrinsics: resolution must be positive");
  }
  if (principal_point.x() < 0 || principal_point.x() > width ||
      principal_point.y() < 0 || principal_point.y() > height) {
    throw std::invalid_argument("intrinsics: principal point outside image");
  }
}

FisheyeIntrinsics FisheyeIntrinsics::synthetic_default() {
  FisheyeIntrinsics phi;
  phi.width = 1600;
  phi.height = 1532;
  phi.principal_point = Vector2d(800.0, 766.0);
  phi.fov_max = deg2rad(110.0);
  phi.focal = 766.0 / phi.fov_max;
  return phi;
}

std::optional<Vector2d> project(const Vector3d& X_cam, const FisheyeIntrinsics& phi) {
  const double rxy = std::hypot(X_cam.x(), X_cam.y());
  const double norm = std::hypot(rxy, X_cam.z());
  if (norm < 1e-15) return std::nullopt;
  const double theta = std::atan2(rxy, X_cam.z());
  if (theta > phi.fov_max + kFovSlack) return std::nullopt;
  if (rxy < 1e-15 * norm) return phi.principal_point;
  const double r = phi.focal * theta;
  return phi.principal_point + (r / rxy) * Vector2d(X_cam.x(), X_cam.y());
}

std::optional<UnitRay> unproject(const Vector2d& px, const FisheyeIntrinsics& phi) {
  const Vector2d d = px - phi.principal_point;
  const double r = d.norm();
  const double theta = r / phi.focal;
  if (theta > phi.fov_max + kFovSlack) return std::nullopt;
  if (r < 1e-15) return UnitRay{Vector3d(0, 0, 1)};
  const double s = std::sin(theta) / r;
  return UnitRay{Vector3d(s * d.x(), s * d.y(), std::cos(theta))};
}

}  // namespace rovo
