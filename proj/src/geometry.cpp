#include "rovo/geometry.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace rovo {

namespace {
constexpr double kSmallAngle = 1e-8;
constexpr double kPi = 3.141592653589793238462643383279502884;
}  // namespace

UnitRay UnitRay::from_vector(const Vector3d& v) {
  const double n = v.norm();
  if (n < 1e-15) {
    throw std::invalid_argument("UnitRay: zero-length direction");
  }
  return UnitRay{v / n};
}

Matrix3d skew(const Vector3d& v) {
  Matrix3d s;
  // clang-format off
  s <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return s;
}

Matrix3d axis_angle_to_matrix(const Vector3d& r) {
  const double theta2 = r.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;  // R = I + a*[r]x + b*[r]x^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Matrix3d K = skew(r);
  return Matrix3d::Identity() + a * K + b * K * K;
}

Vector3d matrix_to_axis_angle(const Matrix3d& R) {
  // v = 2 sin(theta) * axis; atan2 keeps the angle well conditioned at both
  // ends of [0, pi].
  const Vector3d v(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double sin_theta = 0.5 * v.norm();
  const double cos_theta = 0.5 * (R.trace() - 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < kSmallAngle) {
    return (0.5 + theta * theta / 12.0) * v;
  }
  if (kPi - theta > 1e-5) {
    return (theta / (2.0 * sin_theta)) * v;
  }
  // Near pi the skew part vanishes; the symmetric part of R + I equals
  // (1 + cos) I + (1 - cos) a a^T, so its dominant column gives the axis to
  // O((pi - theta)^2). The sign comes from v while it is still meaningful.
  const Matrix3d S = 0.5 * (R + R.transpose()) + Matrix3d::Identity();
  int k = 0;
  S.diagonal().maxCoeff(&k);
  Vector3d axis = S.col(k);
  axis.normalize();
  if (axis.dot(v) < 0) axis = -axis;
  return theta * axis;
}

Vector3d apply(const RigidTransform& T, const Vector3d& X) {
  return T.rotation_matrix() * X + T.translation;
}

RigidTransform compose(const RigidTransform& A, const RigidTransform& B) {
  const Matrix3d Ra = A.rotation_matrix();
  RigidTransform out;
  out.rotation = matrix_to_axis_angle(Ra * B.rotation_matrix());
  out.translation = Ra * B.translation + A.translation;
  return out;
}

RigidTransform inverse(const RigidTransform& T) {
  const Matrix3d Rt = T.rotation_matrix().transpose();
  RigidTransform out;
  out.rotation = matrix_to_axis_angle(Rt);
  out.translation = -(Rt * T.translation);
  return out;
}

RigidTransform canonical(const RigidTransform& T) {
  RigidTransform out = T;
  const double theta = T.rotation.norm();
  if (theta > kPi) {
    // Wrap into [0, pi]; note 2*pi*k wraps land exactly on zero.
    double w = std::fmod(theta, 2.0 * kPi);
    if (w > kPi) w -= 2.0 * kPi;  // signed residual in (-pi, pi]
    out.rotation = T.rotation * (w / theta);
  }
  return out;
}

UnitRay project_unit_sphere(const Vector3d& X) { return UnitRay::from_vector(X); }

double angle_between(const Vector3d& a, const Vector3d& b) {
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-15 || nb < 1e-15) {
    throw std::invalid_argument("angle_between: zero-length vector");
  }
  // atan2 of (sin, cos) stays accurate for tiny and near-pi angles where
  // acos of the dot product loses up to 8 digits.
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

double rotation_angle(const Matrix3d& R) {
  const Vector3d v(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  return std::atan2(0.5 * v.norm(), 0.5 * (R.trace() - 1.0));
}

Vector3d euler_xyz_from_matrix(const Matrix3d& R) {
  // R = Rx(e0)*Ry(e1)*Rz(e2); R(0,2) = sin(e1).
  const double s1 = std::min(1.0, std::max(-1.0, R(0, 2)));
  if (std::abs(s1) > 1.0 - 1e-12) {
    // Gimbal lock: only the combination of e0 and e2 is observable. With
    // e0 = 0 both branches reduce to e2 = atan2(R(1,0), R(1,1)).
    const double e1 = s1 > 0 ? kPi / 2 : -kPi / 2;
    return {0.0, e1, std::atan2(R(1, 0), R(1, 1))};
  }
  const double e1 = std::asin(s1);
  const double e0 = std::atan2(-R(1, 2), R(2, 2));
  const double e2 = std::atan2(-R(0, 1), R(0, 0));
  return {e0, e1, e2};
}

Matrix3d euler_xyz_to_matrix(const Vector3d& e) {
  const double c0 = std::cos(e[0]), s0 = std::sin(e[0]);
  const double c1 = std::cos(e[1]), s1 = std::sin(e[1]);
  const double c2 = std::cos(e[2]), s2 = std::sin(e[2]);
  Matrix3d Rx, Ry, Rz;
  Rx << 1, 0, 0, 0, c0, -s0, 0, s0, c0;
  Ry << c1, 0, s1, 0, 1, 0, -s1, 0, c1;
  Rz << c2, -s2, 0, s2, c2, 0, 0, 0, 1;
  return Rx * Ry * Rz;
}

}  // namespace rovo
