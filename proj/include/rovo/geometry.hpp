#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rovo {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

// Unit-norm bearing vector. Wide-FOV observations are represented as rays on
// the unit sphere instead of pixel coordinates.
struct UnitRay {
  Vector3d dir{0.0, 0.0, 1.0};

  // Normalizes v; throws std::invalid_argument if ||v|| is (near) zero.
  static UnitRay from_vector(const Vector3d& v);
};

Matrix3d skew(const Vector3d& v);

// Rodrigues exponential/log maps between axis-angle vectors and rotation
// matrices. The log always returns the canonical representative with angle
// in [0, pi]. Both switch to Taylor branches below ~1e-8 rad.
Matrix3d axis_angle_to_matrix(const Vector3d& r);
Vector3d matrix_to_axis_angle(const Matrix3d& R);

// Rigid transform, stored as axis-angle rotation plus translation.
// apply(T, X) = R(rotation) * X + translation.
struct RigidTransform {
  Vector3d rotation{Vector3d::Zero()};
  Vector3d translation{Vector3d::Zero()};

  static RigidTransform identity() { return {}; }
  Matrix3d rotation_matrix() const { return axis_angle_to_matrix(rotation); }
};

Vector3d apply(const RigidTransform& T, const Vector3d& X);

// apply(compose(A, B), X) == apply(A, apply(B, X)). Result is canonical.
RigidTransform compose(const RigidTransform& A, const RigidTransform& B);
RigidTransform inverse(const RigidTransform& T);

// Maps the rotation angle into [0, pi] (angle > pi becomes 2*pi - angle with
// flipped axis), so equal rotations compare equal componentwise.
RigidTransform canonical(const RigidTransform& T);

// X / ||X||; throws std::invalid_argument on (near) zero input.
UnitRay project_unit_sphere(const Vector3d& X);

// Angle in [0, pi] between two nonzero vectors.
double angle_between(const Vector3d& a, const Vector3d& b);

// Rotation angle of R in [0, pi].
double rotation_angle(const Matrix3d& R);

// Euler factorization R = Rx(e0) * Ry(e1) * Rz(e2). With the camera
// convention (x right, y down, z forward) these are pitch, yaw, roll.
Vector3d euler_xyz_from_matrix(const Matrix3d& R);
Matrix3d euler_xyz_to_matrix(const Vector3d& e);

constexpr double deg2rad(double d) { return d * 0.017453292519943295; }
constexpr double rad2deg(double r) { return r * 57.29577951308232; }

}  // namespace rovo
