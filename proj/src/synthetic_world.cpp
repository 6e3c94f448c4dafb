#include "rovo/synthetic_world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rovo {

namespace {

constexpr double kMaxRange = 100.0;  // m

struct PathPoint {
  Vector3d position;
  Vector3d tangent;
};

// Arclength parameterization of the trajectory shapes. The body travels the
// whole path over the frame count.
class Path {
 public:
  explicit Path(const SceneSpec& spec) : spec_(spec) {
    switch (spec.shape) {
      case TrajectoryShape::Straight:
        length_ = spec.path_length;
        break;
      case TrajectoryShape::Circle:
        length_ = 2.0 * M_PI * spec.circle_radius;
        break;
      case TrajectoryShape::Lawnmower: {
        // Alternating rows joined by lateral steps, truncated at path_length.
        length_ = spec.path_length;
        break;
      }
    }
  }

  double length() const { return length_; }

  PathPoint at(double s) const {
    s = std::clamp(s, 0.0, length_);
    const double z = spec_.body_height;
    switch (spec_.shape) {
      case TrajectoryShape::Straight:
        return {{s, 0.0, z}, {1, 0, 0}};
      case TrajectoryShape::Circle: {
        const double r = spec_.circle_radius;
        const double phi = s / r;
        return {{r * std::sin(phi), r * (1.0 - std::cos(phi)), z},
                {std::cos(phi), std::sin(phi), 0.0}};
      }
      case TrajectoryShape::Lawnmower: {
        const double row = spec_.lawnmower_row_length;
        const double step = spec_.lawnmower_row_spacing;
        double rem = s;
        Vector3d p(0, 0, z);
        int leg = 0;  // even: row (+x or -x), odd: step (+y)
        while (true) {
          const bool is_row = (leg % 2 == 0);
          const double leg_len = is_row ? row : step;
          const double dir_x = (leg % 4 == 0) ? 1.0 : ((leg % 4 == 2) ? -1.0 : 0.0);
          const Vector3d t = is_row ? Vector3d(dir_x, 0, 0) : Vector3d(0, 1, 0);
          if (rem <= leg_len) return {p + rem * t, t};
          p += leg_len * t;
          rem -= leg_len;
          ++leg;
        }
      }
    }
    return {{0, 0, z}, {1, 0, 0}};
  }

 private:
  SceneSpec spec_;
  double length_ = 0.0;
};

RigidTransform pose_from_path(const PathPoint& pp) {
  const Vector3d fwd = pp.tangent.normalized();
  const Vector3d up(0, 0, 1);
  const Vector3d left = up.cross(fwd).normalized();
  Matrix3d R_wb;
  R_wb.col(0) = fwd;
  R_wb.col(1) = left;
  R_wb.col(2) = up;
  RigidTransform T_wb;
  T_wb.rotation = matrix_to_axis_angle(R_wb);
  T_wb.translation = pp.position;
  return T_wb;
}

}  // namespace

void SceneSpec::validate() const {
  if (frames <= 0) throw std::invalid_argument("scene spec: frames must be positive");
  if (!(frame_rate > 0)) throw std::invalid_argument("scene spec: frame_rate must be positive");
  if (!(landmark_density > 0)) {
    throw std::invalid_argument("scene spec: landmark_density must be positive");
  }
  if (shape == TrajectoryShape::Circle && !(circle_radius > 0)) {
    throw std::invalid_argument("scene spec: circle_radius must be positive");
  }
  if (shape != TrajectoryShape::Circle && !(path_length > 0)) {
    throw std::invalid_argument("scene spec: path_length must be positive");
  }
  if (dynamic_count < 0) throw std::invalid_argument("scene spec: dynamic_count must be >= 0");
}

RigidTransform SyntheticScene::body_from_world(int frame) const {
  return inverse(trajectory.at(frame));
}

SyntheticScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(mix_seed(spec.seed, 0xa11ce));
  const Path path(spec);
  const double L = path.length();

  SyntheticScene scene;
  scene.frame_rate = spec.frame_rate;

  scene.trajectory.reserve(spec.frames);
  for (int k = 0; k < spec.frames; ++k) {
    scene.trajectory.push_back(pose_from_path(path.at(L * k / spec.frames)));
  }
  // Anchor the world at the first body pose so estimated trajectories (which
  // start at the identity) compare directly against the ground truth.
  const RigidTransform anchor = inverse(scene.trajectory.front());

  const int n_landmarks = std::max(8, static_cast<int>(std::lround(spec.landmark_density * L)));
  scene.landmarks.reserve(n_landmarks);
  for (int64_t id = 0; id < n_landmarks; ++id) {
    const double s = rng.uniform(0.0, L);
    const PathPoint pp = path.at(s);
    const Vector3d left = Vector3d(0, 0, 1).cross(pp.tangent).normalized();
    Vector3d pos;
    if (rng.uniform() < spec.ground_fraction) {
      pos = pp.position + rng.uniform(-0.8, 0.8) * spec.wall_offset * left;
      pos.z() = 0.0;
    } else {
      const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double offset = spec.wall_offset * (1.0 + 0.1 * rng.gaussian());
      pos = pp.position + side * offset * left;
      pos.z() = rng.uniform(0.2, spec.wall_height);
    }
    scene.landmarks.emplace_back(id, pos);
  }

  const double total_time = spec.frames / spec.frame_rate;
  int64_t next_dyn_id = kDynamicTrackBase;
  for (int obj = 0; obj < spec.dynamic_count; ++obj) {
    const double s0 = rng.uniform(0.15, 0.85) * L;
    const PathPoint pp = path.at(s0);
    const Vector3d left = Vector3d(0, 0, 1).cross(pp.tangent).normalized();
    // Crosses the path near the moment the body passes s0.
    const double t_cross = total_time * s0 / L;
    const Vector3d dir = (left * (rng.uniform() < 0.5 ? 1.0 : -1.0) +
                          0.3 * rng.gaussian() * pp.tangent)
                             .normalized();
    const Vector3d center0 = pp.position + Vector3d(0, 0, -spec.body_height + 1.0) -
                             dir * spec.dynamic_speed * t_cross;
    const int n_pts = 20 + rng.uniform_int(81);
    for (int p = 0; p < n_pts; ++p) {
      DynamicTrack trk;
      trk.id = next_dyn_id++;
      trk.start = center0 + Vector3d(rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0),
                                     rng.uniform(0.0, 1.5));
      trk.velocity = dir * spec.dynamic_speed;
      scene.dynamic.push_back(trk);
    }
  }

  const Matrix3d R_anchor = anchor.rotation_matrix();
  for (auto& T : scene.trajectory) T = compose(anchor, T);
  for (auto& [id, pos] : scene.landmarks) pos = apply(anchor, pos);
  for (auto& d : scene.dynamic) {
    d.start = apply(anchor, d.start);
    d.velocity = R_anchor * d.velocity;
  }
  return scene;
}

namespace {

UnitRay perturb_bearing(const Vector3d& dir, double sigma, Rng& rng) {
  if (sigma <= 0.0) return UnitRay{dir};
  const Vector3d ref = std::abs(dir.z()) < 0.9 ? Vector3d(0, 0, 1) : Vector3d(1, 0, 0);
  const Vector3d e1 = dir.cross(ref).normalized();
  const Vector3d e2 = dir.cross(e1);
  const Vector3d noisy = dir + sigma * rng.gaussian() * e1 + sigma * rng.gaussian() * e2;
  return UnitRay{noisy.normalized()};
}

}  // namespace

std::vector<Observation> observe_frame(const SyntheticScene& scene, const RigConfig& rig,
                                       int frame, double noise_sigma, double outlier_rate,
                                       Rng& rng) {
  if (frame < 0 || frame >= scene.frame_count()) {
    throw std::invalid_argument("observe_frame: frame out of range");
  }
  if (outlier_rate < 0.0 || outlier_rate >= 1.0) {
    throw std::invalid_argument("observe_frame: outlier_rate must be in [0, 1)");
  }
  const RigidTransform T_bw = scene.body_from_world(frame);
  const double t = scene.time_of(frame);

  std::vector<Observation> all;
  for (int cam = 0; cam < rig.camera_count(); ++cam) {
    const RigidTransform T_cw = compose(rig.extrinsics[cam], T_bw);
    const Matrix3d R = T_cw.rotation_matrix();
    const double fov = rig.intrinsics[cam].fov_max;

    auto try_observe = [&](int64_t track, const Vector3d& X_w) {
      const Vector3d X_c = R * X_w + T_cw.translation;
      const double range = X_c.norm();
      if (range < 0.5 || range > kMaxRange) return;
      if (std::atan2(std::hypot(X_c.x(), X_c.y()), X_c.z()) > fov) return;
      const UnitRay bearing = perturb_bearing(X_c / range, noise_sigma, rng);
      // Keep the emitted set consistent with the FOV even after noise.
      if (std::atan2(std::hypot(bearing.dir.x(), bearing.dir.y()), bearing.dir.z()) > fov) return;
      all.push_back({frame, cam, track, bearing});
    };

    const size_t first = all.size();
    for (const auto& [id, pos] : scene.landmarks) try_observe(id, pos);
    const size_t n_static = all.size() - first;
    for (const auto& d : scene.dynamic) try_observe(d.id, d.start + d.velocity * t);

    if (outlier_rate > 0.0 && n_static > 1) {
      std::vector<size_t> chosen;
      for (size_t k = first; k < first + n_static; ++k) {
        if (rng.uniform() < outlier_rate) chosen.push_back(k);
      }
      if (chosen.size() >= 2) {
        // Cyclic shift keeps (frame, cam, track) unique.
        const int64_t saved = all[chosen.back()].track;
        for (size_t k = chosen.size() - 1; k > 0; --k) {
          all[chosen[k]].track = all[chosen[k - 1]].track;
        }
        all[chosen[0]].track = saved;
      }
    }
  }
  return all;
}

}  // namespace rovo
