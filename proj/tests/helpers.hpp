#pragma once

#include <map>
#include <vector>

#include "rovo/estimation.hpp"
#include "rovo/rig.hpp"
#include "rovo/rng.hpp"
#include "rovo/window_ba.hpp"

namespace rovo::testing {

inline RigidTransform random_pose(Rng& rng, double rot_scale = 1.0, double trans_scale = 5.0) {
  Vector3d axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
  axis.normalize();
  RigidTransform T;
  T.rotation = axis * rng.uniform(0.0, rot_scale);
  T.translation = Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian()) * trans_scale;
  return T;
}

// Exact 2D-3D correspondences for a body pose under the rig: world points in
// front of each camera around `depth`, bearings from the true geometry plus
// optional tangent-plane noise.
inline std::vector<CorrespondenceSet> synthetic_correspondences(
    const RigConfig& rig, const RigidTransform& T_bw, int per_camera, double depth,
    double noise_sigma, Rng& rng) {
  std::vector<CorrespondenceSet> sets(rig.camera_count());
  const RigidTransform T_wb = inverse(T_bw);
  int64_t next_id = 0;
  for (int c = 0; c < rig.camera_count(); ++c) {
    const RigidTransform T_cw = compose(rig.extrinsics[c], T_bw);
    const RigidTransform T_wc = inverse(T_cw);
    for (int i = 0; i < per_camera; ++i) {
      // Sample a camera-frame point in a forward cone, map to the world.
      const double theta = rng.uniform(0.0, deg2rad(70.0));
      const double phi = rng.uniform(0, 2 * M_PI);
      const double r = depth * rng.uniform(0.5, 1.5);
      const Vector3d X_c(r * std::sin(theta) * std::cos(phi),
                         r * std::sin(theta) * std::sin(phi), r * std::cos(theta));
      Correspondence m;
      m.point = apply(T_wc, X_c);
      Vector3d d = X_c.normalized();
      if (noise_sigma > 0) {
        const Vector3d ref = std::abs(d.z()) < 0.9 ? Vector3d(0, 0, 1) : Vector3d(1, 0, 0);
        const Vector3d e1 = d.cross(ref).normalized();
        const Vector3d e2 = d.cross(e1);
        d = (d + noise_sigma * rng.gaussian() * e1 + noise_sigma * rng.gaussian() * e2)
                .normalized();
      }
      m.bearing = UnitRay{d};
      m.track = m.landmark = next_id++;
      sets[c].push_back(m);
    }
  }
  (void)T_wb;
  return sets;
}

// Replaces the world point of `count` correspondences in one camera with the
// point of another correspondence (association swap). Returns the corrupted
// indices.
inline std::vector<int> inject_outliers(CorrespondenceSet& set, int count, Rng& rng) {
  std::vector<int> corrupted;
  for (int k = 0; k < count && static_cast<int>(set.size()) >= 2; ++k) {
    const int i = rng.uniform_int(static_cast<int>(set.size()));
    int j = rng.uniform_int(static_cast<int>(set.size()));
    if (i == j) j = (j + 1) % static_cast<int>(set.size());
    set[i].point = set[j].point + Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
    corrupted.push_back(i);
  }
  return corrupted;
}

struct SyntheticWindow {
  WindowState state;
  std::deque<FrameState> gt_frames;
  std::map<int64_t, Vector3d> gt_landmarks;
  std::vector<RigidTransform> gt_extrinsics;
};

// Window of `n_frames` poses moving forward, observing world points placed
// around the rig, all observations exact up to `noise_sigma`.
inline SyntheticWindow synthetic_window(const RigConfig& rig, int n_frames, int n_landmarks,
                                        double noise_sigma, Rng& rng) {
  SyntheticWindow sw;
  sw.state = make_window(rig, std::max(n_frames, 10));
  sw.gt_extrinsics = rig.extrinsics;

  std::vector<std::pair<int64_t, Vector3d>> points;
  for (int64_t i = 0; i < n_landmarks; ++i) {
    const double ang = rng.uniform(0, 2 * M_PI);
    const double radius = rng.uniform(6.0, 30.0);
    points.emplace_back(
        i, Vector3d(radius * std::cos(ang), radius * std::sin(ang), rng.uniform(-1.5, 4.0)));
  }

  for (int f = 0; f < n_frames; ++f) {
    RigidTransform T_wb;
    T_wb.translation = Vector3d(0.4 * f, 0.05 * f, 0.0);
    T_wb.rotation = Vector3d(0, 0, 0.02 * f);
    const RigidTransform T_bw = inverse(T_wb);
    sw.state.frames.push_back({f, T_bw});
    sw.gt_frames.push_back({f, T_bw});

    for (const auto& [id, X] : points) {
      for (int c = 0; c < rig.camera_count(); ++c) {
        const Vector3d X_c = apply(compose(rig.extrinsics[c], T_bw), X);
        if (X_c.norm() < 1.0 || X_c.norm() > 60.0) continue;
        if (std::atan2(std::hypot(X_c.x(), X_c.y()), X_c.z()) > rig.intrinsics[c].fov_max) {
          continue;
        }
        Vector3d d = X_c.normalized();
        if (noise_sigma > 0) {
          const Vector3d ref = std::abs(d.z()) < 0.9 ? Vector3d(0, 0, 1) : Vector3d(1, 0, 0);
          const Vector3d e1 = d.cross(ref).normalized();
          const Vector3d e2 = d.cross(e1);
          d = (d + noise_sigma * rng.gaussian() * e1 + noise_sigma * rng.gaussian() * e2)
                  .normalized();
        }
        sw.state.observations.push_back({f, c, id, UnitRay{d}, 1.0});
      }
    }
  }

  std::map<int64_t, int> counts;
  for (const auto& o : sw.state.observations) ++counts[o.landmark];
  for (const auto& [id, X] : points) {
    if (counts[id] >= 2) {
      sw.state.landmarks[id] = X;
      sw.gt_landmarks[id] = X;
    }
  }
  std::erase_if(sw.state.observations, [&](const WindowObservation& o) {
    return sw.state.landmarks.find(o.landmark) == sw.state.landmarks.end();
  });
  return sw;
}

// Right-multiplicative pose update used by the optimizer blocks.
inline void apply_block_delta(RigidTransform& T, const Eigen::Matrix<double, 6, 1>& d) {
  T.rotation =
      matrix_to_axis_angle(T.rotation_matrix() * axis_angle_to_matrix(Vector3d(d.head<3>())));
  T.translation += d.tail<3>();
}

// Worst relative deviation between the analytic Jacobians of a random window
// configuration and central finite differences.
inline double worst_jacobian_fd_error(uint64_t seed) {
  Rng rng(seed);
  const RigConfig rig = default_rig();
  SyntheticWindow sw = synthetic_window(rig, 3, 12, 0.001, rng);
  // Move everything off the optimum so the Jacobians are generic.
  for (auto& f : sw.state.frames) {
    Eigen::Matrix<double, 6, 1> d;
    for (int i = 0; i < 6; ++i) d[i] = 0.02 * rng.gaussian();
    apply_block_delta(f.T_bw, d);
  }
  for (auto& e : sw.state.extrinsics) {
    Eigen::Matrix<double, 6, 1> d;
    for (int i = 0; i < 6; ++i) d[i] = 0.01 * rng.gaussian();
    apply_block_delta(e, d);
  }
  for (auto& [id, X] : sw.state.landmarks) {
    X += 0.05 * Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
  }

  BaOptions opts;
  opts.optimize_extrinsics = true;
  WindowProblem problem(sw.state, opts);
  const double h = 1e-6;
  double worst = 0.0;

  auto relative = [](const Eigen::MatrixXd& fd, const Eigen::MatrixXd& analytic) {
    return (fd - analytic).norm() / std::max(1.0, analytic.norm());
  };

  for (size_t k = 0; k < sw.state.observations.size(); k += 5) {
    const WindowObservation& obs = sw.state.observations[k];
    Eigen::Matrix<double, 3, 6> J_pose, J_ext;
    Eigen::Matrix<double, 3, 3> J_lm;
    problem.observation_residual(obs, &J_pose, &J_ext, &J_lm);

    auto eval = [&](int kind, const Eigen::Matrix<double, 6, 1>& d) {
      WindowState copy = sw.state;
      if (kind == 0) {
        apply_block_delta(copy.find_frame(obs.frame_id)->T_bw, d);
      } else if (kind == 1) {
        apply_block_delta(copy.extrinsics[obs.cam], d);
      } else {
        copy.landmarks.at(obs.landmark) += d.head<3>();
      }
      WindowProblem p(copy, opts);
      return p.observation_residual(obs, nullptr, nullptr, nullptr);
    };

    for (int kind = 0; kind < 3; ++kind) {
      const int dims = kind == 2 ? 3 : 6;
      Eigen::MatrixXd fd(3, dims);
      for (int d = 0; d < dims; ++d) {
        Eigen::Matrix<double, 6, 1> delta = Eigen::Matrix<double, 6, 1>::Zero();
        delta[d] = h;
        const Vector3d hi = eval(kind, delta);
        delta[d] = -h;
        const Vector3d lo = eval(kind, delta);
        fd.col(d) = (hi - lo) / (2.0 * h);
      }
      if (kind == 0) worst = std::max(worst, relative(fd, J_pose));
      if (kind == 1) worst = std::max(worst, relative(fd, J_ext));
      if (kind == 2) worst = std::max(worst, relative(fd, J_lm));
    }
  }

  for (const auto& pair : sw.state.baselines) {
    Eigen::Matrix<double, 1, 6> J_i, J_j;
    problem.baseline_residual(pair, &J_i, &J_j);
    auto eval = [&](int cam, const Eigen::Matrix<double, 6, 1>& d) {
      WindowState copy = sw.state;
      apply_block_delta(copy.extrinsics[cam], d);
      WindowProblem p(copy, opts);
      return p.baseline_residual(pair, nullptr, nullptr);
    };
    for (int side = 0; side < 2; ++side) {
      const int cam = side == 0 ? pair.cam_i : pair.cam_j;
      Eigen::MatrixXd fd(1, 6);
      for (int d = 0; d < 6; ++d) {
        Eigen::Matrix<double, 6, 1> delta = Eigen::Matrix<double, 6, 1>::Zero();
        delta[d] = h;
        const double hi = eval(cam, delta);
        delta[d] = -h;
        const double lo = eval(cam, delta);
        fd(0, d) = (hi - lo) / (2.0 * h);
      }
      worst = std::max(worst, relative(fd, side == 0 ? J_i : J_j));
    }
  }
  return worst;
}

}  // namespace rovo::testing
