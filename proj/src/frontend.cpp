#include "rovo/frontend.hpp"

#include <algorithm>
#include <cmath>

namespace rovo {

std::optional<Triangulation> triangulate(const UnitRay& bearing_i, const RigidTransform& T_cw_i,
                                         const UnitRay& bearing_j, const RigidTransform& T_cw_j,
                                         double min_parallax) {
  const Matrix3d R_wi = T_cw_i.rotation_matrix().transpose();
  const Matrix3d R_wj = T_cw_j.rotation_matrix().transpose();
  const Vector3d o_i = -(R_wi * T_cw_i.translation);
  const Vector3d o_j = -(R_wj * T_cw_j.translation);
  const Vector3d d_i = R_wi * bearing_i.dir;
  const Vector3d d_j = R_wj * bearing_j.dir;

  const double b = d_i.dot(d_j);
  const double denom = 1.0 - b * b;
  const double angle = std::acos(std::clamp(std::abs(b), 0.0, 1.0));
  if (angle < min_parallax || denom < 1e-15) return std::nullopt;

  const Vector3d w0 = o_i - o_j;
  const double d = d_i.dot(w0);
  const double e = d_j.dot(w0);
  const double s = (b * e - d) / denom;
  const double t = (e - b * d) / denom;

  const Vector3d p_i = o_i + s * d_i;
  const Vector3d p_j = o_j + t * d_j;
  Triangulation tri;
  tri.point = 0.5 * (p_i + p_j);
  tri.ray_angle = std::acos(std::clamp(d_i.dot(d_j), -1.0, 1.0));
  tri.midpoint_gap = (p_i - p_j).norm();
  tri.depth_i = s;
  tri.depth_j = t;
  return tri;
}

namespace {

// Angular distance of `ray` from the epipolar plane spanned by `other` and
// the baseline; pi/2 when the plane is degenerate.
double epipolar_angle(const Vector3d& baseline, const Vector3d& other, const Vector3d& ray) {
  const Vector3d n = baseline.cross(other);
  const double nn = n.norm();
  if (nn < 1e-15) return 0.0;  // other parallel to baseline: plane undefined, no constraint
  return std::asin(std::clamp(std::abs(n.dot(ray)) / nn, 0.0, 1.0));
}

}  // namespace

void filter_match(InterViewMatch& m, const HybridProjectionConfig& cfg_i,
                  const HybridProjectionConfig& cfg_j, const RigidTransform& T_cw_i,
                  const RigidTransform& T_cw_j, const MatchThresholds& thr) {
  // (a) warped y-distance
  const auto w_i = warp_project(m.bearing_i.dir, cfg_i);
  const auto w_j = warp_project(m.bearing_j.dir, cfg_j);
  m.pass_y = w_i && w_j && std::abs(w_i->y() - w_j->y()) <= thr.max_warped_y_dist;

  // (b) epipolar consistency, symmetric in the two views
  const Matrix3d R_wi = T_cw_i.rotation_matrix().transpose();
  const Matrix3d R_wj = T_cw_j.rotation_matrix().transpose();
  const Vector3d o_i = -(R_wi * T_cw_i.translation);
  const Vector3d o_j = -(R_wj * T_cw_j.translation);
  const Vector3d baseline = o_j - o_i;
  const Vector3d d_i = R_wi * m.bearing_i.dir;
  const Vector3d d_j = R_wj * m.bearing_j.dir;
  m.epipolar_residual =
      std::max(epipolar_angle(baseline, d_i, d_j), epipolar_angle(baseline, d_j, d_i));
  m.pass_epipolar = m.epipolar_residual <= thr.max_epipolar_angle;

  // (c) positive disparity; low-parallax pairs carry no disparity evidence
  // and simply yield no triangulated point.
  m.triangulation = triangulate(m.bearing_i, T_cw_i, m.bearing_j, T_cw_j, thr.min_parallax);
  m.pass_disparity =
      !m.triangulation || (m.triangulation->depth_i > 0.0 && m.triangulation->depth_j > 0.0);
}

void match_views(std::vector<InterViewMatch>& candidates, const HybridProjectionConfig& cfg_i,
                 const HybridProjectionConfig& cfg_j, const RigidTransform& T_cw_i,
                 const RigidTransform& T_cw_j, const MatchThresholds& thr) {
  for (auto& m : candidates) filter_match(m, cfg_i, cfg_j, T_cw_i, T_cw_j, thr);

  // Best residual per side over the whole candidate set.
  std::map<int64_t, double> best_i, best_j;
  for (const auto& m : candidates) {
    auto it = best_i.find(m.track_i);
    if (it == best_i.end() || m.epipolar_residual < it->second) best_i[m.track_i] = m.epipolar_residual;
    it = best_j.find(m.track_j);
    if (it == best_j.end() || m.epipolar_residual < it->second) best_j[m.track_j] = m.epipolar_residual;
  }
  for (auto& m : candidates) {
    m.pass_mutual = m.epipolar_residual <= best_i[m.track_i] &&
                    m.epipolar_residual <= best_j[m.track_j];
  }
}

void TrackTable::bind(int64_t track, int64_t landmark, int frame) {
  auto& e = entries_[track];
  if (e.landmark_id >= 0 && e.landmark_id != landmark) {
    // Rebinding: drop the stale reverse entry.
    auto range = by_landmark_.equal_range(e.landmark_id);
    for (auto it = range.first; it != range.second; ++it) {
      if (it->second == track) {
        by_landmark_.erase(it);
        break;
      }
    }
  }
  e.landmark_id = landmark;
  e.last_seen_frame = frame;
  by_landmark_.emplace(landmark, track);
}

void TrackTable::touch(int64_t track, int frame) {
  auto it = entries_.find(track);
  if (it != entries_.end()) it->second.last_seen_frame = frame;
}

void TrackTable::unbind_landmark(int64_t landmark) {
  auto range = by_landmark_.equal_range(landmark);
  for (auto it = range.first; it != range.second; ++it) entries_.erase(it->second);
  by_landmark_.erase(range.first, range.second);
}

std::optional<int64_t> TrackTable::landmark_of(int64_t track) const {
  auto it = entries_.find(track);
  if (it == entries_.end() || it->second.landmark_id < 0) return std::nullopt;
  return it->second.landmark_id;
}

AssociationResult associate_tracks(const std::vector<Observation>& frame_obs,
                                   const TrackTable& table,
                                   const std::map<int64_t, Vector3d>& landmarks,
                                   int camera_count) {
  AssociationResult out;
  out.per_camera.resize(camera_count);
  for (const auto& o : frame_obs) {
    const auto lm = table.landmark_of(o.track);
    if (lm) {
      const auto it = landmarks.find(*lm);
      if (it != landmarks.end()) {
        out.per_camera[o.cam].push_back({o.cam, o.track, *lm, o.bearing, it->second});
        continue;
      }
    }
    out.unmatched.push_back(o);
  }
  return out;
}

}  // namespace rovo
