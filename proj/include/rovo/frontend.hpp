#pragma once

#include <map>
#include <optional>
#include <vector>

#include "rovo/hybrid_projection.hpp"
#include "rovo/rig.hpp"
#include "rovo/synthetic_world.hpp"

namespace rovo {

struct MatchThresholds {
  double max_warped_y_dist = 3.0;               // px, filter (a)
  double max_epipolar_angle = deg2rad(0.2);     // rad, filter (b)
  double min_parallax = deg2rad(0.5);           // rad, triangulation gate
};

struct Triangulation {
  Vector3d point{0, 0, 0};  // world frame
  double ray_angle = 0.0;   // rad, parallax between the two rays
  double midpoint_gap = 0.0;
  double depth_i = 0.0;     // signed depth along each ray
  double depth_j = 0.0;
};

// Midpoint of the closest points of the two world-frame rays. Poses are
// world-to-camera (T_cw). nullopt when the rays are closer to parallel than
// min_parallax.
std::optional<Triangulation> triangulate(const UnitRay& bearing_i, const RigidTransform& T_cw_i,
                                         const UnitRay& bearing_j, const RigidTransform& T_cw_j,
                                         double min_parallax);

// Candidate correspondence between two neighboring cameras at one frame.
struct InterViewMatch {
  int cam_i = 0;
  int cam_j = 0;
  int64_t track_i = 0;
  int64_t track_j = 0;
  UnitRay bearing_i;
  UnitRay bearing_j;

  bool pass_y = false;          // warped y-distance
  bool pass_epipolar = false;   // angular distance to the epipolar plane
  bool pass_disparity = false;  // positive triangulated depth in both views
  bool pass_mutual = false;     // mutual best by epipolar residual
  double epipolar_residual = 0.0;
  std::optional<Triangulation> triangulation;

  bool passed() const { return pass_y && pass_epipolar && pass_disparity && pass_mutual; }
};

// Evaluates filters (a) y-distance on the warp surfaces, (b) epipolar
// consistency, (c) positive disparity, filling the flags (pass_mutual is set
// by match_views). Poses are world-to-camera for the two views.
void filter_match(InterViewMatch& m, const HybridProjectionConfig& cfg_i,
                  const HybridProjectionConfig& cfg_j, const RigidTransform& T_cw_i,
                  const RigidTransform& T_cw_j, const MatchThresholds& thr);

// Runs filter_match over a candidate set of one camera pair and applies the
// left-right consistency rule: a candidate passes (d) iff it has the smallest
// epipolar residual among all candidates sharing either of its observations.
// The mutual-best relation is computed over the full candidate set, so
// tightening the other thresholds never grows the pass set.
void match_views(std::vector<InterViewMatch>& candidates, const HybridProjectionConfig& cfg_i,
                 const HybridProjectionConfig& cfg_j, const RigidTransform& T_cw_i,
                 const RigidTransform& T_cw_j, const MatchThresholds& thr);

// Track bookkeeping: which track currently maps to which live landmark.
class TrackTable {
 public:
  struct Entry {
    int64_t landmark_id = -1;
    int last_seen_frame = -1;
  };

  // Binds a track to a landmark; a track maps to at most one landmark.
  void bind(int64_t track, int64_t landmark, int frame);
  void touch(int64_t track, int frame);
  // Removes every track bound to this landmark (used when a landmark leaves
  // the optimization window).
  void unbind_landmark(int64_t landmark);
  std::optional<int64_t> landmark_of(int64_t track) const;
  size_t size() const { return entries_.size(); }

 private:
  std::map<int64_t, Entry> entries_;
  std::multimap<int64_t, int64_t> by_landmark_;  // landmark -> track
};

struct TrackCorrespondence {
  int cam = 0;
  int64_t track = 0;
  int64_t landmark = 0;
  UnitRay bearing;
  Vector3d point;  // current landmark estimate, world frame
};

struct AssociationResult {
  std::vector<std::vector<TrackCorrespondence>> per_camera;  // 2D-3D pairs
  std::vector<Observation> unmatched;                        // queued for triangulation
};

// Splits a frame's observations into 2D-3D correspondences (track bound to a
// landmark that is present in `landmarks`) and unmatched observations.
AssociationResult associate_tracks(const std::vector<Observation>& frame_obs,
                                   const TrackTable& table,
                                   const std::map<int64_t, Vector3d>& landmarks,
                                   int camera_count);

}  // namespace rovo
