#pragma once

#include <array>
#include <optional>
#include <vector>

#include "rovo/rig.hpp"
#include "rovo/rng.hpp"

namespace rovo {

// A 2D-3D pair: bearing in one camera's frame vs. landmark in the world.
struct Correspondence {
  UnitRay bearing;
  Vector3d point{0, 0, 0};
  int64_t track = -1;
  int64_t landmark = -1;
};

using CorrespondenceSet = std::vector<Correspondence>;

// Minimal absolute pose from three bearings and three world points. Returns
// up to four world-to-camera transforms, each reprojecting the three points
// onto their bearings within ~1e-6 rad. Throws std::invalid_argument for
// (near) collinear points; an empty result means no real solution.
std::vector<RigidTransform> p3p(const std::array<UnitRay, 3>& bearings,
                                const std::array<Vector3d, 3>& points);

// Draws a camera index with probability proportional to its match count;
// cameras with fewer than min_count matches are excluded. Throws
// std::invalid_argument when no camera qualifies.
int pps_sample(const std::vector<int>& match_counts, Rng& rng, int min_count = 3);

struct RansacParams {
  double tau_r = 2.0 * std::sin(deg2rad(0.5) / 2.0);  // chordal inlier threshold
  double confidence = 0.999;
  int iter_max_init = 1000;
  int iter_cap = 1000;
  uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct RansacResult {
  RigidTransform pose_bw;  // body-from-world
  std::vector<std::vector<bool>> inlier_mask;  // per camera, per correspondence
  double score = 0.0;      // truncated inlier score of pose_bw
  int iterations = 0;
  std::vector<int> per_camera_inliers;
  int total_inliers = 0;
  int total_matches = 0;

  double inlier_ratio() const {
    return total_matches > 0 ? static_cast<double>(total_inliers) / total_matches : 0.0;
  }
};

// Truncated inlier score sum over all cameras: max(0, tau_r - ||x - pi0(...)||)
// per correspondence, under body pose T_bw and the rig extrinsics.
double truncated_score(const RigidTransform& T_bw, const std::vector<CorrespondenceSet>& sets,
                       const std::vector<RigidTransform>& extrinsics, double tau_r);

// Hypothesize-and-verify over all views: pick a view by PPS sampling, solve
// P3P on three of its correspondences, map candidate camera poses to body
// poses and score them against every correspondence in every view. The
// iteration budget shrinks as log(1-p)/log(1-w^3) with the best inlier
// fraction w. nullopt when no camera has 3 matches or every sample was
// degenerate. Deterministic for a fixed seed.
std::optional<RansacResult> multiview_p3p_ransac(const std::vector<CorrespondenceSet>& sets,
                                                 const std::vector<RigidTransform>& extrinsics,
                                                 const RansacParams& params);

enum class RobustLoss { Squared, Cauchy };

struct RefineOptions {
  RobustLoss loss = RobustLoss::Cauchy;
  double loss_scale = 2.0 * std::sin(deg2rad(0.5) / 2.0);  // matches tau_r
  int max_iterations = 20;
};

// Pose-only refinement: minimizes the robustified bearing residuals over the
// body pose with landmarks and extrinsics fixed. The returned pose never has
// higher robust cost than the initial one. Throws std::invalid_argument with
// fewer than 3 correspondences in total.
RigidTransform refine_pose(const RigidTransform& initial_bw,
                           const std::vector<CorrespondenceSet>& inliers,
                           const std::vector<RigidTransform>& extrinsics,
                           const RefineOptions& opts = {});

// Robust cost of the pose-only problem (for tests and monotonicity checks).
double pose_cost(const RigidTransform& T_bw, const std::vector<CorrespondenceSet>& sets,
                 const std::vector<RigidTransform>& extrinsics, const RefineOptions& opts);

}  // namespace rovo
