#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rovo/geometry.hpp"
#include "rovo/rig.hpp"

namespace rovo {

enum class Alignment { None, Se3 };

struct ExtrinsicError {
  int cam = 0;
  double rotation_deg = 0.0;   // relative to the reference camera, vs. truth
  double translation_m = 0.0;
};

struct EvalSummary {
  double translation_rmse = 0.0;
  double mean_ate = 0.0;
  double max_ate = 0.0;
  int common_frames = 0;
  std::optional<double> avg_inlier_ratio_pct;
  std::optional<double> avg_reproj_err_deg;
  std::vector<ExtrinsicError> extrinsic_errors;
};

// Frames are matched by index (same clock). With Alignment::Se3 the estimate
// is first registered to the ground truth by the closed-form rigid fit over
// the common positions. Throws when the frame sets do not overlap.
EvalSummary evaluate_trajectory(const std::vector<std::pair<int, RigidTransform>>& estimate,
                                const std::vector<std::pair<int, RigidTransform>>& ground_truth,
                                Alignment alignment);

// Least-squares rigid transform G minimizing sum ||gt_i - G * est_i||^2
// (orthogonal Procrustes, no scale). Requires >= 3 non-degenerate points.
RigidTransform rigid_align(const std::vector<Vector3d>& est, const std::vector<Vector3d>& gt);

// Rotation/translation error of each camera's pose relative to camera 0,
// estimated vs. true rig.
std::vector<ExtrinsicError> relative_extrinsic_errors(
    const std::vector<RigidTransform>& estimated, const std::vector<RigidTransform>& truth);

// Same, but the estimate is given directly as relative transforms T_{c<-ref}
// (e.g. parsed from an extrinsic history csv).
std::vector<ExtrinsicError> relative_extrinsic_errors_vs_rig(
    const std::vector<RigidTransform>& relative_estimated,
    const std::vector<RigidTransform>& truth);

// Relative extrinsics of the last frame recorded in an extrinsics csv
// ("frame,cam,pitch_deg,roll_deg,yaw_deg,tx,ty,tz").
std::vector<RigidTransform> read_extrinsics_csv_final(const std::string& path);

// Column means of a metrics csv produced by the pipeline.
struct MetricsAverages {
  double inlier_ratio_pct = 0.0;
  double reproj_err_deg = 0.0;
  int rows = 0;
};
MetricsAverages read_metrics_averages(const std::string& path);

}  // namespace rovo
