#pragma once

#include <string>
#include <vector>

#include "rovo/dataset_io.hpp"
#include "rovo/estimation.hpp"
#include "rovo/frontend.hpp"
#include "rovo/window_ba.hpp"

namespace rovo {

// GTExt / NoisyExt keep the provided extrinsics frozen; OnlineExt optimizes
// them inside the window (all but the reference camera, whose frame defines
// the body gauge).
enum class PipelineMode { NoisyExt, OnlineExt, GTExt };

PipelineMode pipeline_mode_from_string(const std::string& s);
std::string to_string(PipelineMode m);

struct PipelineConfig {
  PipelineMode mode = PipelineMode::GTExt;
  RansacParams ransac;
  LmSettings lm;
  MatchThresholds match;
  double association_gate = deg2rad(20.0);  // prediction-based gating
  double multi_view_weight = 2.0;
  int n_window = 10;
  int min_inliers = 6;           // below this a frame counts as failed
  double warp_fov_span = deg2rad(200.0);
  int warp_width = 1200;
  int warp_height = 400;
  // Expected scale (degrees, std per axis) of the initial extrinsic error.
  // Nonzero values widen the matching filters, the association gate and the
  // inlier threshold so the frontend survives a miscalibrated rig; with
  // accurate extrinsics the defaults stay in effect.
  double extrinsic_uncertainty_deg = 0.0;
  uint64_t seed = 0;

  PipelineConfig() {
    // Per-frame windows are warm-started; a short LM budget is enough.
    lm.max_iterations = 15;
  }
};

struct FrameRecord {
  int frame = 0;
  RigidTransform T_wb;  // body-in-world (trajectory convention)
  bool ransac_failed = false;
  double inlier_ratio = 0.0;      // fraction in [0, 1]
  double reproj_err_deg = 0.0;    // mean angular error of the inliers
  int num_landmarks = 0;
};

struct PipelineOutput {
  std::vector<FrameRecord> records;
  // Per processed frame, the relative extrinsics (reference camera 0).
  std::vector<std::vector<RelativeExtrinsic>> extrinsic_history;
  std::vector<RigidTransform> final_extrinsics;

  std::vector<std::pair<int, RigidTransform>> trajectory() const;
};

// Runs the frame loop: associate tracks -> multi-view RANSAC -> pose
// refinement -> triangulate new landmarks from inter-view matches -> slide
// window -> bundle adjust. Frame 0 initializes the world at the origin and
// bootstraps landmarks from the inter-camera stereo overlap. RANSAC failures
// fall back to a constant-velocity pose; a long run of consecutive failures
// aborts with a diagnostic (std::runtime_error).
PipelineOutput run_pipeline(const Dataset& dataset, const RigConfig& rig,
                            const PipelineConfig& config);

// metrics csv: "frame,inlier_ratio,reproj_err_deg,num_landmarks"
void write_metrics_csv(const PipelineOutput& out, const std::string& path);
// extrinsics csv: "frame,cam,pitch_deg,roll_deg,yaw_deg,tx,ty,tz"
void write_extrinsics_csv(const PipelineOutput& out, const std::string& path);

}  // namespace rovo
