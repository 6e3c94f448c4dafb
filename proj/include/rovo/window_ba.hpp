#pragma once

#include <deque>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "rovo/lm_solver.hpp"
#include "rovo/rig.hpp"
#include "rovo/synthetic_world.hpp"

namespace rovo {

struct FrameState {
  int frame_id = 0;
  RigidTransform T_bw;  // body-from-world
};

struct WindowObservation {
  int frame_id = 0;
  int cam = 0;
  int64_t landmark = 0;
  UnitRay bearing;     // camera frame
  double weight = 1.0; // omega; > 1 for landmarks seen by several cameras
};

// Active optimization window: recent frames, the landmarks they observe, the
// rig extrinsics, and the observation graph.
struct WindowState {
  std::deque<FrameState> frames;
  std::map<int64_t, Vector3d> landmarks;
  std::vector<RigidTransform> extrinsics;  // per camera, T_cb
  std::vector<BaselinePair> baselines;     // fixed reference lengths
  std::vector<WindowObservation> observations;
  int n_window = 10;

  const FrameState* find_frame(int frame_id) const;
  FrameState* find_frame(int frame_id);
};

WindowState make_window(const RigConfig& rig, int n_window);

struct BaOptions {
  bool optimize_poses = true;
  bool optimize_landmarks = true;
  bool optimize_extrinsics = false;
  // Fixes the gauge when poses and landmarks both float; the oldest frame's
  // pose is held constant.
  bool freeze_oldest_frame = true;
  // Reference camera whose extrinsic stays fixed while the others move.
  int fixed_extrinsic_cam = 0;
  LmSettings settings;
};

// Residual system over the window: per observation a 3-vector
// sqrt(w)*(bearing - pi0(T_cb * T_bw * X)) under a Cauchy loss, plus a
// sqrt(lambda_b)*(||c_j - c_i|| - L0) penalty per baseline pair. Landmark
// blocks are eliminated via the Schur complement inside reduced_system.
// Throws std::invalid_argument on an empty window or dangling references.
class WindowProblem : public LmProblem {
 public:
  WindowProblem(WindowState& state, const BaOptions& opts);
  ~WindowProblem() override;

  int reduced_dim() const override;
  double current_cost() const override;
  void linearize() override;
  void reduced_system(double damping, Eigen::MatrixXd& H, Eigen::VectorXd& b) override;
  void apply_step(const Eigen::VectorXd& dx, double damping) override;
  void save_state() override;
  void restore_state() override;
  double gradient_inf_norm() const override;

  // Residual and analytic Jacobians of one observation at the current state
  // (exposed for finite-difference verification). Jacobian columns follow the
  // update order: [pose w,v | extrinsic w,v | landmark dX].
  Vector3d observation_residual(const WindowObservation& obs,
                                Eigen::Matrix<double, 3, 6>* J_pose,
                                Eigen::Matrix<double, 3, 6>* J_ext,
                                Eigen::Matrix<double, 3, 3>* J_landmark) const;
  double baseline_residual(const BaselinePair& pair, Eigen::Matrix<double, 1, 6>* J_i,
                           Eigen::Matrix<double, 1, 6>* J_j) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<WindowProblem> build_problem(WindowState& state, const BaOptions& opts);

// Builds the problem and runs the LM loop in place.
LmReport solve_lm(WindowState& state, const BaOptions& opts);

// Appends the frame with its new landmarks/observations, then slides: when
// the window exceeds n_window frames the oldest frame's observations leave,
// and landmarks left with fewer than two observations are removed. Returns
// the removed landmark ids.
std::vector<int64_t> update_window(WindowState& state, const FrameState& frame,
                                   const std::map<int64_t, Vector3d>& new_landmarks,
                                   const std::vector<WindowObservation>& new_observations);

// Sets weight = multi_view_weight on every observation of a landmark seen by
// at least two distinct cameras inside the window, 1 otherwise.
void set_multi_view_weights(WindowState& state, double multi_view_weight);

// Relative pose of each camera with respect to the reference camera,
// reported as Euler angles of T_{j<-ref} = T_jb * inverse(T_ref_b).
struct RelativeExtrinsic {
  int cam = 0;
  double pitch = 0.0;  // about camera x, radians
  double yaw = 0.0;    // about camera y
  double roll = 0.0;   // about camera z
  Vector3d translation{0, 0, 0};
};

std::vector<RelativeExtrinsic> extrinsic_report(const std::vector<RigidTransform>& extrinsics,
                                                int reference_cam);

RigidTransform relative_extrinsic_transform(const RelativeExtrinsic& rel);

}  // namespace rovo
