#include "rovo/window_ba.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rovo {

const FrameState* WindowState::find_frame(int frame_id) const {
  for (const auto& f : frames) {
    if (f.frame_id == frame_id) return &f;
  }
  return nullptr;
}

FrameState* WindowState::find_frame(int frame_id) {
  for (auto& f : frames) {
    if (f.frame_id == frame_id) return &f;
  }
  return nullptr;
}

WindowState make_window(const RigConfig& rig, int n_window) {
  WindowState w;
  w.extrinsics = rig.extrinsics;
  w.baselines = rig.baselines;
  w.n_window = n_window;
  return w;
}

namespace {

double cauchy_value(double c, double u) { return c * c * std::log1p(u / (c * c)); }
double cauchy_weight(double c, double u) { return 1.0 / (1.0 + u / (c * c)); }

}  // namespace

struct WindowProblem::Impl {
  WindowState& state;
  BaOptions opts;

  // Parameter blocks: free frame poses first, then free extrinsics, 6 each.
  std::map<int, int> pose_block;  // frame_id -> block index
  std::map<int, int> ext_block;   // cam -> block index
  int n_blocks = 0;

  struct LandmarkBlock {
    int64_t id = 0;
    Matrix3d H_ll = Matrix3d::Zero();
    Vector3d b_l = Vector3d::Zero();
    Matrix3d K = Matrix3d::Zero();  // damped inverse from the last reduced_system
    std::map<int, Eigen::Matrix<double, 6, 3>> stripes;  // block -> Jp^T Jl
  };
  std::map<int64_t, int> landmark_index;
  std::vector<LandmarkBlock> landmark_blocks;

  Eigen::MatrixXd H_pp;
  Eigen::VectorXd b_p;

  // saved state
  std::deque<FrameState> saved_frames;
  std::map<int64_t, Vector3d> saved_landmarks;
  std::vector<RigidTransform> saved_extrinsics;

  explicit Impl(WindowState& s, const BaOptions& o) : state(s), opts(o) {
    if (state.frames.empty()) {
      throw std::invalid_argument("window: cannot build a problem from an empty window");
    }
    for (const auto& obs : state.observations) {
      if (!state.find_frame(obs.frame_id)) {
        throw std::invalid_argument("window: observation references a missing frame");
      }
      if (!state.landmarks.count(obs.landmark)) {
        throw std::invalid_argument("window: observation references a missing landmark");
      }
    }
    if (opts.optimize_poses) {
      for (size_t i = 0; i < state.frames.size(); ++i) {
        if (opts.freeze_oldest_frame && i == 0) continue;
        pose_block[state.frames[i].frame_id] = n_blocks++;
      }
    }
    if (opts.optimize_extrinsics) {
      for (int c = 0; c < static_cast<int>(state.extrinsics.size()); ++c) {
        if (c == opts.fixed_extrinsic_cam) continue;
        ext_block[c] = n_blocks++;
      }
    }
    if (opts.optimize_landmarks) {
      for (const auto& obs : state.observations) {
        if (!landmark_index.count(obs.landmark)) {
          landmark_index[obs.landmark] = static_cast<int>(landmark_blocks.size());
          landmark_blocks.push_back({});
          landmark_blocks.back().id = obs.landmark;
        }
      }
    }
  }

  double cost() const {
    double total = 0.0;
    std::map<int, std::pair<Matrix3d, Vector3d>> frame_pose;  // R_bw, t_bw
    for (const auto& f : state.frames) {
      frame_pose[f.frame_id] = {f.T_bw.rotation_matrix(), f.T_bw.translation};
    }
    std::vector<std::pair<Matrix3d, Vector3d>> cam_pose;
    for (const auto& e : state.extrinsics) {
      cam_pose.emplace_back(e.rotation_matrix(), e.translation);
    }
    const double c = opts.settings.obs_cauchy_scale;
    for (const auto& obs : state.observations) {
      const auto& [R_bw, t_bw] = frame_pose.at(obs.frame_id);
      const auto& [R_cb, t_cb] = cam_pose.at(obs.cam);
      const Vector3d X_b = R_bw * state.landmarks.at(obs.landmark) + t_bw;
      const Vector3d X_c = R_cb * X_b + t_cb;
      const double n = X_c.norm();
      if (n < 1e-12 || !std::isfinite(n)) {
        throw std::runtime_error("window: non-finite or zero-range residual at frame " +
                                 std::to_string(obs.frame_id) + " cam " +
                                 std::to_string(obs.cam) + " landmark " +
                                 std::to_string(obs.landmark));
      }
      const double u = obs.weight * (obs.bearing.dir - X_c / n).squaredNorm();
      total += cauchy_value(c, u);
    }
    for (const auto& pair : state.baselines) {
      const Vector3d c_i = -(cam_pose[pair.cam_i].first.transpose() * cam_pose[pair.cam_i].second);
      const Vector3d c_j = -(cam_pose[pair.cam_j].first.transpose() * cam_pose[pair.cam_j].second);
      const double d = (c_j - c_i).norm() - pair.length;
      total += opts.settings.baseline_weight * d * d;
    }
    if (!std::isfinite(total)) throw std::runtime_error("window: non-finite total cost");
    return total;
  }

  Vector3d residual(const WindowObservation& obs, Eigen::Matrix<double, 3, 6>* J_pose,
                    Eigen::Matrix<double, 3, 6>* J_ext, Matrix3d* J_lm) const {
    const FrameState* f = state.find_frame(obs.frame_id);
    const RigidTransform& ext = state.extrinsics[obs.cam];
    const Matrix3d R_bw = f->T_bw.rotation_matrix();
    const Matrix3d R_cb = ext.rotation_matrix();
    const Vector3d& X_w = state.landmarks.at(obs.landmark);
    const Vector3d X_b = R_bw * X_w + f->T_bw.translation;
    const Vector3d X_c = R_cb * X_b + ext.translation;
    const double n = X_c.norm();
    if (n < 1e-12) throw std::runtime_error("window: zero-range observation");
    const Vector3d u = X_c / n;
    const Matrix3d A = (Matrix3d::Identity() - u * u.transpose()) / n;
    if (J_pose) {
      J_pose->leftCols<3>() = A * R_cb * R_bw * skew(X_w);
      J_pose->rightCols<3>() = -A * R_cb;
    }
    if (J_ext) {
      J_ext->leftCols<3>() = A * R_cb * skew(X_b);
      J_ext->rightCols<3>() = -A;
    }
    if (J_lm) *J_lm = -A * R_cb * R_bw;
    return obs.bearing.dir - u;
  }

  double baseline_res(const BaselinePair& pair, Eigen::Matrix<double, 1, 6>* J_i,
                      Eigen::Matrix<double, 1, 6>* J_j) const {
    const double sqrt_w = std::sqrt(opts.settings.baseline_weight);
    const RigidTransform& Ti = state.extrinsics[pair.cam_i];
    const RigidTransform& Tj = state.extrinsics[pair.cam_j];
    const Matrix3d Ri = Ti.rotation_matrix();
    const Matrix3d Rj = Tj.rotation_matrix();
    const Vector3d c_i = -(Ri.transpose() * Ti.translation);
    const Vector3d c_j = -(Rj.transpose() * Tj.translation);
    const Vector3d diff = c_j - c_i;
    const double dist = diff.norm();
    if (dist < 1e-12) throw std::runtime_error("window: coincident camera centers");
    const Eigen::RowVector3d dir = (diff / dist).transpose();
    // Center sensitivity under the right-multiplicative update:
    // d c / d w = [c]x, d c / d v = -R^T.
    if (J_i) {
      J_i->leftCols<3>() = -sqrt_w * dir * skew(c_i);
      J_i->rightCols<3>() = sqrt_w * dir * Ri.transpose();
    }
    if (J_j) {
      J_j->leftCols<3>() = sqrt_w * dir * skew(c_j);
      J_j->rightCols<3>() = -sqrt_w * dir * Rj.transpose();
    }
    return sqrt_w * (dist - pair.length);
  }

  void linearize() {
    H_pp.setZero(6 * n_blocks, 6 * n_blocks);
    b_p.setZero(6 * n_blocks);
    for (auto& lb : landmark_blocks) {
      lb.H_ll.setZero();
      lb.b_l.setZero();
      lb.stripes.clear();
    }
    const double c = opts.settings.obs_cauchy_scale;

    Eigen::Matrix<double, 3, 6> J_pose, J_ext;
    Matrix3d J_lm;
    for (const auto& obs : state.observations) {
      const auto pit = pose_block.find(obs.frame_id);
      const auto eit = ext_block.find(obs.cam);
      const bool has_pose = pit != pose_block.end();
      const bool has_ext = eit != ext_block.end();
      const auto lit = landmark_index.find(obs.landmark);
      const bool has_lm = lit != landmark_index.end();
      if (!has_pose && !has_ext && !has_lm) continue;

      const Vector3d r = residual(obs, has_pose ? &J_pose : nullptr,
                                  has_ext ? &J_ext : nullptr, has_lm ? &J_lm : nullptr);
      if (!r.allFinite()) {
        throw std::runtime_error("window: non-finite residual at frame " +
                                 std::to_string(obs.frame_id) + " cam " +
                                 std::to_string(obs.cam));
      }
      const double u = obs.weight * r.squaredNorm();
      const double w = obs.weight * cauchy_weight(c, u);

      struct Block {
        int idx;
        const Eigen::Matrix<double, 3, 6>* J;
      };
      Block blocks[2];
      int nb = 0;
      if (has_pose) blocks[nb++] = {pit->second, &J_pose};
      if (has_ext) blocks[nb++] = {eit->second, &J_ext};

      for (int a = 0; a < nb; ++a) {
        b_p.segment<6>(6 * blocks[a].idx) -= w * blocks[a].J->transpose() * r;
        for (int bidx = 0; bidx < nb; ++bidx) {
          H_pp.block<6, 6>(6 * blocks[a].idx, 6 * blocks[bidx].idx) +=
              w * blocks[a].J->transpose() * (*blocks[bidx].J);
        }
      }
      if (has_lm) {
        auto& lb = landmark_blocks[lit->second];
        lb.H_ll += w * J_lm.transpose() * J_lm;
        lb.b_l -= w * J_lm.transpose() * r;
        for (int a = 0; a < nb; ++a) {
          auto [it, inserted] = lb.stripes.try_emplace(blocks[a].idx);
          if (inserted) it->second.setZero();
          it->second += w * blocks[a].J->transpose() * J_lm;
        }
      }
    }

    Eigen::Matrix<double, 1, 6> Jb_i, Jb_j;
    for (const auto& pair : state.baselines) {
      const auto ei = ext_block.find(pair.cam_i);
      const auto ej = ext_block.find(pair.cam_j);
      if (ei == ext_block.end() && ej == ext_block.end()) continue;
      const double rb = baseline_res(pair, ei != ext_block.end() ? &Jb_i : nullptr,
                                     ej != ext_block.end() ? &Jb_j : nullptr);
      if (ei != ext_block.end()) {
        b_p.segment<6>(6 * ei->second) -= Jb_i.transpose() * rb;
        H_pp.block<6, 6>(6 * ei->second, 6 * ei->second) += Jb_i.transpose() * Jb_i;
      }
      if (ej != ext_block.end()) {
        b_p.segment<6>(6 * ej->second) -= Jb_j.transpose() * rb;
        H_pp.block<6, 6>(6 * ej->second, 6 * ej->second) += Jb_j.transpose() * Jb_j;
      }
      if (ei != ext_block.end() && ej != ext_block.end()) {
        H_pp.block<6, 6>(6 * ei->second, 6 * ej->second) += Jb_i.transpose() * Jb_j;
        H_pp.block<6, 6>(6 * ej->second, 6 * ei->second) += Jb_j.transpose() * Jb_i;
      }
    }
  }

  void reduce(double damping, Eigen::MatrixXd& H, Eigen::VectorXd& b) {
    H = H_pp;
    b = b_p;
    for (int i = 0; i < H.rows(); ++i) H(i, i) += damping * std::max(H(i, i), 1e-12);
    for (auto& lb : landmark_blocks) {
      Matrix3d Hd = lb.H_ll;
      for (int i = 0; i < 3; ++i) Hd(i, i) += damping * std::max(Hd(i, i), 1e-12);
      lb.K = Hd.inverse();
      if (!lb.K.allFinite()) {
        // Isolated or degenerate landmark: leave it out of this step.
        lb.K.setZero();
        continue;
      }
      for (const auto& [pi, Mi] : lb.stripes) {
        b.segment<6>(6 * pi) -= Mi * (lb.K * lb.b_l);
        for (const auto& [pj, Mj] : lb.stripes) {
          H.block<6, 6>(6 * pi, 6 * pj) -= Mi * lb.K * Mj.transpose();
        }
      }
    }
  }

  void apply(const Eigen::VectorXd& dx) {
    for (auto& f : state.frames) {
      const auto it = pose_block.find(f.frame_id);
      if (it == pose_block.end()) continue;
      const Eigen::Matrix<double, 6, 1> d = dx.segment<6>(6 * it->second);
      const Matrix3d R = f.T_bw.rotation_matrix() * axis_angle_to_matrix(d.head<3>());
      f.T_bw.rotation = matrix_to_axis_angle(R);
      f.T_bw.translation += d.tail<3>();
    }
    for (auto& [cam, idx] : ext_block) {
      const Eigen::Matrix<double, 6, 1> d = dx.segment<6>(6 * idx);
      RigidTransform& T = state.extrinsics[cam];
      const Matrix3d R = T.rotation_matrix() * axis_angle_to_matrix(d.head<3>());
      T.rotation = matrix_to_axis_angle(R);
      T.translation += d.tail<3>();
    }
    for (auto& lb : landmark_blocks) {
      Vector3d rhs = lb.b_l;
      for (const auto& [pi, Mi] : lb.stripes) {
        rhs -= Mi.transpose() * dx.segment<6>(6 * pi);
      }
      state.landmarks.at(lb.id) += lb.K * rhs;
    }
  }

  double gradient_norm() const {
    double g = b_p.size() ? b_p.lpNorm<Eigen::Infinity>() : 0.0;
    for (const auto& lb : landmark_blocks) {
      g = std::max(g, lb.b_l.lpNorm<Eigen::Infinity>());
    }
    return g;
  }
};

WindowProblem::WindowProblem(WindowState& state, const BaOptions& opts)
    : impl_(std::make_unique<Impl>(state, opts)) {}

WindowProblem::~WindowProblem() = default;

int WindowProblem::reduced_dim() const { return 6 * impl_->n_blocks; }
double WindowProblem::current_cost() const { return impl_->cost(); }
void WindowProblem::linearize() { impl_->linearize(); }

void WindowProblem::reduced_system(double damping, Eigen::MatrixXd& H, Eigen::VectorXd& b) {
  impl_->reduce(damping, H, b);
}

void WindowProblem::apply_step(const Eigen::VectorXd& dx, double) { impl_->apply(dx); }

void WindowProblem::save_state() {
  impl_->saved_frames = impl_->state.frames;
  impl_->saved_landmarks = impl_->state.landmarks;
  impl_->saved_extrinsics = impl_->state.extrinsics;
}

void WindowProblem::restore_state() {
  impl_->state.frames = impl_->saved_frames;
  impl_->state.landmarks = impl_->saved_landmarks;
  impl_->state.extrinsics = impl_->saved_extrinsics;
}

double WindowProblem::gradient_inf_norm() const { return impl_->gradient_norm(); }

Vector3d WindowProblem::observation_residual(const WindowObservation& obs,
                                             Eigen::Matrix<double, 3, 6>* J_pose,
                                             Eigen::Matrix<double, 3, 6>* J_ext,
                                             Eigen::Matrix<double, 3, 3>* J_landmark) const {
  return impl_->residual(obs, J_pose, J_ext, J_landmark);
}

double WindowProblem::baseline_residual(const BaselinePair& pair, Eigen::Matrix<double, 1, 6>* J_i,
                                        Eigen::Matrix<double, 1, 6>* J_j) const {
  return impl_->baseline_res(pair, J_i, J_j);
}

std::unique_ptr<WindowProblem> build_problem(WindowState& state, const BaOptions& opts) {
  return std::make_unique<WindowProblem>(state, opts);
}

LmReport solve_lm(WindowState& state, const BaOptions& opts) {
  WindowProblem problem(state, opts);
  if (problem.reduced_dim() == 0 &&
      !(opts.optimize_landmarks && !state.landmarks.empty())) {
    LmReport r;
    r.initial_cost = r.final_cost = problem.current_cost();
    r.termination = LmTermination::Gradient;
    return r;
  }
  return lm_solve(problem, opts.settings);
}

std::vector<int64_t> update_window(WindowState& state, const FrameState& frame,
                                   const std::map<int64_t, Vector3d>& new_landmarks,
                                   const std::vector<WindowObservation>& new_observations) {
  state.frames.push_back(frame);
  for (const auto& [id, pos] : new_landmarks) state.landmarks[id] = pos;
  for (const auto& obs : new_observations) state.observations.push_back(obs);

  std::vector<int64_t> dropped;
  bool slid = false;
  while (static_cast<int>(state.frames.size()) > state.n_window) {
    const int old_id = state.frames.front().frame_id;
    state.frames.pop_front();
    std::erase_if(state.observations,
                  [&](const WindowObservation& o) { return o.frame_id == old_id; });
    slid = true;
  }
  if (slid) {
    // Landmarks need two observations to stay constrained.
    std::map<int64_t, int> obs_count;
    for (const auto& o : state.observations) ++obs_count[o.landmark];
    for (auto it = state.landmarks.begin(); it != state.landmarks.end();) {
      const auto c = obs_count.find(it->first);
      if (c == obs_count.end() || c->second < 2) {
        dropped.push_back(it->first);
        it = state.landmarks.erase(it);
      } else {
        ++it;
      }
    }
  }
  if (!dropped.empty()) {
    std::set<int64_t> gone(dropped.begin(), dropped.end());
    std::erase_if(state.observations,
                  [&](const WindowObservation& o) { return gone.count(o.landmark) > 0; });
  }
  return dropped;
}

void set_multi_view_weights(WindowState& state, double multi_view_weight) {
  std::map<int64_t, std::set<int>> cams;
  for (const auto& o : state.observations) cams[o.landmark].insert(o.cam);
  for (auto& o : state.observations) {
    o.weight = cams[o.landmark].size() >= 2 ? multi_view_weight : 1.0;
  }
}

std::vector<RelativeExtrinsic> extrinsic_report(const std::vector<RigidTransform>& extrinsics,
                                                int reference_cam) {
  if (extrinsics.size() < 2) {
    throw std::invalid_argument("extrinsic_report: need at least 2 cameras");
  }
  if (reference_cam < 0 || reference_cam >= static_cast<int>(extrinsics.size())) {
    throw std::invalid_argument("extrinsic_report: reference camera out of range");
  }
  const RigidTransform ref_inv = inverse(extrinsics[reference_cam]);
  std::vector<RelativeExtrinsic> out;
  for (int c = 0; c < static_cast<int>(extrinsics.size()); ++c) {
    const RigidTransform rel = compose(extrinsics[c], ref_inv);  // T_{c<-ref}
    const Vector3d e = euler_xyz_from_matrix(rel.rotation_matrix());
    RelativeExtrinsic r;
    r.cam = c;
    r.pitch = e[0];
    r.yaw = e[1];
    r.roll = e[2];
    r.translation = rel.translation;
    out.push_back(r);
  }
  return out;
}

RigidTransform relative_extrinsic_transform(const RelativeExtrinsic& rel) {
  RigidTransform T;
  T.rotation = matrix_to_axis_angle(euler_xyz_to_matrix(Vector3d(rel.pitch, rel.yaw, rel.roll)));
  T.translation = rel.translation;
  return T;
}

}  // namespace rovo
