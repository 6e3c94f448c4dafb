#include "rovo/evaluation.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "rovo/window_ba.hpp"

namespace rovo {

RigidTransform rigid_align(const std::vector<Vector3d>& est, const std::vector<Vector3d>& gt) {
  if (est.size() != gt.size() || est.size() < 3) {
    throw std::invalid_argument("rigid_align: need >= 3 paired points");
  }
  Vector3d me = Vector3d::Zero(), mg = Vector3d::Zero();
  for (size_t i = 0; i < est.size(); ++i) {
    me += est[i];
    mg += gt[i];
  }
  me /= static_cast<double>(est.size());
  mg /= static_cast<double>(est.size());
  Matrix3d H = Matrix3d::Zero();
  for (size_t i = 0; i < est.size(); ++i) {
    H += (est[i] - me) * (gt[i] - mg).transpose();
  }
  Eigen::JacobiSVD<Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d R = svd.matrixV() * svd.matrixU().transpose();
  if (R.determinant() < 0) {
    Matrix3d V = svd.matrixV();
    V.col(2) *= -1.0;
    R = V * svd.matrixU().transpose();
  }
  RigidTransform G;
  G.rotation = matrix_to_axis_angle(R);
  G.translation = mg - R * me;
  return G;
}

EvalSummary evaluate_trajectory(const std::vector<std::pair<int, RigidTransform>>& estimate,
                                const std::vector<std::pair<int, RigidTransform>>& ground_truth,
                                Alignment alignment) {
  std::map<int, Vector3d> gt;
  for (const auto& [f, T] : ground_truth) gt[f] = T.translation;
  std::vector<Vector3d> p_est, p_gt;
  for (const auto& [f, T] : estimate) {
    const auto it = gt.find(f);
    if (it == gt.end()) continue;
    p_est.push_back(T.translation);
    p_gt.push_back(it->second);
  }
  if (p_est.empty()) {
    throw std::invalid_argument("evaluate_trajectory: no common frames");
  }

  if (alignment == Alignment::Se3 && p_est.size() >= 3) {
    const RigidTransform G = rigid_align(p_est, p_gt);
    const Matrix3d R = G.rotation_matrix();
    for (auto& p : p_est) p = R * p + G.translation;
  }

  EvalSummary s;
  s.common_frames = static_cast<int>(p_est.size());
  double sq_sum = 0.0;
  for (size_t i = 0; i < p_est.size(); ++i) {
    const double e = (p_est[i] - p_gt[i]).norm();
    sq_sum += e * e;
    s.mean_ate += e;
    s.max_ate = std::max(s.max_ate, e);
  }
  s.mean_ate /= static_cast<double>(p_est.size());
  s.translation_rmse = std::sqrt(sq_sum / static_cast<double>(p_est.size()));
  return s;
}

std::vector<ExtrinsicError> relative_extrinsic_errors(
    const std::vector<RigidTransform>& estimated, const std::vector<RigidTransform>& truth) {
  if (estimated.size() != truth.size() || estimated.size() < 2) {
    throw std::invalid_argument("relative_extrinsic_errors: rig size mismatch");
  }
  const RigidTransform est_ref = inverse(estimated[0]);
  const RigidTransform gt_ref = inverse(truth[0]);
  std::vector<ExtrinsicError> out;
  for (size_t c = 0; c < estimated.size(); ++c) {
    const RigidTransform rel_est = compose(estimated[c], est_ref);
    const RigidTransform rel_gt = compose(truth[c], gt_ref);
    ExtrinsicError e;
    e.cam = static_cast<int>(c);
    e.rotation_deg = rad2deg(
        rotation_angle(rel_est.rotation_matrix() * rel_gt.rotation_matrix().transpose()));
    e.translation_m = (rel_est.translation - rel_gt.translation).norm();
    out.push_back(e);
  }
  return out;
}

std::vector<ExtrinsicError> relative_extrinsic_errors_vs_rig(
    const std::vector<RigidTransform>& relative_estimated,
    const std::vector<RigidTransform>& truth) {
  if (relative_estimated.size() != truth.size() || truth.size() < 2) {
    throw std::invalid_argument("relative_extrinsic_errors_vs_rig: rig size mismatch");
  }
  const RigidTransform gt_ref = inverse(truth[0]);
  std::vector<ExtrinsicError> out;
  for (size_t c = 0; c < truth.size(); ++c) {
    const RigidTransform rel_gt = compose(truth[c], gt_ref);
    ExtrinsicError e;
    e.cam = static_cast<int>(c);
    e.rotation_deg = rad2deg(rotation_angle(relative_estimated[c].rotation_matrix() *
                                            rel_gt.rotation_matrix().transpose()));
    e.translation_m = (relative_estimated[c].translation - rel_gt.translation).norm();
    out.push_back(e);
  }
  return out;
}

std::vector<RigidTransform> read_extrinsics_csv_final(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  std::map<int, RelativeExtrinsic> last;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    double v[8];
    for (int i = 0; i < 8; ++i) {
      if (!std::getline(ls, cell, ',')) throw std::runtime_error("bad extrinsics csv row");
      v[i] = std::stod(cell);
    }
    RelativeExtrinsic rel;
    rel.cam = static_cast<int>(v[1]);
    rel.pitch = deg2rad(v[2]);
    rel.roll = deg2rad(v[3]);
    rel.yaw = deg2rad(v[4]);
    rel.translation = Vector3d(v[5], v[6], v[7]);
    last[rel.cam] = rel;  // later frames overwrite earlier ones
  }
  std::vector<RigidTransform> out;
  for (const auto& [cam, rel] : last) out.push_back(relative_extrinsic_transform(rel));
  return out;
}

MetricsAverages read_metrics_averages(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  MetricsAverages avg;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    double vals[3] = {0, 0, 0};
    std::getline(ls, cell, ',');  // frame
    for (int i = 0; i < 3 && std::getline(ls, cell, ','); ++i) vals[i] = std::stod(cell);
    avg.inlier_ratio_pct += 100.0 * vals[0];
    avg.reproj_err_deg += vals[1];
    ++avg.rows;
  }
  if (avg.rows > 0) {
    avg.inlier_ratio_pct /= avg.rows;
    avg.reproj_err_deg /= avg.rows;
  }
  return avg;
}

}  // namespace rovo
