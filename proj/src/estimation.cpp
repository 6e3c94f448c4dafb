#include "rovo/estimation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rovo/lm_solver.hpp"

namespace rovo {

namespace {

// Real roots of a polynomial (coefficients lowest order first, degree <= 4)
// via the companion-matrix eigenvalues, with a couple of Newton polish steps.
std::vector<double> real_roots(std::vector<double> coeffs) {
  while (coeffs.size() > 1 && std::abs(coeffs.back()) < 1e-14) coeffs.pop_back();
  const int deg = static_cast<int>(coeffs.size()) - 1;
  std::vector<double> roots;
  if (deg <= 0) return roots;
  if (deg == 1) {
    roots.push_back(-coeffs[0] / coeffs[1]);
    return roots;
  }
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 0; i < deg; ++i) companion(0, i) = -coeffs[deg - 1 - i] / coeffs[deg];
  for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> eig(companion, false);

  auto eval = [&](double x, double& p, double& dp) {
    p = coeffs[deg];
    dp = 0.0;
    for (int i = deg - 1; i >= 0; --i) {
      dp = dp * x + p;
      p = p * x + coeffs[i];
    }
  };
  for (int i = 0; i < deg; ++i) {
    const auto z = eig.eigenvalues()[i];
    if (std::abs(z.imag()) > 1e-6 * std::max(1.0, std::abs(z.real()))) continue;
    double x = z.real();
    // Guarded Newton: a multiple root has p' ~ 0 nearby, where a raw step
    // would fling the estimate away; keep the eigenvalue in that case.
    for (int it = 0; it < 3; ++it) {
      double p, dp;
      eval(x, p, dp);
      if (std::abs(dp) < 1e-300) break;
      const double step = p / dp;
      if (!std::isfinite(step) || std::abs(step) > 0.1 * (1.0 + std::abs(x))) break;
      x -= step;
    }
    roots.push_back(x);
  }
  return roots;
}

// poly helpers, coefficients lowest order first
std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

void poly_add_scaled(std::vector<double>& a, const std::vector<double>& b, double s) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (size_t i = 0; i < b.size(); ++i) a[i] += s * b[i];
}

// Gauss-Newton polish of the three depths on the pairwise distance
// equations. Steps are accepted only when they reduce the residual, so a
// near-singular system (tangent solution branches) cannot make things worse.
void polish_depths(double cos_ab, double cos_ac, double cos_bc, double d_ab, double d_ac,
                   double d_bc, Eigen::Vector3d& s) {
  auto residual = [&](const Eigen::Vector3d& v) {
    return Eigen::Vector3d(
        v[0] * v[0] + v[1] * v[1] - 2.0 * v[0] * v[1] * cos_ab - d_ab * d_ab,
        v[0] * v[0] + v[2] * v[2] - 2.0 * v[0] * v[2] * cos_ac - d_ac * d_ac,
        v[1] * v[1] + v[2] * v[2] - 2.0 * v[1] * v[2] * cos_bc - d_bc * d_bc);
  };
  for (int it = 0; it < 3; ++it) {
    const Eigen::Vector3d f = residual(s);
    Eigen::Matrix3d J;
    J << 2 * s[0] - 2 * s[1] * cos_ab, 2 * s[1] - 2 * s[0] * cos_ab, 0.0,
         2 * s[0] - 2 * s[2] * cos_ac, 0.0, 2 * s[2] - 2 * s[0] * cos_ac,
         0.0, 2 * s[1] - 2 * s[2] * cos_bc, 2 * s[2] - 2 * s[1] * cos_bc;
    const Eigen::Vector3d step = J.fullPivLu().solve(f);
    if (!step.allFinite()) return;
    const Eigen::Vector3d trial = s - step;
    if (residual(trial).norm() >= f.norm()) return;
    s = trial;
  }
}

// Exactly-determined Gauss-Newton on the three bearing constraints over the
// 6-dof pose; cleans up whatever accuracy the depth route left behind.
void polish_pose(const std::array<UnitRay, 3>& bearings, const std::array<Vector3d, 3>& points,
                 RigidTransform& T) {
  for (int it = 0; it < 3; ++it) {
    const Matrix3d R = T.rotation_matrix();
    Eigen::Matrix<double, 9, 6> J;
    Eigen::Matrix<double, 9, 1> r;
    for (int i = 0; i < 3; ++i) {
      const Vector3d X_c = R * points[i] + T.translation;
      const double n = X_c.norm();
      if (n < 1e-12) return;
      const Vector3d u = X_c / n;
      const Matrix3d A = (Matrix3d::Identity() - u * u.transpose()) / n;
      r.segment<3>(3 * i) = bearings[i].dir - u;
      J.block<3, 3>(3 * i, 0) = A * R * skew(points[i]);
      J.block<3, 3>(3 * i, 3) = -A;
    }
    Eigen::Matrix<double, 6, 6> H = J.transpose() * J;
    H.diagonal().array() += 1e-14;
    const Eigen::Matrix<double, 6, 1> dx = H.ldlt().solve(-J.transpose() * r);
    if (!dx.allFinite()) return;
    T.rotation = matrix_to_axis_angle(R * axis_angle_to_matrix(dx.head<3>()));
    T.translation += dx.tail<3>();
  }
}

// Rigid fit camera_pts = R * world_pts + t (three points, Kabsch with
// reflection guard).
RigidTransform absolute_orientation(const std::array<Vector3d, 3>& world,
                                    const std::array<Vector3d, 3>& camera) {
  const Vector3d wc = (world[0] + world[1] + world[2]) / 3.0;
  const Vector3d cc = (camera[0] + camera[1] + camera[2]) / 3.0;
  Matrix3d H = Matrix3d::Zero();
  for (int i = 0; i < 3; ++i) H += (world[i] - wc) * (camera[i] - cc).transpose();
  Eigen::JacobiSVD<Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d R = svd.matrixV() * svd.matrixU().transpose();
  if (R.determinant() < 0) {
    Matrix3d V = svd.matrixV();
    V.col(2) *= -1.0;
    R = V * svd.matrixU().transpose();
  }
  RigidTransform T;
  T.rotation = matrix_to_axis_angle(R);
  T.translation = cc - R * wc;
  return T;
}

}  // namespace

std::vector<RigidTransform> p3p(const std::array<UnitRay, 3>& bearings,
                                const std::array<Vector3d, 3>& points) {
  const Vector3d& P1 = points[0];
  const Vector3d& P2 = points[1];
  const Vector3d& P3 = points[2];
  const double scale2 = std::max({(P2 - P1).squaredNorm(), (P3 - P1).squaredNorm(),
                                  (P3 - P2).squaredNorm()});
  if ((P2 - P1).cross(P3 - P1).norm() < 1e-9 * std::max(scale2, 1e-12)) {
    throw std::invalid_argument("p3p: collinear world points");
  }

  const double a = (P2 - P3).norm();  // side opposite P1
  const double b = (P1 - P3).norm();  // side opposite P2
  const double c = (P1 - P2).norm();  // side opposite P3
  const double cos_alpha = bearings[1].dir.dot(bearings[2].dir);
  const double cos_beta = bearings[0].dir.dot(bearings[2].dir);
  const double cos_gamma = bearings[0].dir.dot(bearings[1].dir);

  const double A = (a * a) / (b * b);
  const double B = (c * c) / (b * b);

  // With depth ratios x = s2/s1, y = s3/s1 the law-of-cosines system gives
  //   (I)  x^2 + y^2 - 2xy cos_alpha - A*Q(y) = 0
  //   (II) x^2 - 2x cos_gamma + 1   - B*Q(y) = 0,  Q(y) = 1 + y^2 - 2y cos_beta.
  // (I)-(II) is linear in x: x = N(y)/D(y); substituting into (II) yields a
  // quartic in y. The products are expanded numerically.
  const std::vector<double> Q = {1.0, -2.0 * cos_beta, 1.0};
  std::vector<double> N = {1.0, 0.0, -1.0};
  poly_add_scaled(N, Q, A - B);
  const std::vector<double> D = {2.0 * cos_gamma, -2.0 * cos_alpha};

  std::vector<double> quartic = poly_mul(N, N);
  poly_add_scaled(quartic, poly_mul(N, D), -2.0 * cos_gamma);
  std::vector<double> tail = {1.0 - B, 2.0 * B * cos_beta, -B};  // 1 - B*Q(y)
  poly_add_scaled(quartic, poly_mul(tail, poly_mul(D, D)), 1.0);

  std::vector<RigidTransform> out;
  auto try_candidate = [&](double x, double y) {
    if (!(x > 0.0) || !(y > 0.0)) return;
    const double q = 1.0 + y * y - 2.0 * y * cos_beta;
    if (!(q > 1e-15)) return;
    Eigen::Vector3d s(b / std::sqrt(q), 0, 0);
    s[1] = x * s[0];
    s[2] = y * s[0];
    polish_depths(cos_gamma, cos_beta, cos_alpha, c, b, a, s);
    if (!(s[0] > 0 && s[1] > 0 && s[2] > 0)) return;
    const std::array<Vector3d, 3> cam_pts = {s[0] * bearings[0].dir, s[1] * bearings[1].dir,
                                             s[2] * bearings[2].dir};
    RigidTransform T = absolute_orientation(points, cam_pts);
    polish_pose(bearings, points, T);
    const Matrix3d R = T.rotation_matrix();
    for (int i = 0; i < 3; ++i) {
      const Vector3d proj = (R * points[i] + T.translation).normalized();
      if (angle_between(proj, bearings[i].dir) > 1e-6) return;
    }
    for (const auto& prev : out) {
      if ((prev.rotation - T.rotation).norm() < 1e-9 &&
          (prev.translation - T.translation).norm() < 1e-9) {
        return;
      }
    }
    out.push_back(T);
  };

  for (double y : real_roots(quartic)) {
    const double denom = D[0] + D[1] * y;
    if (std::abs(denom) > 1e-10) {
      try_candidate((N[0] + N[1] * y + N[2] * y * y) / denom, y);
    } else {
      // D(y) ~ 0: recover x from (II) directly.
      const double q = 1.0 + y * y - 2.0 * y * cos_beta;
      const double disc = cos_gamma * cos_gamma - (1.0 - B * q);
      if (disc < 0) continue;
      try_candidate(cos_gamma + std::sqrt(disc), y);
      try_candidate(cos_gamma - std::sqrt(disc), y);
    }
  }
  return out;
}

int pps_sample(const std::vector<int>& match_counts, Rng& rng, int min_count) {
  double total = 0.0;
  for (int c : match_counts) {
    if (c >= min_count) total += c;
  }
  if (total <= 0.0) {
    throw std::invalid_argument("pps_sample: no camera has enough matches");
  }
  const double u = rng.uniform() * total;
  double acc = 0.0;
  int last = -1;
  for (size_t j = 0; j < match_counts.size(); ++j) {
    if (match_counts[j] < min_count) continue;
    acc += match_counts[j];
    last = static_cast<int>(j);
    if (u < acc) return last;
  }
  return last;
}

void RansacParams::validate() const {
  if (!(tau_r > 0)) throw std::invalid_argument("RansacParams: tau_r must be positive");
  if (!(confidence > 0 && confidence < 1)) {
    throw std::invalid_argument("RansacParams: confidence must be in (0,1)");
  }
  if (iter_max_init <= 0 || iter_cap <= 0) {
    throw std::invalid_argument("RansacParams: iteration limits must be positive");
  }
}

double truncated_score(const RigidTransform& T_bw, const std::vector<CorrespondenceSet>& sets,
                       const std::vector<RigidTransform>& extrinsics, double tau_r) {
  double score = 0.0;
  const Matrix3d R_bw = T_bw.rotation_matrix();
  for (size_t j = 0; j < sets.size(); ++j) {
    const Matrix3d R_cb = extrinsics[j].rotation_matrix();
    const Matrix3d R_cw = R_cb * R_bw;
    const Vector3d t_cw = R_cb * T_bw.translation + extrinsics[j].translation;
    for (const auto& m : sets[j]) {
      const Vector3d v = R_cw * m.point + t_cw;
      const double n = v.norm();
      if (n < 1e-12) continue;
      const double r = (m.bearing.dir - v / n).norm();
      if (r < tau_r) score += tau_r - r;
    }
  }
  return score;
}

std::optional<RansacResult> multiview_p3p_ransac(const std::vector<CorrespondenceSet>& sets,
                                                 const std::vector<RigidTransform>& extrinsics,
                                                 const RansacParams& params) {
  params.validate();
  if (sets.size() != extrinsics.size()) {
    throw std::invalid_argument("multiview_p3p_ransac: sets/extrinsics size mismatch");
  }
  std::vector<int> counts;
  int total = 0;
  for (const auto& s : sets) {
    counts.push_back(static_cast<int>(s.size()));
    total += static_cast<int>(s.size());
  }
  if (*std::max_element(counts.begin(), counts.end()) < 3) return std::nullopt;

  std::vector<RigidTransform> body_from_cam(extrinsics.size());
  for (size_t j = 0; j < extrinsics.size(); ++j) body_from_cam[j] = inverse(extrinsics[j]);

  RansacResult best;
  best.total_matches = total;
  bool have_best = false;
  int iter_max = std::min(params.iter_max_init, params.iter_cap);

  int iter = 0;
  for (; iter < iter_max; ++iter) {
    Rng rng(mix_seed(params.seed, static_cast<uint64_t>(iter)));
    const int j = pps_sample(counts, rng);
    const auto& set = sets[j];

    int i0 = rng.uniform_int(static_cast<int>(set.size()));
    int i1 = rng.uniform_int(static_cast<int>(set.size()));
    int i2 = rng.uniform_int(static_cast<int>(set.size()));
    if (i0 == i1 || i0 == i2 || i1 == i2) continue;

    std::vector<RigidTransform> cam_poses;
    try {
      cam_poses = p3p({set[i0].bearing, set[i1].bearing, set[i2].bearing},
                      {set[i0].point, set[i1].point, set[i2].point});
    } catch (const std::invalid_argument&) {
      continue;  // degenerate sample
    }

    for (const auto& T_cw : cam_poses) {
      const RigidTransform T_bw = compose(body_from_cam[j], T_cw);
      const double score = truncated_score(T_bw, sets, extrinsics, params.tau_r);
      if (!have_best || score > best.score) {
        have_best = true;
        best.pose_bw = T_bw;
        best.score = score;

        // Recount inliers to refresh the mask and the adaptive budget.
        best.inlier_mask.assign(sets.size(), {});
        best.per_camera_inliers.assign(sets.size(), 0);
        best.total_inliers = 0;
        const Matrix3d R_bw = T_bw.rotation_matrix();
        for (size_t k = 0; k < sets.size(); ++k) {
          const Matrix3d R_cb = extrinsics[k].rotation_matrix();
          const Matrix3d R_cw = R_cb * R_bw;
          const Vector3d t_cw = R_cb * T_bw.translation + extrinsics[k].translation;
          best.inlier_mask[k].assign(sets[k].size(), false);
          for (size_t m = 0; m < sets[k].size(); ++m) {
            const Vector3d v = R_cw * sets[k][m].point + t_cw;
            const double n = v.norm();
            if (n < 1e-12) continue;
            if ((sets[k][m].bearing.dir - v / n).norm() < params.tau_r) {
              best.inlier_mask[k][m] = true;
              ++best.per_camera_inliers[k];
              ++best.total_inliers;
            }
          }
        }

        const double w = best.inlier_ratio();
        const double w3 = w * w * w;
        if (w3 >= 1.0 - 1e-12) {
          iter_max = std::min(iter_max, iter + 1);  // done
        } else if (w3 > 0.0) {
          const double need =
              std::ceil(std::log(1.0 - params.confidence) / std::log(1.0 - w3));
          iter_max = need < static_cast<double>(params.iter_cap)
                         ? std::max(1, static_cast<int>(need))
                         : params.iter_cap;
        }
      }
    }
  }
  if (!have_best) return std::nullopt;
  best.iterations = iter;
  return best;
}

namespace {

double rho_value(RobustLoss loss, double scale, double squared_norm) {
  if (loss == RobustLoss::Squared) return squared_norm;
  const double c2 = scale * scale;
  return c2 * std::log1p(squared_norm / c2);
}

double rho_weight(RobustLoss loss, double scale, double squared_norm) {
  if (loss == RobustLoss::Squared) return 1.0;
  const double c2 = scale * scale;
  return 1.0 / (1.0 + squared_norm / c2);
}

// 6-dof pose problem over [rotation perturbation w; translation step v] with
// right-multiplicative rotation updates.
class PoseOnlyProblem : public LmProblem {
 public:
  PoseOnlyProblem(RigidTransform pose, const std::vector<CorrespondenceSet>& sets,
                  const std::vector<RigidTransform>& extrinsics, const RefineOptions& opts)
      : pose_(std::move(pose)), sets_(sets), extrinsics_(extrinsics), opts_(opts) {}

  const RigidTransform& pose() const { return pose_; }

  int reduced_dim() const override { return 6; }

  double current_cost() const override {
    return pose_cost(pose_, sets_, extrinsics_, opts_);
  }

  void linearize() override {
    H_.setZero();
    b_.setZero();
    const Matrix3d R_bw = pose_.rotation_matrix();
    for (size_t j = 0; j < sets_.size(); ++j) {
      const Matrix3d R_cb = extrinsics_[j].rotation_matrix();
      for (const auto& m : sets_[j]) {
        const Vector3d X_b = R_bw * m.point + pose_.translation;
        const Vector3d X_c = R_cb * X_b + extrinsics_[j].translation;
        const double n = X_c.norm();
        if (n < 1e-12) continue;
        const Vector3d u = X_c / n;
        const Vector3d r = m.bearing.dir - u;
        const Matrix3d A = (Matrix3d::Identity() - u * u.transpose()) / n;
        Eigen::Matrix<double, 3, 6> J;
        J.leftCols<3>() = A * R_cb * R_bw * skew(m.point);
        J.rightCols<3>() = -A * R_cb;
        const double w = rho_weight(opts_.loss, opts_.loss_scale, r.squaredNorm());
        H_ += w * J.transpose() * J;
        b_ += -w * J.transpose() * r;
      }
    }
  }

  void reduced_system(double damping, Eigen::MatrixXd& H, Eigen::VectorXd& b) override {
    H = H_;
    b = b_;
    for (int i = 0; i < 6; ++i) H(i, i) += damping * std::max(H_(i, i), 1e-12);
  }

  void apply_step(const Eigen::VectorXd& dx, double) override {
    const Matrix3d R = pose_.rotation_matrix() * axis_angle_to_matrix(dx.head<3>());
    pose_.rotation = matrix_to_axis_angle(R);
    pose_.translation += dx.tail<3>();
  }

  void save_state() override { saved_ = pose_; }
  void restore_state() override { pose_ = saved_; }
  double gradient_inf_norm() const override { return b_.lpNorm<Eigen::Infinity>(); }

 private:
  RigidTransform pose_, saved_;
  const std::vector<CorrespondenceSet>& sets_;
  const std::vector<RigidTransform>& extrinsics_;
  RefineOptions opts_;
  Eigen::Matrix<double, 6, 6> H_ = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> b_ = Eigen::Matrix<double, 6, 1>::Zero();
};

}  // namespace

double pose_cost(const RigidTransform& T_bw, const std::vector<CorrespondenceSet>& sets,
                 const std::vector<RigidTransform>& extrinsics, const RefineOptions& opts) {
  double cost = 0.0;
  const Matrix3d R_bw = T_bw.rotation_matrix();
  for (size_t j = 0; j < sets.size(); ++j) {
    const Matrix3d R_cb = extrinsics[j].rotation_matrix();
    const Matrix3d R_cw = R_cb * R_bw;
    const Vector3d t_cw = R_cb * T_bw.translation + extrinsics[j].translation;
    for (const auto& m : sets[j]) {
      const Vector3d v = R_cw * m.point + t_cw;
      const double n = v.norm();
      if (n < 1e-12) continue;
      cost += rho_value(opts.loss, opts.loss_scale, (m.bearing.dir - v / n).squaredNorm());
    }
  }
  return cost;
}

RigidTransform refine_pose(const RigidTransform& initial_bw,
                           const std::vector<CorrespondenceSet>& inliers,
                           const std::vector<RigidTransform>& extrinsics,
                           const RefineOptions& opts) {
  size_t total = 0;
  for (const auto& s : inliers) total += s.size();
  if (total < 3) {
    throw std::invalid_argument("refine_pose: need at least 3 correspondences");
  }
  PoseOnlyProblem problem(initial_bw, inliers, extrinsics, opts);
  LmSettings settings;
  settings.max_iterations = opts.max_iterations;
  lm_solve(problem, settings);
  return problem.pose();
}

}  // namespace rovo
