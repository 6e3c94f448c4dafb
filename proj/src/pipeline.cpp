#include "rovo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

namespace rovo {

PipelineMode pipeline_mode_from_string(const std::string& s) {
  if (s == "NoisyExt") return PipelineMode::NoisyExt;
  if (s == "OnlineExt") return PipelineMode::OnlineExt;
  if (s == "GTExt") return PipelineMode::GTExt;
  throw std::invalid_argument("unknown mode '" + s + "' (NoisyExt|OnlineExt|GTExt)");
}

std::string to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::NoisyExt: return "NoisyExt";
    case PipelineMode::OnlineExt: return "OnlineExt";
    case PipelineMode::GTExt: return "GTExt";
  }
  return "?";
}

std::vector<std::pair<int, RigidTransform>> PipelineOutput::trajectory() const {
  std::vector<std::pair<int, RigidTransform>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.emplace_back(r.frame, r.T_wb);
  return out;
}

namespace {

class Pipeline {
 public:
  Pipeline(const Dataset& dataset, const RigConfig& rig, const PipelineConfig& config)
      : dataset_(dataset), rig_(rig), config_(config) {
    rig_.validate(1e-8);
    if (dataset.frames.size() < 2) {
      throw std::invalid_argument("pipeline: dataset needs at least 2 frames");
    }
    if (config_.extrinsic_uncertainty_deg > 0.0) {
      const double unc = deg2rad(config_.extrinsic_uncertainty_deg);
      auto& m = config_.match;
      m.max_epipolar_angle = std::max(m.max_epipolar_angle, 2.5 * unc);
      const double warp_focal = config_.warp_width / config_.warp_fov_span;
      m.max_warped_y_dist = std::max(m.max_warped_y_dist, warp_focal * 2.5 * unc);
      config_.association_gate = std::max(config_.association_gate, 5.0 * unc);
      config_.ransac.tau_r =
          std::max(config_.ransac.tau_r, 2.0 * std::sin(std::min(1.0, 1.0 * unc) / 2.0));
    }
    window_ = make_window(rig_, config_.n_window);
    for (int c = 0; c < rig_.camera_count(); ++c) {
      warp_cfgs_.push_back(build_config(rig_, c, config_.warp_width, config_.warp_height,
                                        config_.warp_fov_span));
    }
    ba_.optimize_extrinsics = config_.mode == PipelineMode::OnlineExt;
    ba_.settings = config_.lm;
  }

  PipelineOutput run() {
    PipelineOutput out;
    for (int f = 0; f < static_cast<int>(dataset_.frames.size()); ++f) {
      FrameRecord rec = process_frame(f);
      out.records.push_back(rec);
      out.extrinsic_history.push_back(extrinsic_report(window_.extrinsics, 0));
      // Refresh records of frames still in the window with their polished poses.
      for (const auto& fr : window_.frames) {
        out.records[fr.frame_id].T_wb = inverse(fr.T_bw);
      }

      if (rec.ransac_failed) {
        ++consecutive_failures_;
        const int limit = std::max(4, (f + 1) / 4);
        if (consecutive_failures_ > limit) {
          throw std::runtime_error(
              "pipeline: aborting at frame " + std::to_string(f) + " after " +
              std::to_string(consecutive_failures_) + " consecutive pose failures");
        }
      } else {
        consecutive_failures_ = 0;
      }
    }
    out.final_extrinsics = window_.extrinsics;
    return out;
  }

 private:
  FrameRecord process_frame(int f) {
    const auto& obs = dataset_.frames[f];
    FrameRecord rec;
    rec.frame = f;

    RigidTransform T_bw;  // this frame's estimate
    if (f == 0) {
      T_bw = RigidTransform::identity();
    } else {
      const RigidTransform T_bw_pred = predict_pose(f);
      const auto assoc =
          associate_tracks(obs, tracks_, window_.landmarks, rig_.camera_count());
      const auto sets = gated_sets(assoc, T_bw_pred);

      int total = 0;
      for (const auto& s : sets) total += static_cast<int>(s.size());

      RansacParams params = config_.ransac;
      params.seed = mix_seed(config_.seed, 0x5a5a + static_cast<uint64_t>(f));
      std::optional<RansacResult> ransac;
      if (total >= 3) ransac = multiview_p3p_ransac(sets, window_.extrinsics, params);

      if (!ransac || ransac->total_inliers < config_.min_inliers) {
        rec.ransac_failed = true;
        T_bw = T_bw_pred;
      } else {
        rec.inlier_ratio = ransac->inlier_ratio();
        std::vector<CorrespondenceSet> inliers(sets.size());
        for (size_t j = 0; j < sets.size(); ++j) {
          for (size_t m = 0; m < sets[j].size(); ++m) {
            if (ransac->inlier_mask[j][m]) inliers[j].push_back(sets[j][m]);
          }
        }
        RefineOptions ropts;
        ropts.loss_scale = config_.ransac.tau_r;
        T_bw = refine_pose(ransac->pose_bw, inliers, window_.extrinsics, ropts);
        rec.reproj_err_deg = mean_reproj_error_deg(T_bw, inliers);
      }
    }

    // Window bookkeeping for this frame.
    FrameState frame_state{f, T_bw};
    std::map<int64_t, Vector3d> new_landmarks;
    std::vector<WindowObservation> new_obs;
    collect_frame_observations(f, obs, T_bw, new_landmarks, new_obs);

    const auto dropped = update_window(window_, frame_state, new_landmarks, new_obs);
    for (int64_t id : dropped) tracks_.unbind_landmark(id);
    set_multi_view_weights(window_, config_.multi_view_weight);

    if (!window_.landmarks.empty()) solve_lm(window_, ba_);

    rec.num_landmarks = static_cast<int>(window_.landmarks.size());
    rec.T_wb = inverse(window_.frames.back().T_bw);
    return rec;
  }

  // Constant-velocity prediction in body-in-world space.
  RigidTransform predict_pose(int f) const {
    const FrameState* prev = window_.find_frame(f - 1);
    if (!prev) return RigidTransform::identity();
    const FrameState* prev2 = window_.find_frame(f - 2);
    if (!prev2) return prev->T_bw;
    // T_bw(f) = step * T_bw(f-1), step = T_bw(f-1) * T_bw(f-2)^-1.
    const RigidTransform step = compose(prev->T_bw, inverse(prev2->T_bw));
    return compose(step, prev->T_bw);
  }

  // Drops associations whose bearing disagrees with the predicted projection
  // by more than the gate.
  std::vector<CorrespondenceSet> gated_sets(const AssociationResult& assoc,
                                            const RigidTransform& T_bw_pred) const {
    std::vector<CorrespondenceSet> sets(rig_.camera_count());
    for (int j = 0; j < rig_.camera_count(); ++j) {
      const RigidTransform T_cw = compose(window_.extrinsics[j], T_bw_pred);
      const Matrix3d R = T_cw.rotation_matrix();
      for (const auto& corr : assoc.per_camera[j]) {
        const Vector3d v = R * corr.point + T_cw.translation;
        if (v.norm() < 1e-9) continue;
        if (angle_between(v, corr.bearing.dir) > config_.association_gate) continue;
        Correspondence c;
        c.bearing = corr.bearing;
        c.point = corr.point;
        c.track = corr.track;
        c.landmark = corr.landmark;
        sets[j].push_back(c);
      }
    }
    return sets;
  }

  double mean_reproj_error_deg(const RigidTransform& T_bw,
                               const std::vector<CorrespondenceSet>& sets) const {
    double sum = 0.0;
    int n = 0;
    for (size_t j = 0; j < sets.size(); ++j) {
      const RigidTransform T_cw = compose(window_.extrinsics[j], T_bw);
      const Matrix3d R = T_cw.rotation_matrix();
      for (const auto& m : sets[j]) {
        const Vector3d v = R * m.point + T_cw.translation;
        if (v.norm() < 1e-12) continue;
        sum += rad2deg(angle_between(v, m.bearing.dir));
        ++n;
      }
    }
    return n ? sum / n : 0.0;
  }

  // Associated inlier-track observations join the window; unbound tracks seen
  // by two neighboring cameras are triangulated into new landmarks.
  void collect_frame_observations(int f, const std::vector<Observation>& obs,
                                  const RigidTransform& T_bw,
                                  std::map<int64_t, Vector3d>& new_landmarks,
                                  std::vector<WindowObservation>& new_obs) {
    std::vector<RigidTransform> cam_poses;  // T_cw per camera at this frame
    for (int c = 0; c < rig_.camera_count(); ++c) {
      cam_poses.push_back(compose(window_.extrinsics[c], T_bw));
    }

    // Existing landmarks: keep observations that agree with the estimated
    // pose within the RANSAC inlier threshold (chordal).
    std::set<int64_t> bound_tracks;
    for (const auto& o : obs) {
      const auto lm = tracks_.landmark_of(o.track);
      if (!lm || !window_.landmarks.count(*lm)) continue;
      bound_tracks.insert(o.track);
      const Vector3d v = apply(cam_poses[o.cam], window_.landmarks.at(*lm));
      const double n = v.norm();
      if (n < 1e-9) continue;
      if ((o.bearing.dir - v / n).norm() >= config_.ransac.tau_r) continue;
      tracks_.touch(o.track, f);
      new_obs.push_back({f, o.cam, *lm, o.bearing, 1.0});
    }

    // Candidate inter-view matches among the remaining tracks, one candidate
    // set per neighboring camera pair.
    std::map<std::pair<int, int64_t>, const Observation*> by_cam_track;
    for (const auto& o : obs) {
      if (!bound_tracks.count(o.track)) by_cam_track[{o.cam, o.track}] = &o;
    }
    for (const auto& pair : rig_.baselines) {
      std::vector<InterViewMatch> cands;
      for (const auto& [key, o_i] : by_cam_track) {
        if (key.first != pair.cam_i) continue;
        const auto jt = by_cam_track.find({pair.cam_j, key.second});
        if (jt == by_cam_track.end()) continue;
        InterViewMatch m;
        m.cam_i = pair.cam_i;
        m.cam_j = pair.cam_j;
        m.track_i = m.track_j = key.second;
        m.bearing_i = o_i->bearing;
        m.bearing_j = jt->second->bearing;
        cands.push_back(m);
      }
      if (cands.empty()) continue;
      match_views(cands, warp_cfgs_[pair.cam_i], warp_cfgs_[pair.cam_j],
                  cam_poses[pair.cam_i], cam_poses[pair.cam_j], config_.match);
      for (const auto& m : cands) {
        if (!m.passed() || !m.triangulation) continue;
        if (tracks_.landmark_of(m.track_i)) continue;  // bound by an earlier pair
        const int64_t id = next_landmark_id_++;
        new_landmarks[id] = m.triangulation->point;
        tracks_.bind(m.track_i, id, f);
        new_obs.push_back({f, m.cam_i, id, m.bearing_i, 1.0});
        new_obs.push_back({f, m.cam_j, id, m.bearing_j, 1.0});
      }
    }
  }

  const Dataset& dataset_;
  RigConfig rig_;
  PipelineConfig config_;
  WindowState window_;
  BaOptions ba_;
  TrackTable tracks_;
  std::vector<HybridProjectionConfig> warp_cfgs_;
  int64_t next_landmark_id_ = 0;
  int consecutive_failures_ = 0;
};

}  // namespace

PipelineOutput run_pipeline(const Dataset& dataset, const RigConfig& rig,
                            const PipelineConfig& config) {
  Pipeline p(dataset, rig, config);
  return p.run();
}

void write_metrics_csv(const PipelineOutput& out, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "frame,inlier_ratio,reproj_err_deg,num_landmarks\n";
  char buf[128];
  for (const auto& r : out.records) {
    std::snprintf(buf, sizeof(buf), "%d,%.9f,%.9f,%d\n", r.frame, r.inlier_ratio,
                  r.reproj_err_deg, r.num_landmarks);
    os << buf;
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

void write_extrinsics_csv(const PipelineOutput& out, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "frame,cam,pitch_deg,roll_deg,yaw_deg,tx,ty,tz\n";
  char buf[256];
  for (size_t f = 0; f < out.extrinsic_history.size(); ++f) {
    for (const auto& rel : out.extrinsic_history[f]) {
      std::snprintf(buf, sizeof(buf), "%zu,%d,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n", f, rel.cam,
                    rad2deg(rel.pitch), rad2deg(rel.roll), rad2deg(rel.yaw),
                    rel.translation.x(), rel.translation.y(), rel.translation.z());
      os << buf;
    }
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

}  // namespace rovo
