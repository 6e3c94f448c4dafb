#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <vector>

#include "rovo/dataset_io.hpp"
#include "rovo/evaluation.hpp"
#include "rovo/hybrid_projection.hpp"
#include "rovo/pipeline.hpp"

namespace fs = std::filesystem;
using namespace rovo;

namespace {

// Removes every registered output when a command dies half way, so exit
// code 0 means all outputs are fully written.
class OutputGuard {
 public:
  void add(const std::string& path) { paths_.push_back(path); }
  void release() { paths_.clear(); }
  ~OutputGuard() {
    for (const auto& p : paths_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

 private:
  std::vector<std::string> paths_;
};

void print_kv(const char* key, double value) {
  std::printf("%s %.9g\n", key, value);
}

int cmd_simulate(const std::string& out_dir, const std::string& traj, int frames, double radius,
                 double length, double density, int dynamic, double dynamic_speed,
                 double noise_deg, double outlier_rate, double frame_rate, uint64_t seed) {
  SceneSpec spec;
  if (traj == "circle") {
    spec.shape = TrajectoryShape::Circle;
  } else if (traj == "straight") {
    spec.shape = TrajectoryShape::Straight;
  } else if (traj == "lawnmower") {
    spec.shape = TrajectoryShape::Lawnmower;
  } else {
    throw std::invalid_argument("unknown trajectory '" + traj + "'");
  }
  spec.frames = frames;
  spec.circle_radius = radius;
  spec.path_length = length;
  spec.landmark_density = density;
  spec.dynamic_count = dynamic;
  spec.dynamic_speed = dynamic_speed;
  spec.frame_rate = frame_rate;
  spec.seed = seed;
  spec.validate();

  const RigConfig rig = default_rig();
  const size_t n_obs = write_dataset(out_dir, spec, rig, deg2rad(noise_deg), outlier_rate);
  const SyntheticScene scene = generate_scene(spec);
  std::printf("dataset %s\n", out_dir.c_str());
  std::printf("frames %d\n", spec.frames);
  std::printf("static_landmarks %zu\n", scene.landmarks.size());
  std::printf("dynamic_points %zu\n", scene.dynamic.size());
  std::printf("observations %zu\n", n_obs);
  return 0;
}

int cmd_run(const std::string& dataset_dir, const std::string& out_dir, const std::string& mode_s,
            double perturb_deg, uint64_t seed, int window) {
  const Dataset ds = read_dataset(dataset_dir);
  const PipelineMode mode = pipeline_mode_from_string(mode_s);

  RigConfig rig = ds.rig;
  PipelineConfig cfg;
  cfg.mode = mode;
  cfg.seed = seed;
  cfg.n_window = window;
  if (mode != PipelineMode::GTExt && perturb_deg > 0.0) {
    Rng rng(mix_seed(seed, 0xe27));
    rig = perturb_extrinsics(rig, perturb_deg, rng);
    cfg.extrinsic_uncertainty_deg = perturb_deg;
  }

  fs::create_directories(out_dir);
  OutputGuard guard;
  const std::string traj_path = (fs::path(out_dir) / "trajectory.txt").string();
  const std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  const std::string ext_path = (fs::path(out_dir) / "extrinsics.csv").string();
  guard.add(traj_path);
  guard.add(metrics_path);
  guard.add(ext_path);

  const PipelineOutput out = run_pipeline(ds, rig, cfg);
  write_trajectory(out.trajectory(), traj_path);
  write_metrics_csv(out, metrics_path);
  write_extrinsics_csv(out, ext_path);
  guard.release();

  int failed = 0;
  for (const auto& r : out.records) failed += r.ransac_failed ? 1 : 0;
  std::printf("mode %s\n", mode_s.c_str());
  std::printf("frames %zu\n", out.records.size());
  std::printf("failed_frames %d\n", failed);
  std::printf("trajectory %s\n", traj_path.c_str());
  std::printf("metrics %s\n", metrics_path.c_str());
  std::printf("extrinsics %s\n", ext_path.c_str());
  return 0;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path, const std::string& align,
             const std::string& metrics_path, const std::string& extrinsics_path,
             const std::string& rig_gt_path) {
  const auto est = read_trajectory(est_path);
  const auto gt = read_trajectory(gt_path);
  Alignment alignment;
  if (align == "none") {
    alignment = Alignment::None;
  } else if (align == "se3") {
    alignment = Alignment::Se3;
  } else {
    throw std::invalid_argument("--align must be none or se3");
  }
  EvalSummary summary = evaluate_trajectory(est, gt, alignment);
  if (!metrics_path.empty()) {
    const MetricsAverages avg = read_metrics_averages(metrics_path);
    summary.avg_inlier_ratio_pct = avg.inlier_ratio_pct;
    summary.avg_reproj_err_deg = avg.reproj_err_deg;
  }
  if (!extrinsics_path.empty()) {
    if (rig_gt_path.empty()) {
      throw std::invalid_argument("--extrinsics requires --rig-gt");
    }
    const RigConfig rig_gt = read_rig_config(rig_gt_path);
    const auto rel_est = read_extrinsics_csv_final(extrinsics_path);
    summary.extrinsic_errors = relative_extrinsic_errors_vs_rig(rel_est, rig_gt.extrinsics);
  }

  std::printf("common_frames %d\n", summary.common_frames);
  print_kv("translation_rmse_m", summary.translation_rmse);
  print_kv("mean_ate_m", summary.mean_ate);
  print_kv("max_ate_m", summary.max_ate);
  if (summary.avg_inlier_ratio_pct) {
    print_kv("avg_inlier_ratio_pct", *summary.avg_inlier_ratio_pct);
  }
  if (summary.avg_reproj_err_deg) {
    print_kv("avg_reproj_err_deg", *summary.avg_reproj_err_deg);
  }
  for (const auto& e : summary.extrinsic_errors) {
    std::printf("extrinsic_err_cam%d_deg %.9g\n", e.cam, e.rotation_deg);
    std::printf("extrinsic_err_cam%d_m %.9g\n", e.cam, e.translation_m);
  }
  return 0;
}

int cmd_warp(const std::string& image_path, const std::string& rig_path, int cam,
             const std::string& out_image, const std::string& out_table, int width, int height,
             double fov_deg) {
  const RigConfig rig = read_rig_config(rig_path);
  if (cam < 0 || cam >= rig.camera_count()) {
    throw std::invalid_argument("--cam out of range");
  }
  const Image src = read_pnm(image_path);
  const auto cfg = build_config(rig, cam, width, height, deg2rad(fov_deg));
  const auto table = build_remap_table(cfg, rig.intrinsics[cam]);

  OutputGuard guard;
  if (!out_image.empty()) guard.add(out_image);
  if (!out_table.empty()) guard.add(out_table);
  if (!out_image.empty()) write_pnm(warp_image(src, table), out_image);
  if (!out_table.empty()) save_remap_table(table, out_table);
  guard.release();

  std::printf("left_seam %.9g\n", cfg.left_seam);
  std::printf("right_seam %.9g\n", cfg.right_seam);
  if (!out_image.empty()) std::printf("warped %s\n", out_image.c_str());
  if (!out_table.empty()) std::printf("table %s\n", out_table.c_str());
  return 0;
}

int cmd_extrinsic_report(const std::string& rig_path, int ref, const std::string& compare_path) {
  const RigConfig rig = read_rig_config(rig_path);
  const auto report = extrinsic_report(rig.extrinsics, ref);
  std::printf("cam pitch_deg roll_deg yaw_deg tx ty tz\n");
  for (const auto& rel : report) {
    std::printf("%d %.9g %.9g %.9g %.9g %.9g %.9g\n", rel.cam, rad2deg(rel.pitch),
                rad2deg(rel.roll), rad2deg(rel.yaw), rel.translation.x(), rel.translation.y(),
                rel.translation.z());
  }
  if (!compare_path.empty()) {
    const RigConfig other = read_rig_config(compare_path);
    const auto errors = relative_extrinsic_errors(rig.extrinsics, other.extrinsics);
    for (const auto& e : errors) {
      std::printf("error_cam%d_deg %.9g\n", e.cam, e.rotation_deg);
      std::printf("error_cam%d_m %.9g\n", e.cam, e.translation_m);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-camera fisheye visual odometry testbed"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string sim_out, sim_traj = "circle";
  int sim_frames = 300, sim_dynamic = 0;
  double sim_radius = 55.7, sim_length = 350.0, sim_density = 2.0, sim_speed = 8.0;
  double sim_noise = 0.05, sim_outliers = 0.0, sim_rate = 10.0;
  uint64_t sim_seed = 0;
  sim->add_option("--out", sim_out, "output dataset directory")->required();
  sim->add_option("--traj", sim_traj, "circle|straight|lawnmower");
  sim->add_option("--frames", sim_frames, "number of frames");
  sim->add_option("--radius", sim_radius, "circle radius, m");
  sim->add_option("--length", sim_length, "path length for straight/lawnmower, m");
  sim->add_option("--density", sim_density, "landmarks per meter of path");
  sim->add_option("--dynamic", sim_dynamic, "number of moving point clusters");
  sim->add_option("--dynamic-speed", sim_speed, "moving object speed, m/s");
  sim->add_option("--noise-deg", sim_noise, "bearing noise std, degrees");
  sim->add_option("--outlier-rate", sim_outliers, "track-id corruption rate [0,1)");
  sim->add_option("--frame-rate", sim_rate, "frames per second");
  sim->add_option("--seed", sim_seed, "rng seed");

  // run
  auto* run = app.add_subcommand("run", "Run visual odometry on a dataset");
  std::string run_dataset, run_out, run_mode = "GTExt";
  double run_perturb = 0.0;
  uint64_t run_seed = 0;
  int run_window = 10;
  run->add_option("--dataset", run_dataset, "dataset directory")->required();
  run->add_option("--out", run_out, "output directory")->required();
  run->add_option("--mode", run_mode, "GTExt|NoisyExt|OnlineExt");
  run->add_option("--perturb-extrinsics", run_perturb,
                  "rotation noise std per axis, degrees (NoisyExt/OnlineExt)");
  run->add_option("--seed", run_seed, "rng seed");
  run->add_option("--window", run_window, "sliding window size, frames");

  // eval
  auto* eval = app.add_subcommand("eval", "Compare a trajectory against ground truth");
  std::string eval_est, eval_gt, eval_align = "none", eval_metrics, eval_ext, eval_rig;
  eval->add_option("--est", eval_est, "estimated trajectory file")->required();
  eval->add_option("--gt", eval_gt, "ground-truth trajectory file")->required();
  eval->add_option("--align", eval_align, "none|se3");
  eval->add_option("--metrics", eval_metrics, "metrics csv for inlier/reprojection averages");
  eval->add_option("--extrinsics", eval_ext, "extrinsic history csv");
  eval->add_option("--rig-gt", eval_rig, "ground-truth rig.cfg for extrinsic errors");

  // warp
  auto* warp = app.add_subcommand("warp", "Warp a fisheye image onto the hybrid surface");
  std::string warp_img, warp_rig, warp_out_img, warp_out_table;
  int warp_cam = 0, warp_w = 1200, warp_h = 400;
  double warp_fov = 200.0;
  warp->add_option("--image", warp_img, "source fisheye image (P5/P6)")->required();
  warp->add_option("--rig", warp_rig, "rig.cfg")->required();
  warp->add_option("--cam", warp_cam, "camera index");
  warp->add_option("--out-image", warp_out_img, "warped image output");
  warp->add_option("--out-table", warp_out_table, "remap table output");
  warp->add_option("--width", warp_w, "output width, px");
  warp->add_option("--height", warp_h, "output height, px");
  warp->add_option("--fov-deg", warp_fov, "horizontal span, degrees");

  // extrinsic-report
  auto* rep = app.add_subcommand("extrinsic-report", "Relative camera poses of a rig");
  std::string rep_rig, rep_compare;
  int rep_ref = 0;
  rep->add_option("--rig", rep_rig, "rig.cfg")->required();
  rep->add_option("--ref", rep_ref, "reference camera");
  rep->add_option("--compare", rep_compare, "second rig.cfg to diff against");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_out, sim_traj, sim_frames, sim_radius, sim_length, sim_density,
                          sim_dynamic, sim_speed, sim_noise, sim_outliers, sim_rate, sim_seed);
    }
    if (run->parsed()) {
      return cmd_run(run_dataset, run_out, run_mode, run_perturb, run_seed, run_window);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_est, eval_gt, eval_align, eval_metrics, eval_ext, eval_rig);
    }
    if (warp->parsed()) {
      return cmd_warp(warp_img, warp_rig, warp_cam, warp_out_img, warp_out_table, warp_w,
                      warp_h, warp_fov);
    }
    if (rep->parsed()) {
      return cmd_extrinsic_report(rep_rig, rep_ref, rep_compare);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
