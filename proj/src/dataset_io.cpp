#include "rovo/dataset_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rovo {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  return buf;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

void write_rig_config(const RigConfig& rig, const std::string& path) {
  auto out = open_out(path);
  out << "camera_count " << rig.camera_count() << "\n";
  for (int c = 0; c < rig.camera_count(); ++c) {
    const auto& phi = rig.intrinsics[c];
    const auto& T = rig.extrinsics[c];
    out << "camera " << c << " " << fmt(phi.focal) << " " << fmt(phi.principal_point.x())
        << " " << fmt(phi.principal_point.y()) << " " << phi.width << " " << phi.height
        << " " << fmt(phi.fov_max);
    for (int i = 0; i < 3; ++i) out << " " << fmt(T.rotation[i]);
    for (int i = 0; i < 3; ++i) out << " " << fmt(T.translation[i]);
    out << "\n";
  }
  for (const auto& b : rig.baselines) {
    out << "baseline " << b.cam_i << " " << b.cam_j << " " << fmt(b.length) << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

RigConfig read_rig_config(const std::string& path) {
  auto in = open_in(path);
  std::string key;
  int count = -1;
  RigConfig rig;
  while (in >> key) {
    if (key == "camera_count") {
      in >> count;
      if (!in || count <= 0) throw std::runtime_error("rig.cfg: bad camera_count");
      rig.extrinsics.resize(count);
      rig.intrinsics.resize(count);
    } else if (key == "camera") {
      int c;
      in >> c;
      if (!in || c < 0 || c >= count) throw std::runtime_error("rig.cfg: bad camera index");
      auto& phi = rig.intrinsics[c];
      auto& T = rig.extrinsics[c];
      in >> phi.focal >> phi.principal_point.x() >> phi.principal_point.y() >> phi.width >>
          phi.height >> phi.fov_max;
      for (int i = 0; i < 3; ++i) in >> T.rotation[i];
      for (int i = 0; i < 3; ++i) in >> T.translation[i];
      if (!in) throw std::runtime_error("rig.cfg: truncated camera record");
    } else if (key == "baseline") {
      BaselinePair b;
      in >> b.cam_i >> b.cam_j >> b.length;
      if (!in) throw std::runtime_error("rig.cfg: truncated baseline record");
      rig.baselines.push_back(b);
    } else {
      throw std::runtime_error("rig.cfg: unknown key '" + key + "'");
    }
  }
  // Written lengths are rounded to 9 decimals; accept that much slack.
  rig.validate(1e-8);
  return rig;
}

void write_trajectory(const std::vector<std::pair<int, RigidTransform>>& poses,
                      const std::string& path) {
  auto out = open_out(path);
  for (const auto& [frame, T] : poses) {
    out << frame;
    for (int i = 0; i < 3; ++i) out << " " << fmt(T.translation[i]);
    for (int i = 0; i < 3; ++i) out << " " << fmt(T.rotation[i]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<std::pair<int, RigidTransform>> read_trajectory(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::pair<int, RigidTransform>> poses;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int frame;
    RigidTransform T;
    ls >> frame >> T.translation[0] >> T.translation[1] >> T.translation[2] >>
        T.rotation[0] >> T.rotation[1] >> T.rotation[2];
    if (!ls) throw std::runtime_error("trajectory: bad line in " + path + ": " + line);
    poses.emplace_back(frame, T);
  }
  return poses;
}

void write_observations(const std::vector<Observation>& obs, const std::string& path) {
  auto out = open_out(path);
  for (const auto& o : obs) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d %" PRId64 " %.9f %.9f %.9f\n", o.cam, o.track,
                  o.bearing.dir.x(), o.bearing.dir.y(), o.bearing.dir.z());
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<Observation> read_observations(const std::string& path, int frame) {
  auto in = open_in(path);
  std::vector<Observation> obs;
  std::set<std::pair<int, int64_t>> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Observation o;
    o.frame = frame;
    Vector3d d;
    ls >> o.cam >> o.track >> d.x() >> d.y() >> d.z();
    if (!ls) throw std::runtime_error("observations: bad line in " + path + ": " + line);
    o.bearing = UnitRay::from_vector(d);
    if (!seen.emplace(o.cam, o.track).second) {
      throw std::runtime_error("observations: duplicate (cam, track) in " + path);
    }
    obs.push_back(o);
  }
  return obs;
}

size_t write_dataset(const std::string& dir, const SceneSpec& spec, const RigConfig& rig,
                     double noise_sigma, double outlier_rate) {
  spec.validate();
  rig.validate();
  fs::create_directories(fs::path(dir) / "frames");

  const SyntheticScene scene = generate_scene(spec);
  write_rig_config(rig, (fs::path(dir) / "rig.cfg").string());

  {
    auto out = open_out((fs::path(dir) / "scene.cfg").string());
    const char* shape = spec.shape == TrajectoryShape::Straight    ? "straight"
                        : spec.shape == TrajectoryShape::Circle    ? "circle"
                                                                   : "lawnmower";
    out << "frames " << spec.frames << "\n"
        << "frame_rate " << fmt(spec.frame_rate) << "\n"
        << "trajectory " << shape << "\n"
        << "circle_radius " << fmt(spec.circle_radius) << "\n"
        << "path_length " << fmt(spec.path_length) << "\n"
        << "landmark_density " << fmt(spec.landmark_density) << "\n"
        << "static_landmarks " << scene.landmarks.size() << "\n"
        << "dynamic_points " << scene.dynamic.size() << "\n"
        << "noise_sigma_rad " << fmt(noise_sigma) << "\n"
        << "outlier_rate " << fmt(outlier_rate) << "\n"
        << "seed " << spec.seed << "\n";
  }

  size_t total_obs = 0;
  for (int f = 0; f < scene.frame_count(); ++f) {
    Rng rng(mix_seed(spec.seed, 0xf00d + static_cast<uint64_t>(f)));
    const auto obs = observe_frame(scene, rig, f, noise_sigma, outlier_rate, rng);
    total_obs += obs.size();
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.obs", f);
    write_observations(obs, (fs::path(dir) / "frames" / name).string());
  }

  std::vector<std::pair<int, RigidTransform>> gt;
  for (int f = 0; f < scene.frame_count(); ++f) gt.emplace_back(f, scene.trajectory[f]);
  write_trajectory(gt, (fs::path(dir) / "gt_trajectory.txt").string());
  return total_obs;
}

Dataset read_dataset(const std::string& dir) {
  Dataset ds;
  ds.rig = read_rig_config((fs::path(dir) / "rig.cfg").string());

  {
    auto in = open_in((fs::path(dir) / "scene.cfg").string());
    std::string key;
    while (in >> key) {
      std::string value;
      if (key == "frame_rate") {
        in >> ds.frame_rate;
      } else {
        std::getline(in, value);
      }
    }
  }

  const fs::path frames_dir = fs::path(dir) / "frames";
  if (!fs::is_directory(frames_dir)) {
    throw std::runtime_error("dataset: missing frames/ in " + dir);
  }
  for (int f = 0;; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.obs", f);
    const fs::path p = frames_dir / name;
    if (!fs::exists(p)) break;
    ds.frames.push_back(read_observations(p.string(), f));
  }
  if (ds.frames.empty()) throw std::runtime_error("dataset: no frame files in " + dir);

  ds.gt_trajectory = read_trajectory((fs::path(dir) / "gt_trajectory.txt").string());
  return ds;
}

}  // namespace rovo
