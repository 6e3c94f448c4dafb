#pragma once

#include <map>
#include <string>
#include <vector>

#include "rovo/rig.hpp"
#include "rovo/synthetic_world.hpp"

namespace rovo {

// On-disk dataset layout:
//   <dir>/rig.cfg            camera count, per-camera intrinsics + extrinsics
//   <dir>/scene.cfg          generation parameters (informational)
//   <dir>/frames/NNNNNN.obs  "cam track bx by bz" per observation
//   <dir>/gt_trajectory.txt  "frame tx ty tz rx ry rz" (body-in-world)
// All floating-point fields are written with 9 decimals.

struct Dataset {
  RigConfig rig;
  double frame_rate = 10.0;
  std::vector<std::vector<Observation>> frames;
  std::vector<std::pair<int, RigidTransform>> gt_trajectory;  // body-in-world
};

void write_rig_config(const RigConfig& rig, const std::string& path);
RigConfig read_rig_config(const std::string& path);

void write_trajectory(const std::vector<std::pair<int, RigidTransform>>& poses,
                      const std::string& path);
std::vector<std::pair<int, RigidTransform>> read_trajectory(const std::string& path);

void write_observations(const std::vector<Observation>& obs, const std::string& path);
std::vector<Observation> read_observations(const std::string& path, int frame);

// Generates the scene and per-frame observations for `spec` and writes the
// full dataset directory. Returns the number of written observations.
size_t write_dataset(const std::string& dir, const SceneSpec& spec, const RigConfig& rig,
                     double noise_sigma, double outlier_rate);

Dataset read_dataset(const std::string& dir);

}  // namespace rovo
