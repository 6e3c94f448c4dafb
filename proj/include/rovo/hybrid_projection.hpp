#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rovo/fisheye.hpp"
#include "rovo/geometry.hpp"
#include "rovo/image.hpp"
#include "rovo/rig.hpp"

namespace rovo {

// Warp surface for one camera: a perspective plane on each side, joined by a
// cylinder of unit radius. The planes are parallel to the baselines toward
// the neighboring cameras and tangent to the cylinder, whose axis is the rig
// plane normal, so the back-projected ray field is continuous across the
// seams. All direction vectors are expressed in the camera frame.
struct HybridProjectionConfig {
  Vector3d left_plane_normal{0, 0, 1};
  Vector3d right_plane_normal{0, 0, 1};
  Vector3d cylinder_axis{0, -1, 0};   // rig "up"
  Vector3d forward{0, 0, 1};          // optical axis projected into rig plane
  double projection_focal = 0.0;      // px; azimuth step per column = 1/focal
  int out_width = 0;
  int out_height = 0;
  double left_seam = 0.0;             // continuous column coordinates
  double right_seam = 0.0;

  double center_col() const { return 0.5 * (out_width - 1); }
  double center_row() const { return 0.5 * (out_height - 1); }
  Vector3d right_dir() const { return forward.cross(cylinder_axis).normalized(); }
  // Signed azimuth of a camera-frame direction about the cylinder axis,
  // measured from `forward` toward `right_dir`.
  double azimuth_of(const Vector3d& dir) const;
};

// Fits the rig plane through the camera centers, orients the side planes
// parallel to the baselines toward the two ring neighbors, and places the
// seams where the planes touch the cylinder. fov_span is the full horizontal
// angle covered by out_width columns. Throws on rigs with fewer than three
// cameras or (near) collinear centers.
HybridProjectionConfig build_config(const RigConfig& rig, int cam, int out_width,
                                    int out_height, double fov_span);

// Back-projects a warped pixel (continuous, pixel-center convention) to a
// camera-frame unit ray. Defined over the whole output image.
UnitRay warp_pixel_to_ray(const Vector2d& px, const HybridProjectionConfig& cfg);

// Forward map: camera-frame direction -> warped pixel (possibly outside the
// image bounds). nullopt for directions behind the active surface section.
std::optional<Vector2d> warp_project(const Vector3d& dir, const HybridProjectionConfig& cfg);

// Source-pixel lookup table for producing warped images. Entries are fisheye
// pixel coordinates; out-of-FOV pixels hold the (-1, -1) sentinel.
struct RemapTable {
  int out_width = 0;
  int out_height = 0;
  int src_width = 0;
  int src_height = 0;
  std::vector<Vector2d> entries;  // row-major, out_width * out_height

  const Vector2d& at(int x, int y) const { return entries[static_cast<size_t>(y) * out_width + x]; }
  bool valid(int x, int y) const { return at(x, y).x() >= 0.0; }
  static constexpr double kSentinel = -1.0;
};

// entry(x) = project(R * warp_pixel_to_ray(x), phi); sentinel when the
// rotated ray leaves the lens FOV or lands outside the source image.
// cam_from_warp applies an extra rotation between warp and camera frame
// (identity when the config was built for this camera).
RemapTable build_remap_table(const HybridProjectionConfig& cfg, const FisheyeIntrinsics& phi,
                             const RigidTransform& cam_from_warp = RigidTransform::identity());

// Bilinear remap; sentinel entries come out black. Throws when src dimensions
// do not match the table.
Image warp_image(const Image& src, const RemapTable& table);

// Text format: "REMAP <out_w> <out_h> <src_w> <src_h>" header, then one line
// per output row with "u v" pairs at 6 decimals; sentinel written as "-1 -1".
void save_remap_table(const RemapTable& table, const std::string& path);
RemapTable load_remap_table(const std::string& path);

}  // namespace rovo
