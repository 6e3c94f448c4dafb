#include "rovo/hybrid_projection.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rovo {

namespace {

int thread_budget() {
  if (const char* env = std::getenv("ROVO_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Least-squares plane through the camera centers; returns (centroid, normal).
// Throws when the centers are (near) collinear.
std::pair<Vector3d, Vector3d> fit_rig_plane(const std::vector<Vector3d>& centers) {
  Vector3d centroid = Vector3d::Zero();
  for (const auto& c : centers) centroid += c;
  centroid /= static_cast<double>(centers.size());
  Matrix3d scatter = Matrix3d::Zero();
  double scale = 0.0;
  for (const auto& c : centers) {
    const Vector3d d = c - centroid;
    scatter += d * d.transpose();
    scale = std::max(scale, d.squaredNorm());
  }
  Eigen::SelfAdjointEigenSolver<Matrix3d> eig(scatter);
  // eigenvalues ascending: [0] out-of-plane, [1] must be nonzero or the
  // centers are collinear
  if (scale < 1e-20 || eig.eigenvalues()[1] < 1e-10 * scale) {
    throw std::invalid_argument("build_config: camera centers are collinear");
  }
  return {centroid, eig.eigenvectors().col(0).normalized()};
}

}  // namespace

double HybridProjectionConfig::azimuth_of(const Vector3d& dir) const {
  return std::atan2(dir.dot(right_dir()), dir.dot(forward));
}

HybridProjectionConfig build_config(const RigConfig& rig, int cam, int out_width,
                                    int out_height, double fov_span) {
  if (cam < 0 || cam >= rig.camera_count()) {
    throw std::invalid_argument("build_config: camera index out of range");
  }
  if (rig.camera_count() < 3) {
    throw std::invalid_argument("build_config: need at least 3 cameras to fit the rig plane");
  }
  if (out_width < 2 || out_height < 1 || !(fov_span > 0.0)) {
    throw std::invalid_argument("build_config: bad output geometry");
  }

  std::vector<Vector3d> centers;
  for (int i = 0; i < rig.camera_count(); ++i) centers.push_back(rig.camera_center(i));
  auto [centroid, up] = fit_rig_plane(centers);

  // Orient "up" to agree with the majority of camera up directions (-y axis
  // of each camera mapped to body coordinates).
  Vector3d up_votes = Vector3d::Zero();
  for (int i = 0; i < rig.camera_count(); ++i) {
    up_votes += rig.extrinsics[i].rotation_matrix().transpose() * Vector3d(0, -1, 0);
  }
  if (up_votes.dot(up) < 0) up = -up;

  // Body-frame optical axis of a camera projected into the rig plane.
  auto forward_in_plane = [&](int c) {
    const Vector3d axis = rig.extrinsics[c].rotation_matrix().transpose() * Vector3d(0, 0, 1);
    const Vector3d f = axis - axis.dot(up) * up;
    if (f.norm() < 1e-9) {
      throw std::invalid_argument("build_config: optical axis perpendicular to rig plane");
    }
    return Vector3d(f.normalized());
  };
  const Vector3d fwd = forward_in_plane(cam);
  const Vector3d right = fwd.cross(up).normalized();

  // One side plane per ring neighbor: parallel to the baseline, normal in the
  // rig plane, oriented toward the shared field of view.
  struct Side {
    double azimuth;
    Vector3d normal;
  };
  std::vector<Side> sides;
  for (const auto& b : rig.baselines) {
    if (b.cam_i != cam && b.cam_j != cam) continue;
    const int nb = (b.cam_i == cam) ? b.cam_j : b.cam_i;
    Vector3d baseline = centers[nb] - centers[cam];
    baseline -= baseline.dot(up) * up;
    if (baseline.norm() < 1e-9) {
      throw std::invalid_argument("build_config: coincident camera centers in rig plane");
    }
    Vector3d normal = up.cross(baseline.normalized());
    if (normal.dot(fwd + forward_in_plane(nb)) < 0) normal = -normal;
    sides.push_back({std::atan2(normal.dot(right), normal.dot(fwd)), normal});
  }
  if (sides.size() != 2) {
    throw std::invalid_argument("build_config: camera must have exactly two baseline neighbors");
  }
  if (sides[0].azimuth > sides[1].azimuth) std::swap(sides[0], sides[1]);
  if (!(sides[1].azimuth - sides[0].azimuth > 1e-9)) {
    throw std::invalid_argument("build_config: degenerate seam placement");
  }

  HybridProjectionConfig cfg;
  cfg.out_width = out_width;
  cfg.out_height = out_height;
  cfg.projection_focal = out_width / fov_span;

  // Express the geometry in this camera's frame.
  const Matrix3d R_cb = rig.extrinsics[cam].rotation_matrix();
  cfg.cylinder_axis = R_cb * up;
  cfg.forward = R_cb * fwd;
  cfg.left_plane_normal = R_cb * sides[0].normal;
  cfg.right_plane_normal = R_cb * sides[1].normal;
  cfg.left_seam = cfg.center_col() + cfg.projection_focal * sides[0].azimuth;
  cfg.right_seam = cfg.center_col() + cfg.projection_focal * sides[1].azimuth;
  return cfg;
}

UnitRay warp_pixel_to_ray(const Vector2d& px, const HybridProjectionConfig& cfg) {
  const double f = cfg.projection_focal;
  const Vector3d u = cfg.cylinder_axis;
  const double h = (cfg.center_row() - px.y()) / f;  // height on the surface

  Vector3d p;
  if (px.x() < cfg.left_seam) {
    const Vector3d& n = cfg.left_plane_normal;
    const Vector3d ex = n.cross(u);  // tangent, increasing azimuth
    p = n + ((px.x() - cfg.left_seam) / f) * ex + h * u;
  } else if (px.x() > cfg.right_seam) {
    const Vector3d& n = cfg.right_plane_normal;
    const Vector3d ex = n.cross(u);
    p = n + ((px.x() - cfg.right_seam) / f) * ex + h * u;
  } else {
    const double psi = (px.x() - cfg.center_col()) / f;
    p = std::cos(psi) * cfg.forward + std::sin(psi) * cfg.right_dir() + h * u;
  }
  return UnitRay{p.normalized()};
}

std::optional<Vector2d> warp_project(const Vector3d& dir, const HybridProjectionConfig& cfg) {
  const double f = cfg.projection_focal;
  const Vector3d u = cfg.cylinder_axis;
  const double c0 = cfg.center_col();
  const double r0 = cfg.center_row();
  const double psi = cfg.azimuth_of(dir);
  const double psi_left = (cfg.left_seam - c0) / f;
  const double psi_right = (cfg.right_seam - c0) / f;

  if (psi < psi_left) {
    const Vector3d& n = cfg.left_plane_normal;
    const double depth = dir.dot(n);
    if (depth < 1e-12 * dir.norm()) return std::nullopt;
    const Vector3d p = dir / depth;  // on the plane p.dot(n) == 1
    return Vector2d(cfg.left_seam + f * p.dot(n.cross(u)), r0 - f * p.dot(u));
  }
  if (psi > psi_right) {
    const Vector3d& n = cfg.right_plane_normal;
    const double depth = dir.dot(n);
    if (depth < 1e-12 * dir.norm()) return std::nullopt;
    const Vector3d p = dir / depth;
    return Vector2d(cfg.right_seam + f * p.dot(n.cross(u)), r0 - f * p.dot(u));
  }
  const double rho = std::hypot(dir.dot(cfg.forward), dir.dot(cfg.right_dir()));
  if (rho < 1e-12 * dir.norm()) return std::nullopt;
  return Vector2d(c0 + f * psi, r0 - f * dir.dot(u) / rho);
}

RemapTable build_remap_table(const HybridProjectionConfig& cfg, const FisheyeIntrinsics& phi,
                             const RigidTransform& cam_from_warp) {
  RemapTable table;
  table.out_width = cfg.out_width;
  table.out_height = cfg.out_height;
  table.src_width = phi.width;
  table.src_height = phi.height;
  table.entries.assign(static_cast<size_t>(cfg.out_width) * cfg.out_height,
                       Vector2d(RemapTable::kSentinel, RemapTable::kSentinel));

  const Matrix3d R = cam_from_warp.rotation_matrix();
  auto fill_rows = [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < cfg.out_width; ++x) {
        const Vector3d ray = warp_pixel_to_ray(Vector2d(x, y), cfg).dir;
        const auto px = project(R * ray, phi);
        if (!px) continue;
        if (px->x() < 0.0 || px->x() > phi.width - 1 || px->y() < 0.0 ||
            px->y() > phi.height - 1) {
          continue;
        }
        table.entries[static_cast<size_t>(y) * cfg.out_width + x] = *px;
      }
    }
  };

  const int n_threads = std::min(thread_budget(), cfg.out_height);
  if (n_threads <= 1) {
    fill_rows(0, cfg.out_height);
  } else {
    std::vector<std::thread> workers;
    const int chunk = (cfg.out_height + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const int y0 = t * chunk;
      const int y1 = std::min(cfg.out_height, y0 + chunk);
      if (y0 < y1) workers.emplace_back(fill_rows, y0, y1);
    }
    for (auto& w : workers) w.join();
  }
  return table;
}

Image warp_image(const Image& src, const RemapTable& table) {
  if (src.width != table.src_width || src.height != table.src_height) {
    throw std::invalid_argument("warp_image: source resolution does not match table");
  }
  Image out = Image::create(table.out_width, table.out_height, src.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      if (!table.valid(x, y)) continue;
      const Vector2d& e = table.at(x, y);
      for (int c = 0; c < src.channels; ++c) {
        const double v = bilinear_sample(src, e.x(), e.y(), c);
        out.at(x, y, c) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

void save_remap_table(const RemapTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("remap: cannot write " + path);
  out << "REMAP " << table.out_width << " " << table.out_height << " "
      << table.src_width << " " << table.src_height << "\n";
  char buf[64];
  for (int y = 0; y < table.out_height; ++y) {
    for (int x = 0; x < table.out_width; ++x) {
      const Vector2d& e = table.at(x, y);
      if (e.x() < 0.0) {
        out << (x ? " -1 -1" : "-1 -1");
      } else {
        std::snprintf(buf, sizeof(buf), "%s%.6f %.6f", x ? " " : "", e.x(), e.y());
        out << buf;
      }
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("remap: write failed for " + path);
}

RemapTable load_remap_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("remap: cannot open " + path);
  std::string magic;
  RemapTable table;
  in >> magic >> table.out_width >> table.out_height >> table.src_width >> table.src_height;
  if (!in || magic != "REMAP" || table.out_width <= 0 || table.out_height <= 0) {
    throw std::runtime_error("remap: bad header in " + path);
  }
  const size_t n = static_cast<size_t>(table.out_width) * table.out_height;
  table.entries.resize(n);
  for (size_t i = 0; i < n; ++i) {
    if (!(in >> table.entries[i].x() >> table.entries[i].y())) {
      throw std::runtime_error("remap: truncated table in " + path);
    }
  }
  return table;
}

}  // namespace rovo
