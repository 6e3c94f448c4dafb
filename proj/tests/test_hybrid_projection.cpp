#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <set>

#include "rovo/hybrid_projection.hpp"
#include "rovo/rng.hpp"

using namespace rovo;

namespace {

// Four cameras on the corners of a unit square, axes pointing outward along
// the diagonals: the symmetric fixture with seams at +-45 degrees.
RigConfig make_square_rig(double off_plane = 0.0) {
  std::vector<RigidTransform> extrinsics;
  std::vector<FisheyeIntrinsics> intrinsics;
  const double h = 0.5;
  const Vector3d corners[4] = {{h, h, 0}, {-h, h, off_plane}, {-h, -h, 0}, {h, -h, -off_plane}};
  for (const auto& c : corners) {
    extrinsics.push_back(look_extrinsic(c, Vector3d(c.x(), c.y(), 0).normalized()));
    intrinsics.push_back(FisheyeIntrinsics::synthetic_default());
  }
  return make_rig(std::move(extrinsics), std::move(intrinsics));
}

constexpr int kW = 1200, kH = 400;
const double kSpan = deg2rad(200.0);

}  // namespace

TEST_CASE("build_config: square rig plane and axis orientation") {
  const RigConfig rig = make_square_rig();
  for (int cam = 0; cam < 4; ++cam) {
    const auto cfg = build_config(rig, cam, kW, kH, kSpan);
    // Cylinder axis is the square's normal mapped to the camera frame; for
    // these cameras body +z is camera -y.
    const Vector3d axis_body =
        rig.extrinsics[cam].rotation_matrix().transpose() * cfg.cylinder_axis;
    CHECK((axis_body - Vector3d(0, 0, 1)).norm() < 1e-12);
    CHECK(std::abs(cfg.left_plane_normal.dot(cfg.cylinder_axis)) < 1e-12);
    CHECK(std::abs(cfg.right_plane_normal.dot(cfg.cylinder_axis)) < 1e-12);
    CHECK(cfg.left_plane_normal.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cfg.right_plane_normal.norm() == doctest::Approx(1.0).epsilon(1e-12));
    // Symmetric rig: seams at -45/+45 degrees from the forward column.
    CHECK((cfg.left_seam - cfg.center_col()) / cfg.projection_focal ==
          doctest::Approx(-M_PI / 4).epsilon(1e-9));
    CHECK((cfg.right_seam - cfg.center_col()) / cfg.projection_focal ==
          doctest::Approx(M_PI / 4).epsilon(1e-9));
  }
}

TEST_CASE("build_config: degenerate rigs are rejected") {
  std::vector<RigidTransform> extrinsics;
  std::vector<FisheyeIntrinsics> intrinsics;
  for (int i = 0; i < 3; ++i) {
    extrinsics.push_back(look_extrinsic(Vector3d(i, 0, 0), Vector3d(0, 1, 0)));
    intrinsics.push_back(FisheyeIntrinsics::synthetic_default());
  }
  const RigConfig collinear = make_rig(std::move(extrinsics), std::move(intrinsics));
  CHECK_THROWS_AS(build_config(collinear, 0, kW, kH, kSpan), std::invalid_argument);
}

TEST_CASE("build_config: least-squares plane matches an independent SVD fit") {
  // Perturb the square rig corners 1 cm out of plane.
  const RigConfig rig = make_square_rig(0.01);
  const auto cfg = build_config(rig, 0, kW, kH, kSpan);
  const Vector3d fitted_body =
      rig.extrinsics[0].rotation_matrix().transpose() * cfg.cylinder_axis;

  // Oracle: thin SVD of the centered center matrix.
  Eigen::MatrixXd M(4, 3);
  Vector3d mean = Vector3d::Zero();
  for (int i = 0; i < 4; ++i) mean += rig.camera_center(i);
  mean /= 4.0;
  for (int i = 0; i < 4; ++i) M.row(i) = (rig.camera_center(i) - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  Vector3d oracle = svd.matrixV().col(2);
  if (oracle.dot(fitted_body) < 0) oracle = -oracle;
  CHECK((fitted_body - oracle).norm() < 1e-9);
}

TEST_CASE("warp_pixel_to_ray: sections satisfy the surface equations") {
  const RigConfig rig = make_square_rig();
  const auto cfg = build_config(rig, 0, kW, kH, kSpan);
  const Vector3d u = cfg.cylinder_axis;
  Rng rng(31);
  for (int i = 0; i < 5000; ++i) {
    const Vector2d px(rng.uniform(0, kW - 1), rng.uniform(0, kH - 1));
    const Vector3d ray = warp_pixel_to_ray(px, cfg).dir;
    CHECK(ray.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const double want_h = (cfg.center_row() - px.y()) / cfg.projection_focal;
    if (px.x() < cfg.left_seam || px.x() > cfg.right_seam) {
      const bool left = px.x() < cfg.left_seam;
      const Vector3d n = left ? cfg.left_plane_normal : cfg.right_plane_normal;
      const double seam = left ? cfg.left_seam : cfg.right_seam;
      // Scale the ray onto the plane n.p = 1 and check its chart coordinates.
      REQUIRE(ray.dot(n) > 0);
      const Vector3d p = ray / ray.dot(n);
      CHECK(p.dot(n.cross(u)) ==
            doctest::Approx((px.x() - seam) / cfg.projection_focal).epsilon(1e-9));
      CHECK(p.dot(u) == doctest::Approx(want_h).epsilon(1e-9));
    } else {
      // Scale onto the unit cylinder and check azimuth/height.
      const Vector3d in_plane = ray - ray.dot(u) * u;
      const Vector3d p = ray / in_plane.norm();
      CHECK((p - p.dot(u) * u).norm() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(cfg.azimuth_of(ray) ==
            doctest::Approx((px.x() - cfg.center_col()) / cfg.projection_focal).epsilon(1e-9));
      CHECK(p.dot(u) == doctest::Approx(want_h).epsilon(1e-9));
    }
  }
}

TEST_CASE("warp_pixel_to_ray: center of the cylindrical section") {
  const RigConfig rig = make_square_rig();
  const auto cfg = build_config(rig, 0, kW, kH, kSpan);
  const double mid_col = 0.5 * (cfg.left_seam + cfg.right_seam);
  const Vector3d ray = warp_pixel_to_ray(Vector2d(mid_col, cfg.center_row()), cfg).dir;
  const double psi = (mid_col - cfg.center_col()) / cfg.projection_focal;
  const Vector3d expected = std::cos(psi) * cfg.forward + std::sin(psi) * cfg.right_dir();
  CHECK((ray - expected).norm() < 1e-12);
}

TEST_CASE("seam continuity: adjacent columns differ by at most one step") {
  for (const RigConfig& rig : {make_square_rig(), default_rig()}) {
    for (int cam = 0; cam < rig.camera_count(); ++cam) {
      const auto cfg = build_config(rig, cam, kW, kH, kSpan);
      const double step = 1.0 / cfg.projection_focal;
      for (double seam : {cfg.left_seam, cfg.right_seam}) {
        const int x0 = static_cast<int>(std::floor(seam));
        for (int y = 0; y < kH; ++y) {
          const Vector3d a = warp_pixel_to_ray(Vector2d(x0, y), cfg).dir;
          const Vector3d b = warp_pixel_to_ray(Vector2d(x0 + 1, y), cfg).dir;
          CHECK(angle_between(a, b) <= step + 1e-9);
        }
      }
    }
  }
}

TEST_CASE("ray field is injective (forward map inverts the back-projection)") {
  const RigConfig rig = default_rig();
  const auto cfg = build_config(rig, 1, kW, kH, kSpan);
  Rng rng(32);
  for (int i = 0; i < 3000; ++i) {
    const Vector2d px(rng.uniform(0, kW - 1), rng.uniform(0, kH - 1));
    const auto back = warp_project(warp_pixel_to_ray(px, cfg).dir, cfg);
    REQUIRE(back.has_value());
    CHECK((*back - px).norm() < 1e-6);
  }
}

TEST_CASE("epipolar row alignment across neighboring warped views") {
  const RigConfig rig = default_rig();  // coplanar centers
  std::vector<HybridProjectionConfig> cfgs;
  for (int c = 0; c < 4; ++c) cfgs.push_back(build_config(rig, c, kW, kH, kSpan));
  Rng rng(33);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    // Points in front of the cam0/cam1 pair (centers (1,-+0.5)); the shared
    // rectification plane faces +x.
    const Vector3d P(rng.uniform(3.0, 60.0), rng.uniform(-0.45, 0.45), rng.uniform(-3.0, 6.0));
    const Vector3d d0 = P - rig.camera_center(0);
    const Vector3d d1 = P - rig.camera_center(1);
    const auto w0 = warp_project(rig.extrinsics[0].rotation_matrix() * d0, cfgs[0]);
    const auto w1 = warp_project(rig.extrinsics[1].rotation_matrix() * d1, cfgs[1]);
    if (!w0 || !w1) continue;
    // Only the plane sections align exactly.
    if (w0->x() >= cfgs[0].left_seam || w1->x() <= cfgs[1].right_seam) continue;
    CHECK(std::abs(w0->y() - w1->y()) < 1e-6);
    ++checked;
  }
  CHECK(checked > 500);
}

TEST_CASE("build_remap_table: aligned geometry maps the forward pixel to the principal point") {
  const RigConfig rig = make_square_rig();
  const auto phi = rig.intrinsics[0];
  const auto cfg = build_config(rig, 0, kW, kH, kSpan);
  const auto table = build_remap_table(cfg, phi);
  CHECK(table.out_width == kW);
  // The camera axis is diagonal, in the rig plane, so the forward column of
  // the warp is the optical axis: its center-row entry is the principal point.
  const int cx = static_cast<int>(std::lround(cfg.center_col()));
  const int cy = static_cast<int>(std::lround(cfg.center_row()));
  // center_col/row are half-integers for even sizes; evaluate continuously.
  const Vector3d ray = warp_pixel_to_ray(Vector2d(cfg.center_col(), cfg.center_row()), cfg).dir;
  CHECK(angle_between(ray, Vector3d(0, 0, 1)) < 1e-12);
  REQUIRE(table.valid(cx, cy));
  CHECK((table.at(cx, cy) - phi.principal_point).norm() < 1.0);  // within the rounded pixel
}

TEST_CASE("build_remap_table: sentinel fraction matches a Monte-Carlo coverage oracle") {
  const RigConfig rig = make_square_rig();
  // A 160-degree lens under a 260-degree warp span: the flanks go sentinel.
  FisheyeIntrinsics phi = rig.intrinsics[0];
  phi.fov_max = deg2rad(80.0);
  phi.focal = 766.0 / phi.fov_max;
  const auto cfg = build_config(rig, 0, kW, kH, deg2rad(260.0));
  const auto table = build_remap_table(cfg, phi);
  size_t sentinels = 0;
  for (int y = 0; y < table.out_height; ++y) {
    for (int x = 0; x < table.out_width; ++x) {
      if (!table.valid(x, y)) ++sentinels;
    }
  }
  REQUIRE(sentinels > 0);

  Rng rng(34);
  const int trials = 200000;
  int outside = 0;
  for (int i = 0; i < trials; ++i) {
    const Vector2d px(rng.uniform(-0.5, kW - 0.5), rng.uniform(-0.5, kH - 0.5));
    const Vector3d ray = warp_pixel_to_ray(px, cfg).dir;
    const auto proj = project(ray, phi);
    if (!proj || proj->x() < 0 || proj->x() > phi.width - 1 || proj->y() < 0 ||
        proj->y() > phi.height - 1) {
      ++outside;
    }
  }
  const double mc_fraction = static_cast<double>(outside) / trials;
  const double table_fraction =
      static_cast<double>(sentinels) / (static_cast<double>(kW) * kH);
  CHECK(std::abs(mc_fraction - table_fraction) < 0.01);
}

TEST_CASE("build_remap_table: entries unproject back to the warp ray") {
  const RigConfig rig = make_square_rig();
  const auto phi = rig.intrinsics[0];
  const auto cfg = build_config(rig, 0, 300, 100, kSpan);
  RigidTransform rot;  // exercise a non-identity warp-to-camera rotation
  rot.rotation = Vector3d(0.02, -0.01, 0.03);
  const auto table = build_remap_table(cfg, phi, rot);
  const Matrix3d R = rot.rotation_matrix();
  for (int y = 0; y < table.out_height; ++y) {
    for (int x = 0; x < table.out_width; ++x) {
      if (!table.valid(x, y)) continue;
      const auto ray = unproject(table.at(x, y), phi);
      REQUIRE(ray.has_value());
      const Vector3d expected = R * warp_pixel_to_ray(Vector2d(x, y), cfg).dir;
      CHECK(angle_between(ray->dir, expected) < 1e-9);
    }
  }
}

TEST_CASE("warp_image: constant source, black sentinels, dimension check") {
  const RigConfig rig = make_square_rig();
  const auto phi = rig.intrinsics[0];
  const auto cfg = build_config(rig, 0, 400, 140, deg2rad(260.0));
  const auto table = build_remap_table(cfg, phi);

  Image src = Image::create(phi.width, phi.height, 1, 200);
  const Image out = warp_image(src, table);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      CHECK(out.at(x, y) == (table.valid(x, y) ? 200 : 0));
    }
  }

  Image wrong = Image::create(10, 10, 1);
  CHECK_THROWS_AS(warp_image(wrong, table), std::invalid_argument);
}

TEST_CASE("warp_image: matches a direct render of a smooth scene within one gray level") {
  const RigConfig rig = make_square_rig();
  const auto phi = rig.intrinsics[0];
  const auto cfg = build_config(rig, 0, 400, 140, kSpan);
  const auto table = build_remap_table(cfg, phi);

  // Smooth direction-dependent shading.
  auto shade = [](const Vector3d& d) {
    return 127.5 * (1.0 + std::sin(3.0 * std::atan2(d.x(), d.z())) * std::cos(2.0 * d.y()));
  };

  Image fish = Image::create(phi.width, phi.height, 1);
  for (int y = 0; y < fish.height; ++y) {
    for (int x = 0; x < fish.width; ++x) {
      const auto ray = unproject(Vector2d(x, y), phi);
      if (!ray) continue;
      fish.at(x, y) = static_cast<uint8_t>(std::lround(shade(ray->dir)));
    }
  }
  const Image warped = warp_image(fish, table);

  int worst = 0;
  for (int y = 1; y + 1 < warped.height; ++y) {
    for (int x = 1; x + 1 < warped.width; ++x) {
      if (!table.valid(x, y)) continue;
      const int direct =
          static_cast<int>(std::lround(shade(warp_pixel_to_ray(Vector2d(x, y), cfg).dir)));
      worst = std::max(worst, std::abs(direct - warped.at(x, y)));
    }
  }
  CHECK(worst <= 1);
}

TEST_CASE("remap table file round trip") {
  const RigConfig rig = make_square_rig();
  const auto cfg = build_config(rig, 2, 64, 32, kSpan);
  const auto table = build_remap_table(cfg, rig.intrinsics[2]);
  const auto path = std::filesystem::temp_directory_path() / "rovo_test_table.txt";
  save_remap_table(table, path.string());
  const auto loaded = load_remap_table(path.string());
  REQUIRE(loaded.out_width == table.out_width);
  REQUIRE(loaded.out_height == table.out_height);
  CHECK(loaded.src_width == table.src_width);
  for (int y = 0; y < table.out_height; ++y) {
    for (int x = 0; x < table.out_width; ++x) {
      CHECK(loaded.valid(x, y) == table.valid(x, y));
      if (table.valid(x, y)) {
        CHECK((loaded.at(x, y) - table.at(x, y)).cwiseAbs().maxCoeff() < 5e-7);
      }
    }
  }
  std::filesystem::remove(path);
}
