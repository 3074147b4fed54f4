// Real-camera adjustment: polynomial fisheye model, remap tables into the
// reference pinhole view, image remapping, and extrinsic translation
// refinement by feature-MSE grid search.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gelflow/flow.hpp"
#include "gelflow/geometry.hpp"

namespace gelflow {

// Radial model rho(theta) = tan_coeff * tan(theta) + sum_k poly[k-1] theta^k
// mapping incidence angle to radial pixel distance, plus an affine stretch
// about the distortion center. tan_coeff lets the model degenerate to an
// exact perspective camera; a pure degree-4 polynomial cannot.
struct FisheyeModel {
  std::array<double, 4> poly{0.0, 0.0, 0.0, 0.0};
  double tan_coeff = 0.0;
  Mat2d affine = Mat2d::Identity();
  Vec2d center = Vec2d::Zero();
  Vec2d image_size = Vec2d::Zero();
  double theta_max = 1.2;  // rad
};

double fisheye_rho(const FisheyeModel& model, double theta);

// Affine invertible, positive image size, rho strictly increasing on
// (0, theta_max].
void validate(const FisheyeModel& model);

// Projects a camera-frame point (looking along -z, matching the pinhole
// convention) to a fisheye pixel. Points not in front of the camera or past
// theta_max raise ProjectionError.
Vec2d world2cam(const FisheyeModel& model, const Vec3d& s_c);

struct FisheyeCalibration {
  FisheyeModel model;
  RigidTransformd gel_to_cam;
};

// JSON: {"poly":[b1..b4], "affine":[4], "center_px":[2], "image_size_px":[2],
// "rotation":[9], "translation_mm":[3]} with optional "tan_coeff" and
// "theta_max_rad".
FisheyeCalibration load_fisheye(const std::string& path);
void save_fisheye(const std::string& path, const FisheyeCalibration& calib);

struct PinholeRig {
  PinholeCamerad camera;
  RigidTransformd gel_to_pinhole;
};

// JSON: {"focal_px", "center_px":[2], "image_size_px":[2], "rotation":[9],
// "translation_mm":[3]}.
PinholeRig load_pinhole(const std::string& path);
void save_pinhole(const std::string& path, const PinholeRig& rig);

// Per destination (pinhole) pixel: continuous source coordinates in the
// fisheye image, NaN when the pixel has no valid source.
struct RemapTable {
  int width = 0, height = 0;          // destination raster
  int src_width = 0, src_height = 0;  // source bounds for sampling
  std::vector<Vec2d> src;             // row-major, x fastest

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  bool mapped(int x, int y) const {
    return !std::isnan(src[index(x, y)].x());
  }
};

// For each destination pixel: back-project onto the camera-frame plane
// z = z_plane (default: the extrinsic depth of the gel origin), carry the
// point into the real camera frame, and project through the fisheye model.
// Out-of-view pixels are recorded as unmapped, never thrown.
RemapTable build_remap_table(const FisheyeModel& model,
                             const RigidTransformd& gel_to_cam,
                             const PinholeCamerad& pinhole,
                             const RigidTransformd& gel_to_pinhole,
                             std::optional<double> z_plane = {}, int jobs = 1);

// One-line JSON header, then interleaved source x, y as little-endian
// float32; unmapped entries hold NaN.
void save_remap_table(const std::string& path, const RemapTable& table);
RemapTable load_remap_table(const std::string& path);

struct GrayImage {
  int width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, x fastest

  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

GrayImage load_pgm(const std::string& path);
void save_pgm(const std::string& path, const GrayImage& image);

// Destination pixel = bilinear sample of src at the table coordinates
// (nearest-neighbor behind the flag for bit-exact tests); unmapped pixels
// come out black.
GrayImage remap_image(const RemapTable& table, const GrayImage& src,
                      bool nearest = false);

// Mean squared difference over all 2 m^2 entries.
double feature_mse(const FeatureImage& a, const FeatureImage& b);

struct RefineParams {
  Vec3d t_init = Vec3d::Zero();  // mm
  double radius = 2.0;           // mm, half-width of the search cube
  double step = 0.05;            // mm
  int jobs = 1;
};

// Grid search over t_init +- radius minimizing feature_mse against
// real_features. Ties break toward the smallest offset from t_init, then
// lexicographically, so the result is independent of evaluation order.
Vec3d refine_translation(
    const std::function<FeatureImage(const Vec3d&)>& make_features,
    const FeatureImage& real_features, const RefineParams& params);

}  // namespace gelflow
