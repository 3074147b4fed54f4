// Optical-flow feature images from displacement fields, and force
// distribution labels from nodal forces.
#pragma once

#include <string>
#include <vector>

#include "gelflow/fields.hpp"
#include "gelflow/geometry.hpp"
#include "gelflow/visibility.hpp"

namespace gelflow {

// Two-channel m x m image of mean pixel displacements per region.
struct FeatureImage {
  int m = 0;
  std::vector<double> du, dv;  // row-major, x fastest

  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * m + ix;
  }
  double u(int ix, int iy) const { return du[index(ix, iy)]; }
  double v(int ix, int iy) const { return dv[index(ix, iy)]; }
};

// One tracked point: where it sits in the rest image, how far its projection
// moves, and how much it counts.
struct FlowSample {
  Vec2d pixel;
  Vec2d delta;
  double weight = 1.0;
};

// Weighted mean of delta per image region; regions are a half-open m x m
// tiling of the image, far-border pixels clamp to the last region. Samples
// whose pixel is outside the image are dropped; regions whose total weight
// falls below 1e-12 emit (0, 0).
FeatureImage bin_displacements(const std::vector<FlowSample>& samples, int m,
                               const Vec2d& image_size);

// Full feature synthesis: transform each grid node to the camera frame,
// project the rest and displaced positions, weight by visibility at both the
// rest and displaced locations, and bin by the rest projection.
FeatureImage synth_optical_flow(const GridField& field,
                                const PinholeCamerad& camera,
                                const RigidTransformd& gel_to_pinhole,
                                const VisibilityGrid& vis, int m = 40);

struct ForceNode {
  Point3d position = Point3d::Zero();  // gel frame, on the surface
  Vec3d force = Vec3d::Zero();         // N
};

// Three-channel n x n grid of summed nodal forces per surface bin.
struct ForceDistribution {
  int n = 0;
  std::vector<double> fx, fy, fz;  // row-major, x fastest

  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * n + ix;
  }
  Vec3d at(int ix, int iy) const {
    const std::size_t i = index(ix, iy);
    return Vec3d(fx[i], fy[i], fz[i]);
  }
};

// Sums nodal forces into half-open surface bins; positions on the far edge
// clamp to the last bin. A node outside [0, extent] is an error naming its
// index.
ForceDistribution bin_forces(const std::vector<ForceNode>& nodes, int n,
                             const Vec2d& surface_extent);

Vec3d total_force(const ForceDistribution& dist);

// Little-endian float32, channel first then row-major, with a JSON sidecar
// next to the payload (same path, .json extension).
void save_features(const std::string& path, const FeatureImage& image);
FeatureImage load_features(const std::string& path);
void save_forces(const std::string& path, const ForceDistribution& dist);
ForceDistribution load_forces(const std::string& path);

}  // namespace gelflow
