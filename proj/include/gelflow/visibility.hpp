// Monte Carlo estimate of the probability that a tracer particle at a given
// location in the layer is visible to the camera (not hidden behind a
// strictly closer particle's occluding circle).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gelflow/fields.hpp"
#include "gelflow/geometry.hpp"

namespace gelflow {

struct Particle {
  Point3d center;  // mm, gel frame
  double radius;   // mm
};

struct ParticleConfig {
  std::vector<Particle> particles;
};

// round(ratio * layer volume / mean particle volume), mean radius = midpoint
// of the radius range.
long long particle_count(const ParticleLayerSpec& layer);

// Centers i.i.d. uniform in the layer box, radii uniform in the radius range.
ParticleConfig sample_particles(const ParticleLayerSpec& layer, std::uint64_t seed);

// visible[i] == false iff some particle with strictly smaller optical-axis
// depth projects an occluding circle that covers particle i's projected
// center. Accelerated by an image-space hash; equivalent to the all-pairs rule.
std::vector<bool> visible_flags(const ParticleConfig& config,
                                const PinholeCamerad& camera,
                                const RigidTransformd& gel_to_pinhole);

struct VisibilityGrid {
  Vec3i bin_dims = Vec3i::Zero();
  Point3d origin = Point3d::Zero();  // mm, gel frame
  Vec3d extent = Vec3d::Zero();      // mm
  std::vector<double> prob;          // x-fastest; bins never hit default to 1

  double at(int ix, int iy, int iz) const {
    return prob[static_cast<std::size_t>(ix) +
                static_cast<std::size_t>(bin_dims.x()) *
                    (iy + static_cast<std::size_t>(bin_dims.y()) * iz)];
  }
};

struct VisibilityOptions {
  int n_configs = 100;
  Vec3i bin_dims = Vec3i(15, 15, 9);
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Per-configuration visible/total ratios averaged over configurations,
// half-open bins over the layer box. Configurations run on independent seed
// streams derived from options.seed, so the result does not depend on jobs.
VisibilityGrid estimate_visibility_grid(const ParticleLayerSpec& layer,
                                        const PinholeCamerad& camera,
                                        const RigidTransformd& gel_to_pinhole,
                                        const VisibilityOptions& options = {});

// Probability at the bin containing p; outside points clamp to the nearest bin.
double lookup(const VisibilityGrid& grid, const Point3d& p);

// Sample weight rho * sigma: visibility at the rest location times visibility
// at the displaced location, both against the rest-configuration grid.
double weight(const VisibilityGrid& grid, const Point3d& s, const Vec3d& ds);

// Single file: one-line JSON header, then bin probabilities as little-endian
// float32, x-fastest.
void save_visibility(const std::string& path, const VisibilityGrid& grid);
VisibilityGrid load_visibility(const std::string& path);

}  // namespace gelflow
