// Gel displacement fields: scattered FEM-style nodes, regular query grids,
// inverse-distance interpolation, and the elastic half-space oracle.
#pragma once

#include <string>
#include <vector>

#include "gelflow/core.hpp"

namespace gelflow {

struct ParticleLayerSpec {
  Vec3d extent = Vec3d(30.0, 30.0, 4.5);      // mm, box anchored at the gel origin
  double radius_min = 0.075;                  // mm
  double radius_max = 0.090;                  // mm
  double volume_ratio = 0.002;                // particle volume / layer volume
};

void validate(const ParticleLayerSpec& layer);

struct FieldNode {
  Point3d position;      // mm, gel frame
  Vec3d displacement;    // mm
};

// Immutable scattered field with a uniform spatial hash sized to the mean
// node spacing; k-nearest-neighbor queries are exact.
class ScatteredField {
public:
  explicit ScatteredField(std::vector<FieldNode> nodes);
  ScatteredField(std::vector<FieldNode> nodes, const Point3d& box_lo,
                 const Point3d& box_hi);

  const std::vector<FieldNode>& nodes() const { return nodes_; }
  const Point3d& box_lo() const { return box_lo_; }
  const Point3d& box_hi() const { return box_hi_; }

  // Indices of the k nearest nodes, closest first; ties broken by index.
  std::vector<int> nearest(const Point3d& query, int k) const;

private:
  void build_index();

  std::vector<FieldNode> nodes_;
  Point3d box_lo_, box_hi_;
  double cell_ = 1.0;
  Point3d grid_lo_;
  Vec3i grid_dims_;
  std::vector<int> cell_start_;   // CSR layout over flattened cells
  std::vector<int> cell_nodes_;
};

struct IdwParams {
  double power = 2.0;
  int k_neighbors = 8;
  double exact_hit = 1e-9;  // mm; closer than this adopts the node value
};

std::vector<Vec3d> idw_interpolate(const ScatteredField& field,
                                   const std::vector<Point3d>& queries,
                                   const IdwParams& params = {});

// Cell-centered lattice tiling the layer box: n_i = max(1, round(extent_i /
// spacing)) cells per axis, points at the cell centers, x-fastest order.
std::vector<Point3d> sample_grid(const ParticleLayerSpec& layer, double spacing);

// Regular displacement grid over the layer box (same lattice as sample_grid).
struct GridField {
  Vec3i dims = Vec3i::Zero();
  Vec3d cell = Vec3d::Zero();     // mm per cell, per axis
  Point3d origin = Point3d::Zero();
  std::vector<Vec3d> displacements;  // x-fastest

  std::size_t size() const { return displacements.size(); }
  Point3d position(int ix, int iy, int iz) const {
    return origin + Vec3d((ix + 0.5) * cell.x(), (iy + 0.5) * cell.y(),
                          (iz + 0.5) * cell.z());
  }
};

GridField make_grid(const ParticleLayerSpec& layer, double spacing);

struct ElasticHalfspace {
  double shear_modulus = 0.01;  // MPa = N/mm^2
  double poisson = 0.45;
};

void validate(const ElasticHalfspace& material);

struct HalfspaceContact {
  Vec2d center = Vec2d::Zero();  // mm on the surface
  double normal_force = 0.0;     // N pressing into the material
  double radius = 0.0;           // mm, nominal patch size (labels only)
};

// Point-load elastic half-space displacements at query points on or below the
// surface plane z = surface_z (material fills z < surface_z). Superpose calls
// for multiple contacts. The contact radius does not enter the displacement
// formula; it describes the nominal patch used when distributing label forces.
std::vector<Vec3d> halfspace_field(const HalfspaceContact& contact,
                                   const ElasticHalfspace& material,
                                   const std::vector<Point3d>& queries,
                                   double surface_z);

// CSV x,y,z,dx,dy,dz (mm, gel frame). save_field also writes "<path>.json"
// with the bounding box; load_field uses that sidecar when present.
ScatteredField load_field(const std::string& path);
void save_field(const std::string& path, const ScatteredField& field);

}  // namespace gelflow
