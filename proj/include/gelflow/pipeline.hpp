// Dataset orchestration: configuration, per-indentation sample generation,
// elastic-deformation augmentation, batch runs with manifests, validation.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gelflow/fields.hpp"
#include "gelflow/flow.hpp"
#include "gelflow/geometry.hpp"
#include "gelflow/io.hpp"
#include "gelflow/visibility.hpp"

namespace gelflow {

struct IndenterParams {
  double radius_mm = 3.0;            // spherical tip
  double stiffness_n_per_mm = 0.2;   // default force = stiffness * depth
  int contact_nodes_per_axis = 9;    // lattice across the contact disc
};

struct AugmentParams {
  double alpha = 2.0;  // regions, peak warp magnitude
  double sigma = 4.0;  // regions, smoothing std
};

struct VisibilitySource {
  std::string file;  // empty: uniform all-ones grid
  int n_configs = 100;
  Vec3i bin_dims = Vec3i(15, 15, 9);
};

// One indentation: where, how deep, and optional file-based field or nodal
// forces overriding the analytic half-space route.
struct IndentationRecord {
  std::string id;
  double x = 0.0, y = 0.0;  // mm, surface position
  double depth = 0.0;       // mm
  std::optional<double> force;  // N; default stiffness * depth
  std::string field_file;       // optional displacement CSV
  std::string forces_file;      // optional nodal force CSV
  std::optional<std::uint64_t> seed;
};

struct RefineConfig {
  double radius_mm = 2.0;
  double step_mm = 0.05;
  // > step_mm runs a coarse grid pass first, then a fine pass of the full
  // step resolution around the coarse winner; <= step_mm searches flat.
  double coarse_step_mm = 0.25;
  IndentationRecord record;  // reference indentation driving the search
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  ParticleLayerSpec layer;
  PinholeCamerad camera;
  RigidTransformd gel_to_pinhole;
  ElasticHalfspace material;
  IndenterParams indenter;
  double grid_spacing = 0.5;  // mm
  IdwParams idw;
  int feature_regions = 40;  // m
  int label_bins = 20;       // n
  VisibilitySource visibility;
  AugmentParams augment;
  RefineConfig refine;

  PipelineConfig();
};

// Empty path gives the defaults; a file overrides any subset of keys.
// Unknown sections or keys are errors.
PipelineConfig load_config(const std::string& path);

// Complete config with every default spelled out.
Json effective_config(const PipelineConfig& config);

// Records from a .json array or a .csv with header id,x_mm,y_mm,depth_mm
// and optional force_n, seed columns.
std::vector<IndentationRecord> load_records(const std::string& path);
void validate_record(const IndentationRecord& record,
                     const ParticleLayerSpec& layer);

// CSV x,y,z,fx,fy,fz (mm, N, gel frame).
std::vector<ForceNode> load_force_nodes(const std::string& path);
void save_force_nodes(const std::string& path,
                      const std::vector<ForceNode>& nodes);

// The visibility grid a config asks for: loaded from file, or all ones.
VisibilityGrid resolve_visibility(const PipelineConfig& config);

// Displacement field for a record: loaded from CSV, or the analytic
// half-space solution evaluated at the sampling grid nodes.
ScatteredField record_field(const IndentationRecord& record,
                            const PipelineConfig& config);

// IDW resample of a scattered field onto the configured regular grid.
GridField resample_to_grid(const ScatteredField& field,
                           const PipelineConfig& config);

// Nodal forces for a record: loaded from CSV, or an even share of the
// contact force over disc lattice nodes (clipped to the surface).
std::vector<ForceNode> record_forces(const IndentationRecord& record,
                                     const PipelineConfig& config);

// Field -> grid resample (IDW) -> flow synthesis; forces -> label binning.
// Any module error is rethrown with the record id attached.
std::pair<FeatureImage, ForceDistribution> generate_sample(
    const IndentationRecord& record, const PipelineConfig& config,
    const VisibilityGrid& visibility);
std::pair<FeatureImage, ForceDistribution> generate_sample(
    const IndentationRecord& record, const PipelineConfig& config);

// Random per-region displacement field, Gaussian-smoothed with std sigma,
// scaled to peak magnitude alpha, applied by bilinear resampling with border
// clamping. alpha = 0 returns the input bit-exactly.
FeatureImage elastic_deform(const FeatureImage& image, double alpha,
                            double sigma, std::uint64_t rng_seed);

struct SampleEntry {
  IndentationRecord record;
  std::uint64_t seed = 0;       // resolved per-record stream
  std::string features, labels; // paths relative to the dataset directory
  std::vector<std::string> augmented;  // deformed feature variants, if any
  Vec3d total_force = Vec3d::Zero();
};

struct FailureEntry {
  std::string id, error;
};

struct DatasetManifest {
  int schema_version = 1;
  std::string config_file;
  int feature_regions = 0, label_bins = 0;
  std::vector<SampleEntry> samples;
  std::vector<FailureEntry> failures;
};

void save_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& path);

// Writes samples/<id>.features.f32 (+ .json), samples/<id>.labels.f32
// (+ .json), effective_config.json, and manifest.json under out_dir.
// Per-record math failures land in manifest.failures; I/O failures while
// writing results are fatal. Output bytes do not depend on jobs.
// augment_copies > 0 additionally bakes that many deformed feature variants
// per sample, seeded from the record stream.
DatasetManifest generate_dataset(const std::vector<IndentationRecord>& records,
                                 const PipelineConfig& config,
                                 const std::string& out_dir, int jobs = 1,
                                 int augment_copies = 0);

struct ValidationItem {
  std::string id;
  bool pass = false;
  std::string message;  // empty on pass
};

struct ValidationReport {
  bool all_pass = true;
  std::vector<ValidationItem> items;
};

// Re-reads every sample, checking shapes, finiteness, and that the stored
// total force matches the label grid.
ValidationReport validate_manifest(const std::string& manifest_path);

}  // namespace gelflow
