#include "gelflow/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "gelflow/io.hpp"
#include "gelflow/parallel.hpp"
#include "gelflow/random.hpp"

namespace gelflow {

long long particle_count(const ParticleLayerSpec& layer) {
  validate(layer);
  const double mean_radius = 0.5 * (layer.radius_min + layer.radius_max);
  const double mean_volume =
      4.0 / 3.0 * M_PI * mean_radius * mean_radius * mean_radius;
  const double volume = layer.extent.x() * layer.extent.y() * layer.extent.z();
  return std::llround(layer.volume_ratio * volume / mean_volume);
}

ParticleConfig sample_particles(const ParticleLayerSpec& layer,
                                std::uint64_t seed) {
  const long long count = particle_count(layer);
  if (count < 1)
    throw std::invalid_argument(
        "volume ratio yields zero particles for this layer");
  std::mt19937_64 rng(seed);
  ParticleConfig config;
  config.particles.resize(count);
  for (auto& p : config.particles) {
    // Stable draw order: x, y, z, radius.
    p.center.x() = uniform(rng, 0.0, layer.extent.x());
    p.center.y() = uniform(rng, 0.0, layer.extent.y());
    p.center.z() = uniform(rng, 0.0, layer.extent.z());
    p.radius = uniform(rng, layer.radius_min, layer.radius_max);
  }
  return config;
}

std::vector<bool> visible_flags(const ParticleConfig& config,
                                const PinholeCamerad& camera,
                                const RigidTransformd& gel_to_pinhole) {
  const std::size_t n = config.particles.size();
  std::vector<bool> visible(n, true);
  if (n == 0) return visible;

  std::vector<Vec2d> pixel(n);
  std::vector<double> radius(n), depth(n);
  double max_radius = 0.0;
  Vec2d lo(1e300, 1e300), hi(-1e300, -1e300);
  for (std::size_t i = 0; i < n; ++i) {
    const Point3d sp = transform_point(gel_to_pinhole, config.particles[i].center);
    pixel[i] = pinhole_project(camera, sp);
    radius[i] = particle_projected_radius(camera, sp, config.particles[i].radius);
    depth[i] = std::abs(sp.z());
    max_radius = std::max(max_radius, radius[i]);
    lo = lo.cwiseMin(pixel[i]);
    hi = hi.cwiseMax(pixel[i]);
  }

  // Image-space hash with cells at least the largest occluding radius, so any
  // covering particle lives in the 3x3 cell neighborhood.
  const double cell = std::max(max_radius, 1e-6);
  const int nx = static_cast<int>(std::floor((hi.x() - lo.x()) / cell)) + 1;
  const int ny = static_cast<int>(std::floor((hi.y() - lo.y()) / cell)) + 1;
  const auto cell_of = [&](const Vec2d& p) {
    const int cx = std::clamp(
        static_cast<int>(std::floor((p.x() - lo.x()) / cell)), 0, nx - 1);
    const int cy = std::clamp(
        static_cast<int>(std::floor((p.y() - lo.y()) / cell)), 0, ny - 1);
    return std::make_pair(cx, cy);
  };
  std::vector<int> counts(static_cast<std::size_t>(nx) * ny, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cx, cy] = cell_of(pixel[i]);
    ++counts[static_cast<std::size_t>(cy) * nx + cx];
  }
  std::vector<int> start(static_cast<std::size_t>(nx) * ny + 1, 0);
  for (std::size_t c = 0; c < counts.size(); ++c) start[c + 1] = start[c] + counts[c];
  std::vector<int> order(n);
  {
    std::vector<int> cursor(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto [cx, cy] = cell_of(pixel[i]);
      order[cursor[static_cast<std::size_t>(cy) * nx + cx]++] = static_cast<int>(i);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto [cx, cy] = cell_of(pixel[i]);
    bool hidden = false;
    for (int dy = -1; dy <= 1 && !hidden; ++dy) {
      const int y = cy + dy;
      if (y < 0 || y >= ny) continue;
      for (int dx = -1; dx <= 1 && !hidden; ++dx) {
        const int x = cx + dx;
        if (x < 0 || x >= nx) continue;
        const std::size_t c = static_cast<std::size_t>(y) * nx + x;
        for (int s = start[c]; s < start[c + 1]; ++s) {
          const std::size_t j = order[s];
          if (j == i || depth[j] >= depth[i]) continue;
          if ((pixel[i] - pixel[j]).norm() <= radius[j]) {
            hidden = true;
            break;
          }
        }
      }
    }
    visible[i] = !hidden;
  }
  return visible;
}

namespace {

inline int bin_index_1d(double v, double origin, double extent, int dims) {
  const int i = static_cast<int>(std::floor((v - origin) * dims / extent));
  return std::clamp(i, 0, dims - 1);
}

}  // namespace

VisibilityGrid estimate_visibility_grid(const ParticleLayerSpec& layer,
                                        const PinholeCamerad& camera,
                                        const RigidTransformd& gel_to_pinhole,
                                        const VisibilityOptions& options) {
  validate(layer);
  if (options.bin_dims.minCoeff() < 1)
    throw std::invalid_argument("visibility grid needs at least one bin per axis");
  if (options.n_configs < 1)
    throw std::invalid_argument("need at least one particle configuration");

  const std::size_t bins = static_cast<std::size_t>(options.bin_dims.x()) *
                           options.bin_dims.y() * options.bin_dims.z();
  const int n_configs = options.n_configs;

  // Per-configuration counts, reduced in configuration order afterwards so
  // the result is independent of the parallel schedule.
  std::vector<std::vector<int>> vis_counts(n_configs), tot_counts(n_configs);
  parallel_for(n_configs, options.jobs, [&](std::size_t cfg_idx) {
    const ParticleConfig config = sample_particles(
        layer, derive_seed(options.seed, cfg_idx));
    const std::vector<bool> vis = visible_flags(config, camera, gel_to_pinhole);
    auto& v = vis_counts[cfg_idx];
    auto& t = tot_counts[cfg_idx];
    v.assign(bins, 0);
    t.assign(bins, 0);
    for (std::size_t i = 0; i < config.particles.size(); ++i) {
      const Point3d& p = config.particles[i].center;
      const std::size_t b =
          bin_index_1d(p.x(), 0.0, layer.extent.x(), options.bin_dims.x()) +
          static_cast<std::size_t>(options.bin_dims.x()) *
              (bin_index_1d(p.y(), 0.0, layer.extent.y(), options.bin_dims.y()) +
               static_cast<std::size_t>(options.bin_dims.y()) *
                   bin_index_1d(p.z(), 0.0, layer.extent.z(),
                                options.bin_dims.z()));
      ++t[b];
      if (vis[i]) ++v[b];
    }
  });

  VisibilityGrid grid;
  grid.bin_dims = options.bin_dims;
  grid.origin = Point3d::Zero();
  grid.extent = layer.extent;
  grid.prob.assign(bins, 1.0);  // never-touched bins default to certain visibility
  std::vector<double> ratio_sum(bins, 0.0);
  std::vector<int> touched(bins, 0);
  for (int c = 0; c < n_configs; ++c)
    for (std::size_t b = 0; b < bins; ++b)
      if (tot_counts[c][b] > 0) {
        ratio_sum[b] += static_cast<double>(vis_counts[c][b]) / tot_counts[c][b];
        ++touched[b];
      }
  for (std::size_t b = 0; b < bins; ++b)
    if (touched[b] > 0) grid.prob[b] = ratio_sum[b] / touched[b];
  return grid;
}

double lookup(const VisibilityGrid& grid, const Point3d& p) {
  return grid.at(
      bin_index_1d(p.x(), grid.origin.x(), grid.extent.x(), grid.bin_dims.x()),
      bin_index_1d(p.y(), grid.origin.y(), grid.extent.y(), grid.bin_dims.y()),
      bin_index_1d(p.z(), grid.origin.z(), grid.extent.z(), grid.bin_dims.z()));
}

double weight(const VisibilityGrid& grid, const Point3d& s, const Vec3d& ds) {
  return lookup(grid, s) * lookup(grid, Point3d(s + ds));
}

void save_visibility(const std::string& path, const VisibilityGrid& grid) {
  Json header;
  header["bin_dims"] = Json::array({grid.bin_dims.x(), grid.bin_dims.y(),
                                    grid.bin_dims.z()});
  header["origin_mm"] = json_vec(grid.origin);
  header["extent_mm"] = json_vec(grid.extent);
  std::string out = header.dump();
  out.push_back('\n');
  for (double p : grid.prob) append_f32_le(out, static_cast<float>(p));
  write_file(path, out);
}

VisibilityGrid load_visibility(const std::string& path) {
  const std::string blob = read_file(path);
  const std::size_t eol = blob.find('\n');
  if (eol == std::string::npos) throw IoError(path + ": missing header line");
  Json header;
  try {
    header = Json::parse(blob.substr(0, eol));
  } catch (const Json::exception& e) {
    throw IoError(path + ": bad header: " + e.what());
  }
  VisibilityGrid grid;
  grid.bin_dims = vec3i_from_json(header.at("bin_dims"), "bin_dims");
  grid.origin = vec3_from_json(header.at("origin_mm"), "origin_mm");
  grid.extent = vec3_from_json(header.at("extent_mm"), "extent_mm");
  if (grid.bin_dims.minCoeff() < 1) throw IoError(path + ": bad bin dims");
  const std::size_t bins = static_cast<std::size_t>(grid.bin_dims.x()) *
                           grid.bin_dims.y() * grid.bin_dims.z();
  if (blob.size() - eol - 1 != bins * 4)
    throw IoError(path + ": payload size does not match bin dims");
  grid.prob.resize(bins);
  const unsigned char* p =
      reinterpret_cast<const unsigned char*>(blob.data()) + eol + 1;
  for (std::size_t b = 0; b < bins; ++b, p += 4) {
    grid.prob[b] = read_f32_le(p);
    if (!(grid.prob[b] >= 0.0 && grid.prob[b] <= 1.0))
      throw IoError(path + ": probability outside [0, 1]");
  }
  return grid;
}

}  // namespace gelflow
