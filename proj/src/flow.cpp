#include "gelflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "gelflow/io.hpp"

namespace gelflow {

namespace {

// Half-open bins over [lo, lo + size); the far edge clamps into the last bin.
// Multiply before dividing so a coordinate falls in the same bin at count and
// at 2 * count (the factor of two is exact).
int bin_1d(double value, double lo, double size, int count) {
  const int i = static_cast<int>(std::floor((value - lo) * count / size));
  return std::clamp(i, 0, count - 1);
}

std::string sidecar_path(const std::string& path) {
  return std::filesystem::path(path).replace_extension(".json").string();
}

std::string payload_or_throw(const std::string& path, std::size_t floats) {
  std::string bytes = read_file(path);
  if (bytes.size() != floats * 4)
    throw IoError(path + ": expected " + std::to_string(floats * 4) +
                  " payload bytes, got " + std::to_string(bytes.size()));
  return bytes;
}

void read_plane(const std::string& bytes, std::size_t plane,
                std::size_t count, std::vector<double>& out,
                const std::string& path) {
  out.resize(count);
  const auto* p =
      reinterpret_cast<const unsigned char*>(bytes.data()) + plane * count * 4;
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = read_f32_le(p + i * 4);
    if (!std::isfinite(out[i]))
      throw IoError(path + ": non-finite entry in plane " +
                    std::to_string(plane));
  }
}

}  // namespace

FeatureImage bin_displacements(const std::vector<FlowSample>& samples, int m,
                               const Vec2d& image_size) {
  if (m < 1) throw std::invalid_argument("feature image needs m >= 1");
  if (!(image_size.x() > 0.0) || !(image_size.y() > 0.0))
    throw std::invalid_argument("image size must be positive");

  const std::size_t cells = static_cast<std::size_t>(m) * m;
  std::vector<double> wsum(cells, 0.0), usum(cells, 0.0), vsum(cells, 0.0);

  for (const auto& s : samples) {
    if (s.weight < 0.0)
      throw std::invalid_argument("flow sample weights must be nonnegative");
    if (s.pixel.x() < 0.0 || s.pixel.x() > image_size.x() ||
        s.pixel.y() < 0.0 || s.pixel.y() > image_size.y())
      continue;
    const int ix = bin_1d(s.pixel.x(), 0.0, image_size.x(), m);
    const int iy = bin_1d(s.pixel.y(), 0.0, image_size.y(), m);
    const std::size_t idx = static_cast<std::size_t>(iy) * m + ix;
    wsum[idx] += s.weight;
    usum[idx] += s.weight * s.delta.x();
    vsum[idx] += s.weight * s.delta.y();
  }

  FeatureImage image;
  image.m = m;
  image.du.assign(cells, 0.0);
  image.dv.assign(cells, 0.0);
  for (std::size_t i = 0; i < cells; ++i) {
    if (wsum[i] < 1e-12) continue;
    image.du[i] = usum[i] / wsum[i];
    image.dv[i] = vsum[i] / wsum[i];
  }
  return image;
}

FeatureImage synth_optical_flow(const GridField& field,
                                const PinholeCamerad& camera,
                                const RigidTransformd& gel_to_pinhole,
                                const VisibilityGrid& vis, int m) {
  std::vector<FlowSample> samples;
  samples.reserve(field.size());

  std::size_t idx = 0;
  for (int iz = 0; iz < field.dims.z(); ++iz)
    for (int iy = 0; iy < field.dims.y(); ++iy)
      for (int ix = 0; ix < field.dims.x(); ++ix, ++idx) {
        const Point3d s = field.position(ix, iy, iz);
        const Vec3d ds = field.displacements[idx];
        const Vec3d sp = transform_point(gel_to_pinhole, s);
        const Vec3d dsp = transform_vector(gel_to_pinhole, ds);
        FlowSample sample;
        sample.pixel = pinhole_project(camera, sp);
        sample.delta = pinhole_project_pair(camera, sp, dsp);
        sample.weight = weight(vis, s, ds);
        samples.push_back(sample);
      }

  return bin_displacements(samples, m, camera.image_size);
}

ForceDistribution bin_forces(const std::vector<ForceNode>& nodes, int n,
                             const Vec2d& surface_extent) {
  if (n < 1) throw std::invalid_argument("force distribution needs n >= 1");
  if (!(surface_extent.x() > 0.0) || !(surface_extent.y() > 0.0))
    throw std::invalid_argument("surface extent must be positive");

  ForceDistribution dist;
  dist.n = n;
  const std::size_t cells = static_cast<std::size_t>(n) * n;
  dist.fx.assign(cells, 0.0);
  dist.fy.assign(cells, 0.0);
  dist.fz.assign(cells, 0.0);

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    if (node.position.x() < 0.0 || node.position.x() > surface_extent.x() ||
        node.position.y() < 0.0 || node.position.y() > surface_extent.y())
      throw std::invalid_argument("force node " + std::to_string(i) +
                                  " lies outside the surface extent");
    const int ix = bin_1d(node.position.x(), 0.0, surface_extent.x(), n);
    const int iy = bin_1d(node.position.y(), 0.0, surface_extent.y(), n);
    const std::size_t idx = static_cast<std::size_t>(iy) * n + ix;
    dist.fx[idx] += node.force.x();
    dist.fy[idx] += node.force.y();
    dist.fz[idx] += node.force.z();
  }
  return dist;
}

Vec3d total_force(const ForceDistribution& dist) {
  Vec3d total = Vec3d::Zero();
  for (std::size_t i = 0; i < dist.fx.size(); ++i)
    total += Vec3d(dist.fx[i], dist.fy[i], dist.fz[i]);
  return total;
}

void save_features(const std::string& path, const FeatureImage& image) {
  std::string payload;
  payload.reserve(image.du.size() * 8);
  for (double v : image.du) append_f32_le(payload, static_cast<float>(v));
  for (double v : image.dv) append_f32_le(payload, static_cast<float>(v));
  write_file(path, payload);

  Json sidecar;
  sidecar["m"] = image.m;
  sidecar["channels"] = {"du", "dv"};
  sidecar["units"] = "px";
  write_file(sidecar_path(path), sidecar.dump(2) + "\n");
}

FeatureImage load_features(const std::string& path) {
  const Json sidecar = load_json_file(sidecar_path(path));
  FeatureImage image;
  image.m = sidecar.at("m").get<int>();
  if (image.m < 1) throw IoError(path + ": sidecar m must be >= 1");
  const std::size_t cells = static_cast<std::size_t>(image.m) * image.m;
  const std::string bytes = payload_or_throw(path, cells * 2);
  read_plane(bytes, 0, cells, image.du, path);
  read_plane(bytes, 1, cells, image.dv, path);
  return image;
}

void save_forces(const std::string& path, const ForceDistribution& dist) {
  std::string payload;
  payload.reserve(dist.fx.size() * 12);
  for (double v : dist.fx) append_f32_le(payload, static_cast<float>(v));
  for (double v : dist.fy) append_f32_le(payload, static_cast<float>(v));
  for (double v : dist.fz) append_f32_le(payload, static_cast<float>(v));
  write_file(path, payload);

  Json sidecar;
  sidecar["n"] = dist.n;
  sidecar["channels"] = {"fx", "fy", "fz"};
  sidecar["units"] = "N";
  write_file(sidecar_path(path), sidecar.dump(2) + "\n");
}

ForceDistribution load_forces(const std::string& path) {
  const Json sidecar = load_json_file(sidecar_path(path));
  ForceDistribution dist;
  dist.n = sidecar.at("n").get<int>();
  if (dist.n < 1) throw IoError(path + ": sidecar n must be >= 1");
  const std::size_t cells = static_cast<std::size_t>(dist.n) * dist.n;
  const std::string bytes = payload_or_throw(path, cells * 3);
  read_plane(bytes, 0, cells, dist.fx, path);
  read_plane(bytes, 1, cells, dist.fy, path);
  read_plane(bytes, 2, cells, dist.fz, path);
  return dist;
}

}  // namespace gelflow
