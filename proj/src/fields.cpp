#include "gelflow/fields.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "gelflow/io.hpp"

namespace gelflow {

void validate(const ParticleLayerSpec& layer) {
  if (!(layer.extent.minCoeff() > 0.0))
    throw std::invalid_argument("layer extents must be positive");
  if (!(layer.radius_min > 0.0) || !(layer.radius_max >= layer.radius_min))
    throw std::invalid_argument("particle radius range must satisfy 0 < min <= max");
  if (!(layer.volume_ratio > 0.0) || !(layer.volume_ratio < 1.0))
    throw std::invalid_argument("particle volume ratio must lie in (0, 1)");
}

ScatteredField::ScatteredField(std::vector<FieldNode> nodes)
    : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw std::invalid_argument("empty field");
  box_lo_ = box_hi_ = nodes_.front().position;
  for (const auto& n : nodes_) {
    box_lo_ = box_lo_.cwiseMin(n.position);
    box_hi_ = box_hi_.cwiseMax(n.position);
  }
  build_index();
}

ScatteredField::ScatteredField(std::vector<FieldNode> nodes,
                               const Point3d& box_lo, const Point3d& box_hi)
    : nodes_(std::move(nodes)), box_lo_(box_lo), box_hi_(box_hi) {
  if (nodes_.empty()) throw std::invalid_argument("empty field");
  build_index();
}

void ScatteredField::build_index() {
  Point3d lo = box_lo_, hi = box_hi_;
  for (const auto& n : nodes_) {
    lo = lo.cwiseMin(n.position);
    hi = hi.cwiseMax(n.position);
  }
  const Vec3d diag = hi - lo;
  const double n = static_cast<double>(nodes_.size());
  // Cell edge near the mean node spacing; pad degenerate extents and cap the
  // per-axis cell count so flat or skewed clouds cannot blow up the grid.
  const double vol = (diag.x() + 1e-9) * (diag.y() + 1e-9) * (diag.z() + 1e-9);
  cell_ = std::max({std::cbrt(vol / n), diag.maxCoeff() / 192.0, 1e-9});
  grid_lo_ = lo;
  for (int a = 0; a < 3; ++a)
    grid_dims_[a] = std::max(1, static_cast<int>(std::floor(diag[a] / cell_)) + 1);

  const std::size_t num_cells = static_cast<std::size_t>(grid_dims_.x()) *
                                grid_dims_.y() * grid_dims_.z();
  std::vector<int> counts(num_cells, 0);
  const auto cell_of = [&](const Point3d& p) {
    Vec3i c;
    for (int a = 0; a < 3; ++a) {
      const int i = static_cast<int>(std::floor((p[a] - grid_lo_[a]) / cell_));
      c[a] = std::clamp(i, 0, grid_dims_[a] - 1);
    }
    return static_cast<std::size_t>(c.x()) +
           static_cast<std::size_t>(grid_dims_.x()) *
               (c.y() + static_cast<std::size_t>(grid_dims_.y()) * c.z());
  };
  for (const auto& node : nodes_) ++counts[cell_of(node.position)];
  cell_start_.assign(num_cells + 1, 0);
  for (std::size_t i = 0; i < num_cells; ++i)
    cell_start_[i + 1] = cell_start_[i] + counts[i];
  cell_nodes_.resize(nodes_.size());
  std::vector<int> cursor(cell_start_.begin(), cell_start_.end() - 1);
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
    cell_nodes_[cursor[cell_of(nodes_[i].position)]++] = i;
}

std::vector<int> ScatteredField::nearest(const Point3d& query, int k) const {
  if (k < 1 || k > static_cast<int>(nodes_.size()))
    throw std::invalid_argument("neighbor count outside [1, node count]");

  Vec3i qc;
  for (int a = 0; a < 3; ++a) {
    const int i = static_cast<int>(std::floor((query[a] - grid_lo_[a]) / cell_));
    qc[a] = std::clamp(i, 0, grid_dims_[a] - 1);
  }
  const int max_shell = std::max({qc.x(), grid_dims_.x() - 1 - qc.x(),
                                  qc.y(), grid_dims_.y() - 1 - qc.y(),
                                  qc.z(), grid_dims_.z() - 1 - qc.z()});

  std::vector<std::pair<double, int>> found;
  const auto scan_cell = [&](int x, int y, int z) {
    if (x < 0 || x >= grid_dims_.x() || y < 0 || y >= grid_dims_.y() ||
        z < 0 || z >= grid_dims_.z())
      return;
    const std::size_t c = static_cast<std::size_t>(x) +
        static_cast<std::size_t>(grid_dims_.x()) *
            (y + static_cast<std::size_t>(grid_dims_.y()) * z);
    for (int s = cell_start_[c]; s < cell_start_[c + 1]; ++s) {
      const int idx = cell_nodes_[s];
      found.emplace_back((nodes_[idx].position - query).squaredNorm(), idx);
    }
  };
  for (int shell = 0; shell <= max_shell; ++shell) {
    // Enumerate only the shell surface: full rows on the dz/dy faces, the
    // two end cells elsewhere.
    for (int dz = -shell; dz <= shell; ++dz)
      for (int dy = -shell; dy <= shell; ++dy) {
        if (std::max(std::abs(dz), std::abs(dy)) == shell) {
          for (int dx = -shell; dx <= shell; ++dx)
            scan_cell(qc.x() + dx, qc.y() + dy, qc.z() + dz);
        } else {
          scan_cell(qc.x() - shell, qc.y() + dy, qc.z() + dz);
          scan_cell(qc.x() + shell, qc.y() + dy, qc.z() + dz);
        }
      }
    if (static_cast<int>(found.size()) >= k) {
      std::nth_element(found.begin(), found.begin() + (k - 1), found.end());
      const double kth = std::sqrt(found[k - 1].first);
      // Cells beyond this shell hold points farther than shell * cell edge.
      if (kth <= static_cast<double>(shell) * cell_) break;
    }
  }
  std::sort(found.begin(), found.end());
  found.resize(std::min<std::size_t>(found.size(), k));
  std::vector<int> out;
  out.reserve(found.size());
  for (const auto& [d2, idx] : found) out.push_back(idx);
  return out;
}

std::vector<Vec3d> idw_interpolate(const ScatteredField& field,
                                   const std::vector<Point3d>& queries,
                                   const IdwParams& params) {
  if (!(params.power > 0.0)) throw std::invalid_argument("IDW power must be positive");
  std::vector<Vec3d> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto idx = field.nearest(queries[q], params.k_neighbors);
    const double d0 = (field.nodes()[idx[0]].position - queries[q]).norm();
    if (d0 < params.exact_hit || d0 == 0.0) {
      out[q] = field.nodes()[idx[0]].displacement;
      continue;
    }
    double wsum = 0.0;
    Vec3d acc = Vec3d::Zero();
    for (int i : idx) {
      const double d = (field.nodes()[i].position - queries[q]).norm();
      const double w = std::pow(d, -params.power);
      wsum += w;
      acc += w * field.nodes()[i].displacement;
    }
    out[q] = acc / wsum;
  }
  return out;
}

std::vector<Point3d> sample_grid(const ParticleLayerSpec& layer, double spacing) {
  validate(layer);
  if (!(spacing > 0.0) || spacing > layer.extent.minCoeff())
    throw std::invalid_argument("grid spacing must lie in (0, min extent]");
  Vec3i dims;
  Vec3d cell;
  for (int a = 0; a < 3; ++a) {
    dims[a] = std::max<long long>(1, std::llround(layer.extent[a] / spacing));
    cell[a] = layer.extent[a] / dims[a];
  }
  std::vector<Point3d> points;
  points.reserve(static_cast<std::size_t>(dims.x()) * dims.y() * dims.z());
  for (int iz = 0; iz < dims.z(); ++iz)
    for (int iy = 0; iy < dims.y(); ++iy)
      for (int ix = 0; ix < dims.x(); ++ix)
        points.emplace_back((ix + 0.5) * cell.x(), (iy + 0.5) * cell.y(),
                            (iz + 0.5) * cell.z());
  return points;
}

GridField make_grid(const ParticleLayerSpec& layer, double spacing) {
  validate(layer);
  if (!(spacing > 0.0) || spacing > layer.extent.minCoeff())
    throw std::invalid_argument("grid spacing must lie in (0, min extent]");
  GridField g;
  for (int a = 0; a < 3; ++a) {
    g.dims[a] = std::max<long long>(1, std::llround(layer.extent[a] / spacing));
    g.cell[a] = layer.extent[a] / g.dims[a];
  }
  g.origin = Point3d::Zero();
  g.displacements.assign(
      static_cast<std::size_t>(g.dims.x()) * g.dims.y() * g.dims.z(),
      Vec3d::Zero());
  return g;
}

void validate(const ElasticHalfspace& material) {
  if (!(material.shear_modulus > 0.0))
    throw std::invalid_argument("shear modulus must be positive");
  if (!(material.poisson > 0.0) || !(material.poisson < 0.5))
    throw std::invalid_argument("Poisson ratio must lie in (0, 0.5)");
}

std::vector<Vec3d> halfspace_field(const HalfspaceContact& contact,
                                   const ElasticHalfspace& material,
                                   const std::vector<Point3d>& queries,
                                   double surface_z) {
  validate(material);
  const double coef =
      contact.normal_force / (4.0 * M_PI * material.shear_modulus);
  const double one_two_nu = 1.0 - 2.0 * material.poisson;
  const double two_one_nu = 2.0 * (1.0 - material.poisson);

  std::vector<Vec3d> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Point3d& q = queries[i];
    const double depth = surface_z - q.z();
    if (depth < 0.0)
      throw std::invalid_argument("half-space query above the surface");
    const double rx = q.x() - contact.center.x();
    const double ry = q.y() - contact.center.y();
    const double r = std::hypot(rx, ry);
    const double rho = std::hypot(r, depth);
    if (rho < 1e-12)
      throw GeometryError("half-space query at the singular load point");
    const double ur =
        coef * (r * depth / (rho * rho * rho) -
                one_two_nu * r / (rho * (rho + depth)));
    const double uz =
        coef * (two_one_nu / rho + depth * depth / (rho * rho * rho));
    Vec3d d(0.0, 0.0, -uz);  // load presses toward -z in the gel frame
    if (r > 0.0) {
      d.x() = ur * rx / r;
      d.y() = ur * ry / r;
    }
    out[i] = d;
  }
  return out;
}

namespace {

constexpr const char* kFieldHeader = "x,y,z,dx,dy,dz";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  return s;
}

}  // namespace

ScatteredField load_field(const std::string& path) {
  const std::string text = read_file(path);
  if (trim(text).empty()) throw IoError(path + ": empty field file");

  std::vector<FieldNode> nodes;
  std::size_t pos = 0;
  int line_no = 0;
  bool saw_header = false;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line(text.data() + pos,
                          (eol == std::string::npos ? text.size() : eol) - pos);
    pos = (eol == std::string::npos) ? text.size() + 1 : eol + 1;
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kFieldHeader)
        throw IoError(path + ": expected header '" + kFieldHeader + "'");
      saw_header = true;
      continue;
    }
    const auto cols = split_csv(line);
    if (cols.size() != 6)
      throw IoError(path + ": line " + std::to_string(line_no) +
                    ": expected 6 columns");
    double v[6];
    for (int c = 0; c < 6; ++c) {
      try {
        v[c] = parse_double(cols[c]);
      } catch (const IoError& e) {
        throw IoError(path + ": line " + std::to_string(line_no) + ": " + e.what());
      }
      if (!std::isfinite(v[c]))
        throw IoError(path + ": line " + std::to_string(line_no) +
                      ": non-finite value");
    }
    nodes.push_back({Point3d(v[0], v[1], v[2]), Vec3d(v[3], v[4], v[5])});
  }
  if (nodes.empty()) throw IoError(path + ": no nodes");

  const std::string sidecar = path + ".json";
  if (std::filesystem::exists(sidecar)) {
    const Json meta = load_json_file(sidecar);
    const Vec3d origin = vec3_from_json(meta.at("origin_mm"), "origin_mm");
    const Vec3d extent = vec3_from_json(meta.at("extent_mm"), "extent_mm");
    return ScatteredField(std::move(nodes), origin, origin + extent);
  }
  return ScatteredField(std::move(nodes));
}

void save_field(const std::string& path, const ScatteredField& field) {
  std::string out(kFieldHeader);
  out.push_back('\n');
  for (const auto& n : field.nodes()) {
    out += format_double(n.position.x());
    out.push_back(',');
    out += format_double(n.position.y());
    out.push_back(',');
    out += format_double(n.position.z());
    out.push_back(',');
    out += format_double(n.displacement.x());
    out.push_back(',');
    out += format_double(n.displacement.y());
    out.push_back(',');
    out += format_double(n.displacement.z());
    out.push_back('\n');
  }
  write_file(path, out);

  Json meta;
  meta["origin_mm"] = json_vec(field.box_lo());
  meta["extent_mm"] = json_vec(Vec3d(field.box_hi() - field.box_lo()));
  write_file(path + ".json", meta.dump(2) + "\n");
}

}  // namespace gelflow
