#include "gelflow/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <stdexcept>
#include <utility>

#include "gelflow/parallel.hpp"
#include "gelflow/random.hpp"

namespace gelflow {

namespace {

namespace fs = std::filesystem;

void check_keys(const Json& j, const char* where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw IoError(std::string(where) + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) known = true;
    if (!known)
      throw IoError(std::string(where) + ": unknown key '" + it.key() + "'");
  }
}

double num(const Json& j, const char* what) {
  if (!j.is_number()) throw IoError(std::string(what) + ": expected a number");
  return j.get<double>();
}

int integer(const Json& j, const char* what) {
  if (!j.is_number_integer())
    throw IoError(std::string(what) + ": expected an integer");
  return j.get<int>();
}

std::uint64_t uint64(const Json& j, const char* what) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw IoError(std::string(what) + ": expected a non-negative integer");
  return j.get<std::uint64_t>();
}

std::string str(const Json& j, const char* what) {
  if (!j.is_string()) throw IoError(std::string(what) + ": expected a string");
  return j.get<std::string>();
}

bool safe_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

Json record_to_json(const IndentationRecord& r) {
  Json j;
  j["id"] = r.id;
  j["x_mm"] = r.x;
  j["y_mm"] = r.y;
  j["depth_mm"] = r.depth;
  if (r.force) j["force_n"] = *r.force;
  if (!r.field_file.empty()) j["field_file"] = r.field_file;
  if (!r.forces_file.empty()) j["forces_file"] = r.forces_file;
  if (r.seed) j["seed"] = *r.seed;
  return j;
}

IndentationRecord record_from_json(const Json& j, const char* where) {
  check_keys(j, where,
             {"id", "x_mm", "y_mm", "depth_mm", "force_n", "field_file",
              "forces_file", "seed"});
  if (!j.contains("id") || !j.contains("x_mm") || !j.contains("y_mm") ||
      !j.contains("depth_mm"))
    throw IoError(std::string(where) + ": id, x_mm, y_mm, depth_mm are required");
  IndentationRecord r;
  r.id = str(j["id"], where);
  r.x = num(j["x_mm"], where);
  r.y = num(j["y_mm"], where);
  r.depth = num(j["depth_mm"], where);
  if (j.contains("force_n")) r.force = num(j["force_n"], where);
  if (j.contains("field_file")) r.field_file = str(j["field_file"], where);
  if (j.contains("forces_file")) r.forces_file = str(j["forces_file"], where);
  if (j.contains("seed")) r.seed = uint64(j["seed"], where);
  return r;
}

std::uint64_t parse_uint64(std::string_view s, const char* what) {
  std::uint64_t v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first &&
         (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r'))
    --last;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw IoError(std::string(what) + ": bad unsigned integer '" +
                  std::string(s) + "'");
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<IndentationRecord> records_from_csv(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::string_view> lines;
  {
    std::string_view rest = text;
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      lines.push_back(rest.substr(0, nl));
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  std::size_t row = 0;
  while (row < lines.size() && trim(lines[row]).empty()) ++row;
  if (row == lines.size()) throw IoError(path + ": missing header row");

  const std::vector<std::string_view> header = split_csv(lines[row]);
  static const char* kKnown[] = {"id", "x_mm", "y_mm", "depth_mm",
                                 "force_n", "seed"};
  std::vector<std::string> cols;
  for (std::string_view h : header) {
    const std::string name(trim(h));
    bool known = false;
    for (const char* k : kKnown)
      if (name == k) known = true;
    if (!known) throw IoError(path + ": unknown column '" + name + "'");
    if (std::count(cols.begin(), cols.end(), name) > 0)
      throw IoError(path + ": duplicate column '" + name + "'");
    cols.push_back(name);
  }
  for (const char* required : {"id", "x_mm", "y_mm", "depth_mm"})
    if (std::count(cols.begin(), cols.end(), required) == 0)
      throw IoError(path + ": missing column '" + std::string(required) + "'");

  std::vector<IndentationRecord> out;
  for (++row; row < lines.size(); ++row) {
    const std::string_view line = trim(lines[row]);
    if (line.empty() || line.front() == '#') continue;
    const std::vector<std::string_view> cells = split_csv(lines[row]);
    if (cells.size() != cols.size())
      throw IoError(path + ":" + std::to_string(row + 1) + ": expected " +
                    std::to_string(cols.size()) + " columns, got " +
                    std::to_string(cells.size()));
    IndentationRecord r;
    const std::string where = path + ":" + std::to_string(row + 1);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::string_view cell = trim(cells[c]);
      if (cols[c] == "id") {
        r.id = std::string(cell);
      } else if (cols[c] == "x_mm") {
        r.x = parse_double(cell);
      } else if (cols[c] == "y_mm") {
        r.y = parse_double(cell);
      } else if (cols[c] == "depth_mm") {
        r.depth = parse_double(cell);
      } else if (cols[c] == "force_n") {
        if (!cell.empty()) r.force = parse_double(cell);
      } else {  // seed
        if (!cell.empty()) r.seed = parse_uint64(cell, where.c_str());
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

double contact_radius(const IndentationRecord& record,
                      const PipelineConfig& config) {
  // Spherical tip: patch radius grows with the root of the depth.
  return std::sqrt(std::max(record.depth, 0.0) * config.indenter.radius_mm);
}

double contact_force(const IndentationRecord& record,
                     const PipelineConfig& config) {
  return record.force ? *record.force
                      : config.indenter.stiffness_n_per_mm * record.depth;
}

double bilinear(const std::vector<double>& ch, int m, double x, double y) {
  x = std::clamp(x, 0.0, double(m - 1));
  y = std::clamp(y, 0.0, double(m - 1));
  const int x0 = std::min(static_cast<int>(x), m - 1);
  const int y0 = std::min(static_cast<int>(y), m - 1);
  const int x1 = std::min(x0 + 1, m - 1);
  const int y1 = std::min(y0 + 1, m - 1);
  const double fx = x - x0, fy = y - y0;
  const auto v = [&](int ix, int iy) {
    return ch[static_cast<std::size_t>(iy) * m + ix];
  };
  const double top = (1.0 - fx) * v(x0, y0) + fx * v(x1, y0);
  const double bot = (1.0 - fx) * v(x0, y1) + fx * v(x1, y1);
  return (1.0 - fy) * top + fy * bot;
}

// In-place separable Gaussian smoothing; the kernel is clipped at the image
// border and renormalized over the part that fits.
void gaussian_smooth(std::vector<double>& img, int m, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k)
    kernel[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
  std::vector<double> tmp(img.size());
  for (int pass = 0; pass < 2; ++pass) {
    for (int y = 0; y < m; ++y) {
      for (int x = 0; x < m; ++x) {
        double acc = 0.0, wsum = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = (pass == 0) ? x + k : x;
          const int yy = (pass == 0) ? y : y + k;
          if (xx < 0 || xx >= m || yy < 0 || yy >= m) continue;
          const double w = kernel[k + radius];
          acc += w * img[static_cast<std::size_t>(yy) * m + xx];
          wsum += w;
        }
        tmp[static_cast<std::size_t>(y) * m + x] = acc / wsum;
      }
    }
    img.swap(tmp);
  }
}

}  // namespace

PipelineConfig::PipelineConfig() {
  camera.focal = default_focal(-30.0);
  camera.center = Vec2d(220.0, 220.0);
  camera.image_size = Vec2d(440.0, 440.0);
  gel_to_pinhole.rotation << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  gel_to_pinhole.translation = Vec3d(-15.0, 15.0, -30.0);
  refine.record.id = "refine";
  refine.record.x = 15.0;
  refine.record.y = 15.0;
  refine.record.depth = 0.5;
}

PipelineConfig load_config(const std::string& path) {
  PipelineConfig cfg;
  if (path.empty()) return cfg;
  const Json j = load_json_file(path);
  check_keys(j, "config",
             {"seed", "layer", "camera", "gel_to_pinhole", "material",
              "indenter", "grid", "idw", "features", "labels", "visibility",
              "augment", "refine"});

  if (j.contains("seed")) cfg.seed = uint64(j["seed"], "seed");
  if (j.contains("layer")) {
    const Json& s = j["layer"];
    check_keys(s, "layer",
               {"extent_mm", "radius_min_mm", "radius_max_mm", "volume_ratio"});
    if (s.contains("extent_mm"))
      cfg.layer.extent = vec3_from_json(s["extent_mm"], "layer.extent_mm");
    if (s.contains("radius_min_mm"))
      cfg.layer.radius_min = num(s["radius_min_mm"], "layer.radius_min_mm");
    if (s.contains("radius_max_mm"))
      cfg.layer.radius_max = num(s["radius_max_mm"], "layer.radius_max_mm");
    if (s.contains("volume_ratio"))
      cfg.layer.volume_ratio = num(s["volume_ratio"], "layer.volume_ratio");
  }
  if (j.contains("camera")) {
    const Json& s = j["camera"];
    check_keys(s, "camera", {"focal_px", "center_px", "image_size_px"});
    if (s.contains("focal_px")) cfg.camera.focal = num(s["focal_px"], "camera.focal_px");
    if (s.contains("center_px"))
      cfg.camera.center = vec2_from_json(s["center_px"], "camera.center_px");
    if (s.contains("image_size_px"))
      cfg.camera.image_size =
          vec2_from_json(s["image_size_px"], "camera.image_size_px");
  }
  if (j.contains("gel_to_pinhole")) {
    const Json& s = j["gel_to_pinhole"];
    check_keys(s, "gel_to_pinhole", {"rotation", "translation_mm"});
    if (s.contains("rotation"))
      cfg.gel_to_pinhole.rotation =
          mat_row_major_from_json(s["rotation"], "gel_to_pinhole.rotation");
    if (s.contains("translation_mm"))
      cfg.gel_to_pinhole.translation =
          vec3_from_json(s["translation_mm"], "gel_to_pinhole.translation_mm");
  }
  if (j.contains("material")) {
    const Json& s = j["material"];
    check_keys(s, "material", {"shear_modulus_mpa", "poisson"});
    if (s.contains("shear_modulus_mpa"))
      cfg.material.shear_modulus =
          num(s["shear_modulus_mpa"], "material.shear_modulus_mpa");
    if (s.contains("poisson"))
      cfg.material.poisson = num(s["poisson"], "material.poisson");
  }
  if (j.contains("indenter")) {
    const Json& s = j["indenter"];
    check_keys(s, "indenter",
               {"radius_mm", "stiffness_n_per_mm", "contact_nodes_per_axis"});
    if (s.contains("radius_mm"))
      cfg.indenter.radius_mm = num(s["radius_mm"], "indenter.radius_mm");
    if (s.contains("stiffness_n_per_mm"))
      cfg.indenter.stiffness_n_per_mm =
          num(s["stiffness_n_per_mm"], "indenter.stiffness_n_per_mm");
    if (s.contains("contact_nodes_per_axis"))
      cfg.indenter.contact_nodes_per_axis =
          integer(s["contact_nodes_per_axis"], "indenter.contact_nodes_per_axis");
  }
  if (j.contains("grid")) {
    const Json& s = j["grid"];
    check_keys(s, "grid", {"spacing_mm"});
    if (s.contains("spacing_mm"))
      cfg.grid_spacing = num(s["spacing_mm"], "grid.spacing_mm");
  }
  if (j.contains("idw")) {
    const Json& s = j["idw"];
    check_keys(s, "idw", {"power", "k_neighbors", "exact_hit_mm"});
    if (s.contains("power")) cfg.idw.power = num(s["power"], "idw.power");
    if (s.contains("k_neighbors"))
      cfg.idw.k_neighbors = integer(s["k_neighbors"], "idw.k_neighbors");
    if (s.contains("exact_hit_mm"))
      cfg.idw.exact_hit = num(s["exact_hit_mm"], "idw.exact_hit_mm");
  }
  if (j.contains("features")) {
    const Json& s = j["features"];
    check_keys(s, "features", {"regions"});
    if (s.contains("regions"))
      cfg.feature_regions = integer(s["regions"], "features.regions");
  }
  if (j.contains("labels")) {
    const Json& s = j["labels"];
    check_keys(s, "labels", {"bins"});
    if (s.contains("bins")) cfg.label_bins = integer(s["bins"], "labels.bins");
  }
  if (j.contains("visibility")) {
    const Json& s = j["visibility"];
    check_keys(s, "visibility", {"file", "n_configs", "bin_dims"});
    if (s.contains("file")) cfg.visibility.file = str(s["file"], "visibility.file");
    if (s.contains("n_configs"))
      cfg.visibility.n_configs = integer(s["n_configs"], "visibility.n_configs");
    if (s.contains("bin_dims"))
      cfg.visibility.bin_dims =
          vec3i_from_json(s["bin_dims"], "visibility.bin_dims");
  }
  if (j.contains("augment")) {
    const Json& s = j["augment"];
    check_keys(s, "augment", {"alpha", "sigma"});
    if (s.contains("alpha")) cfg.augment.alpha = num(s["alpha"], "augment.alpha");
    if (s.contains("sigma")) cfg.augment.sigma = num(s["sigma"], "augment.sigma");
  }
  if (j.contains("refine")) {
    const Json& s = j["refine"];
    check_keys(s, "refine", {"radius_mm", "step_mm", "coarse_step_mm", "record"});
    if (s.contains("radius_mm"))
      cfg.refine.radius_mm = num(s["radius_mm"], "refine.radius_mm");
    if (s.contains("step_mm"))
      cfg.refine.step_mm = num(s["step_mm"], "refine.step_mm");
    if (s.contains("coarse_step_mm"))
      cfg.refine.coarse_step_mm = num(s["coarse_step_mm"], "refine.coarse_step_mm");
    if (s.contains("record"))
      cfg.refine.record = record_from_json(s["record"], "refine.record");
  }

  validate_camera(cfg.camera);
  validate_rigid(cfg.gel_to_pinhole);
  validate(cfg.material);
  if (!(cfg.grid_spacing > 0.0))
    throw IoError("grid.spacing_mm must be positive");
  if (cfg.feature_regions < 1) throw IoError("features.regions must be >= 1");
  if (cfg.label_bins < 1) throw IoError("labels.bins must be >= 1");
  if (cfg.indenter.contact_nodes_per_axis < 1)
    throw IoError("indenter.contact_nodes_per_axis must be >= 1");
  if (!(cfg.indenter.radius_mm > 0.0))
    throw IoError("indenter.radius_mm must be positive");
  if (!(cfg.indenter.stiffness_n_per_mm >= 0.0))
    throw IoError("indenter.stiffness_n_per_mm must be >= 0");
  if (!(cfg.augment.alpha >= 0.0)) throw IoError("augment.alpha must be >= 0");
  if (!(cfg.augment.sigma > 0.0)) throw IoError("augment.sigma must be > 0");
  if (!(cfg.refine.step_mm > 0.0)) throw IoError("refine.step_mm must be positive");
  if (!(cfg.refine.radius_mm >= cfg.refine.step_mm))
    throw IoError("refine.radius_mm must be >= refine.step_mm");
  if (!(cfg.refine.coarse_step_mm >= 0.0))
    throw IoError("refine.coarse_step_mm must be >= 0");
  return cfg;
}

Json effective_config(const PipelineConfig& config) {
  Json j;
  j["seed"] = config.seed;
  j["layer"] = {{"extent_mm", json_vec(config.layer.extent)},
                {"radius_min_mm", config.layer.radius_min},
                {"radius_max_mm", config.layer.radius_max},
                {"volume_ratio", config.layer.volume_ratio}};
  j["camera"] = {{"focal_px", config.camera.focal},
                 {"center_px", json_vec(config.camera.center)},
                 {"image_size_px", json_vec(config.camera.image_size)}};
  j["gel_to_pinhole"] = {
      {"rotation", json_mat_row_major(config.gel_to_pinhole.rotation)},
      {"translation_mm", json_vec(config.gel_to_pinhole.translation)}};
  j["material"] = {{"shear_modulus_mpa", config.material.shear_modulus},
                   {"poisson", config.material.poisson}};
  j["indenter"] = {
      {"radius_mm", config.indenter.radius_mm},
      {"stiffness_n_per_mm", config.indenter.stiffness_n_per_mm},
      {"contact_nodes_per_axis", config.indenter.contact_nodes_per_axis}};
  j["grid"] = {{"spacing_mm", config.grid_spacing}};
  j["idw"] = {{"power", config.idw.power},
              {"k_neighbors", config.idw.k_neighbors},
              {"exact_hit_mm", config.idw.exact_hit}};
  j["features"] = {{"regions", config.feature_regions}};
  j["labels"] = {{"bins", config.label_bins}};
  j["visibility"] = {{"file", config.visibility.file},
                     {"n_configs", config.visibility.n_configs},
                     {"bin_dims", Json::array({config.visibility.bin_dims.x(),
                                               config.visibility.bin_dims.y(),
                                               config.visibility.bin_dims.z()})}};
  j["augment"] = {{"alpha", config.augment.alpha},
                  {"sigma", config.augment.sigma}};
  j["refine"] = {{"radius_mm", config.refine.radius_mm},
                 {"step_mm", config.refine.step_mm},
                 {"coarse_step_mm", config.refine.coarse_step_mm},
                 {"record", record_to_json(config.refine.record)}};
  return j;
}

std::vector<IndentationRecord> load_records(const std::string& path) {
  const fs::path p(path);
  const std::string ext = p.extension().string();
  if (ext == ".json") {
    const Json j = load_json_file(path);
    if (!j.is_array()) throw IoError(path + ": expected a JSON array of records");
    std::vector<IndentationRecord> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string where = path + " record " + std::to_string(i);
      out.push_back(record_from_json(j[i], where.c_str()));
    }
    return out;
  }
  if (ext == ".csv") return records_from_csv(path);
  throw IoError(path + ": records file must be .json or .csv");
}

void validate_record(const IndentationRecord& record,
                     const ParticleLayerSpec& layer) {
  if (!safe_id(record.id))
    throw std::invalid_argument(
        "record id must be non-empty [A-Za-z0-9._-] text, got '" + record.id +
        "'");
  if (!std::isfinite(record.x) || !std::isfinite(record.y) ||
      !std::isfinite(record.depth))
    throw std::invalid_argument("record '" + record.id +
                                "': non-finite position or depth");
  if (record.depth < 0.0)
    throw std::invalid_argument("record '" + record.id +
                                "': depth must be >= 0");
  if (record.x < 0.0 || record.x > layer.extent.x() || record.y < 0.0 ||
      record.y > layer.extent.y())
    throw std::invalid_argument("record '" + record.id +
                                "': position lies outside the surface");
  if (record.force && !std::isfinite(*record.force))
    throw std::invalid_argument("record '" + record.id +
                                "': non-finite force");
}

std::vector<ForceNode> load_force_nodes(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<ForceNode> out;
  std::string_view rest = text;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    const std::string_view raw = rest.substr(0, nl);
    rest = (nl == std::string_view::npos) ? std::string_view()
                                          : rest.substr(nl + 1);
    ++lineno;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!saw_header) {
      if (line != "x,y,z,fx,fy,fz")
        throw IoError(path + ": expected header x,y,z,fx,fy,fz");
      saw_header = true;
      continue;
    }
    const std::vector<std::string_view> cells = split_csv(raw);
    if (cells.size() != 6)
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": expected 6 columns");
    ForceNode node;
    for (int c = 0; c < 3; ++c) node.position[c] = parse_double(cells[c]);
    for (int c = 0; c < 3; ++c) node.force[c] = parse_double(cells[3 + c]);
    if (!node.position.allFinite() || !node.force.allFinite())
      throw IoError(path + ":" + std::to_string(lineno) + ": non-finite value");
    out.push_back(node);
  }
  if (!saw_header) throw IoError(path + ": expected header x,y,z,fx,fy,fz");
  return out;
}

void save_force_nodes(const std::string& path,
                      const std::vector<ForceNode>& nodes) {
  std::string text = "x,y,z,fx,fy,fz\n";
  for (const ForceNode& node : nodes) {
    for (int c = 0; c < 3; ++c) {
      text += format_double(node.position[c]);
      text += ',';
    }
    for (int c = 0; c < 3; ++c) {
      text += format_double(node.force[c]);
      text += (c == 2) ? '\n' : ',';
    }
  }
  write_file(path, text);
}

VisibilityGrid resolve_visibility(const PipelineConfig& config) {
  if (!config.visibility.file.empty())
    return load_visibility(config.visibility.file);
  const Vec3i d = config.visibility.bin_dims;
  if (d.minCoeff() < 1)
    throw std::invalid_argument("visibility.bin_dims must be >= 1 per axis");
  VisibilityGrid grid;
  grid.bin_dims = d;
  grid.origin = Point3d::Zero();
  grid.extent = config.layer.extent;
  grid.prob.assign(std::size_t(d.x()) * d.y() * d.z(), 1.0);
  return grid;
}

ScatteredField record_field(const IndentationRecord& record,
                            const PipelineConfig& config) {
  if (!record.field_file.empty()) return load_field(record.field_file);
  HalfspaceContact contact;
  contact.center = Vec2d(record.x, record.y);
  contact.normal_force = contact_force(record, config);
  contact.radius = contact_radius(record, config);
  const std::vector<Point3d> points =
      sample_grid(config.layer, config.grid_spacing);
  const std::vector<Vec3d> disp = halfspace_field(
      contact, config.material, points, config.layer.extent.z());
  std::vector<FieldNode> nodes(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    nodes[i] = FieldNode{points[i], disp[i]};
  return ScatteredField(std::move(nodes), Point3d::Zero(), config.layer.extent);
}

GridField resample_to_grid(const ScatteredField& field,
                           const PipelineConfig& config) {
  GridField grid = make_grid(config.layer, config.grid_spacing);
  std::vector<Point3d> queries;
  queries.reserve(grid.size());
  for (int iz = 0; iz < grid.dims.z(); ++iz)
    for (int iy = 0; iy < grid.dims.y(); ++iy)
      for (int ix = 0; ix < grid.dims.x(); ++ix)
        queries.push_back(grid.position(ix, iy, iz));
  grid.displacements = idw_interpolate(field, queries, config.idw);
  return grid;
}

std::vector<ForceNode> record_forces(const IndentationRecord& record,
                                     const PipelineConfig& config) {
  if (!record.forces_file.empty()) return load_force_nodes(record.forces_file);
  const double total = contact_force(record, config);
  const double a = contact_radius(record, config);
  const double surface = config.layer.extent.z();
  const int k = config.indenter.contact_nodes_per_axis;

  std::vector<Point3d> kept;
  if (a <= 0.0 || k == 1) {
    kept.emplace_back(record.x, record.y, surface);
  } else {
    for (int iy = 0; iy < k; ++iy) {
      for (int ix = 0; ix < k; ++ix) {
        const double px = -a + 2.0 * a * ix / (k - 1);
        const double py = -a + 2.0 * a * iy / (k - 1);
        if (px * px + py * py > a * a) continue;
        const double x = record.x + px, y = record.y + py;
        // patches sticking out past the gel edge are dropped, not clamped
        if (x < 0.0 || x > config.layer.extent.x() || y < 0.0 ||
            y > config.layer.extent.y())
          continue;
        kept.emplace_back(x, y, surface);
      }
    }
    if (kept.empty()) kept.emplace_back(record.x, record.y, surface);
  }

  const double share = total / static_cast<double>(kept.size());
  std::vector<ForceNode> nodes(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i)
    nodes[i] = ForceNode{kept[i], Vec3d(0.0, 0.0, -share)};
  return nodes;
}

std::pair<FeatureImage, ForceDistribution> generate_sample(
    const IndentationRecord& record, const PipelineConfig& config,
    const VisibilityGrid& visibility) {
  try {
    validate_record(record, config.layer);
    const GridField grid = resample_to_grid(record_field(record, config), config);
    FeatureImage features =
        synth_optical_flow(grid, config.camera, config.gel_to_pinhole,
                           visibility, config.feature_regions);
    ForceDistribution labels = bin_forces(
        record_forces(record, config), config.label_bins,
        Vec2d(config.layer.extent.x(), config.layer.extent.y()));
    return {std::move(features), std::move(labels)};
  } catch (const std::exception& e) {
    const std::string what = e.what();
    if (what.rfind("record '", 0) == 0) throw std::runtime_error(what);
    throw std::runtime_error("record '" + record.id + "': " + what);
  }
}

std::pair<FeatureImage, ForceDistribution> generate_sample(
    const IndentationRecord& record, const PipelineConfig& config) {
  return generate_sample(record, config, resolve_visibility(config));
}

FeatureImage elastic_deform(const FeatureImage& image, double alpha,
                            double sigma, std::uint64_t rng_seed) {
  const int m = image.m;
  const std::size_t cells = static_cast<std::size_t>(m) * m;
  if (m < 1 || image.du.size() != cells || image.dv.size() != cells)
    throw std::invalid_argument("elastic_deform: malformed feature image");
  if (!(alpha >= 0.0))
    throw std::invalid_argument("elastic_deform: alpha must be >= 0");
  if (!(sigma > 0.0))
    throw std::invalid_argument("elastic_deform: sigma must be > 0");
  if (alpha == 0.0) return image;

  std::vector<double> dx(cells), dy(cells);
  std::mt19937_64 rng(rng_seed);
  for (std::size_t i = 0; i < cells; ++i) {
    dx[i] = uniform(rng, -1.0, 1.0);
    dy[i] = uniform(rng, -1.0, 1.0);
  }
  gaussian_smooth(dx, m, sigma);
  gaussian_smooth(dy, m, sigma);

  double peak = 0.0;
  for (std::size_t i = 0; i < cells; ++i)
    peak = std::max(peak, std::hypot(dx[i], dy[i]));
  const double scale = peak > 0.0 ? alpha / peak : 0.0;

  FeatureImage out;
  out.m = m;
  out.du.resize(cells);
  out.dv.resize(cells);
  for (int y = 0; y < m; ++y) {
    for (int x = 0; x < m; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * m + x;
      const double sx = x + scale * dx[i];
      const double sy = y + scale * dy[i];
      out.du[i] = bilinear(image.du, m, sx, sy);
      out.dv[i] = bilinear(image.dv, m, sx, sy);
    }
  }
  return out;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  Json samples = Json::array();
  for (const SampleEntry& s : manifest.samples) {
    Json entry;
    entry["record"] = record_to_json(s.record);
    entry["seed"] = s.seed;
    entry["features"] = s.features;
    entry["labels"] = s.labels;
    entry["augmented"] = s.augmented;
    entry["total_force_n"] = json_vec(s.total_force);
    samples.push_back(std::move(entry));
  }
  Json failures = Json::array();
  for (const FailureEntry& f : manifest.failures)
    failures.push_back({{"id", f.id}, {"error", f.error}});
  const Json j = {{"schema_version", manifest.schema_version},
                  {"config_file", manifest.config_file},
                  {"feature_regions", manifest.feature_regions},
                  {"label_bins", manifest.label_bins},
                  {"samples", std::move(samples)},
                  {"failures", std::move(failures)}};
  write_file(path, j.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::string& path) {
  const Json j = load_json_file(path);
  check_keys(j, "manifest",
             {"schema_version", "config_file", "feature_regions", "label_bins",
              "samples", "failures"});
  DatasetManifest man;
  man.schema_version = integer(j.at("schema_version"), "schema_version");
  if (man.schema_version != 1)
    throw IoError(path + ": unsupported schema_version " +
                  std::to_string(man.schema_version));
  man.config_file = str(j.at("config_file"), "config_file");
  man.feature_regions = integer(j.at("feature_regions"), "feature_regions");
  man.label_bins = integer(j.at("label_bins"), "label_bins");
  if (!j.at("samples").is_array() || !j.at("failures").is_array())
    throw IoError(path + ": samples and failures must be arrays");
  for (const Json& s : j.at("samples")) {
    check_keys(s, "sample",
               {"record", "seed", "features", "labels", "augmented",
                "total_force_n"});
    SampleEntry entry;
    entry.record = record_from_json(s.at("record"), "sample.record");
    entry.seed = uint64(s.at("seed"), "sample.seed");
    entry.features = str(s.at("features"), "sample.features");
    entry.labels = str(s.at("labels"), "sample.labels");
    if (s.contains("augmented")) {
      if (!s.at("augmented").is_array())
        throw IoError("sample.augmented: expected an array");
      for (const Json& a : s.at("augmented"))
        entry.augmented.push_back(str(a, "sample.augmented"));
    }
    entry.total_force = vec3_from_json(s.at("total_force_n"), "total_force_n");
    man.samples.push_back(std::move(entry));
  }
  for (const Json& f : j.at("failures")) {
    check_keys(f, "failure", {"id", "error"});
    man.failures.push_back(
        FailureEntry{str(f.at("id"), "failure.id"), str(f.at("error"), "failure.error")});
  }
  return man;
}

DatasetManifest generate_dataset(const std::vector<IndentationRecord>& records,
                                 const PipelineConfig& config,
                                 const std::string& out_dir, int jobs,
                                 int augment_copies) {
  if (augment_copies < 0)
    throw std::invalid_argument("augment_copies must be >= 0");
  {
    std::set<std::string> seen;
    for (const IndentationRecord& r : records)
      if (!seen.insert(r.id).second)
        throw std::invalid_argument("duplicate record id '" + r.id + "'");
  }
  try {
    fs::create_directories(fs::path(out_dir) / "samples");
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("cannot create dataset directory: ") + e.what());
  }
  write_file((fs::path(out_dir) / "effective_config.json").string(),
             effective_config(config).dump(2) + "\n");
  const VisibilityGrid vis = resolve_visibility(config);

  struct Outcome {
    bool ok = false;
    std::uint64_t seed = 0;
    std::string error;
    Vec3d total = Vec3d::Zero();
    std::vector<std::string> augmented;
  };
  std::vector<Outcome> outcomes(records.size());

  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const IndentationRecord& rec = records[i];
    Outcome& o = outcomes[i];
    o.seed = rec.seed ? *rec.seed : derive_seed(config.seed, fnv1a64(rec.id));
    FeatureImage features;
    ForceDistribution labels;
    try {
      auto sample = generate_sample(rec, config, vis);
      features = std::move(sample.first);
      labels = std::move(sample.second);
    } catch (const std::exception& e) {
      o.error = e.what();
      return;  // logged per record; the batch keeps going
    }
    const std::string feat_rel = "samples/" + rec.id + ".features.f32";
    const std::string lab_rel = "samples/" + rec.id + ".labels.f32";
    save_features((fs::path(out_dir) / feat_rel).string(), features);
    save_forces((fs::path(out_dir) / lab_rel).string(), labels);
    o.total = total_force(labels);
    for (int c = 1; c <= augment_copies; ++c) {
      const FeatureImage warped =
          elastic_deform(features, config.augment.alpha, config.augment.sigma,
                         derive_seed(o.seed, static_cast<std::uint64_t>(c)));
      const std::string aug_rel =
          "samples/" + rec.id + ".aug" + std::to_string(c) + ".features.f32";
      save_features((fs::path(out_dir) / aug_rel).string(), warped);
      o.augmented.push_back(aug_rel);
    }
    o.ok = true;
  });

  DatasetManifest man;
  man.config_file = "effective_config.json";
  man.feature_regions = config.feature_regions;
  man.label_bins = config.label_bins;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Outcome& o = outcomes[i];
    if (o.ok) {
      SampleEntry entry;
      entry.record = records[i];
      entry.seed = o.seed;
      entry.features = "samples/" + records[i].id + ".features.f32";
      entry.labels = "samples/" + records[i].id + ".labels.f32";
      entry.augmented = o.augmented;
      entry.total_force = o.total;
      man.samples.push_back(std::move(entry));
    } else {
      man.failures.push_back(FailureEntry{records[i].id, o.error});
    }
  }
  save_manifest((fs::path(out_dir) / "manifest.json").string(), man);
  return man;
}

ValidationReport validate_manifest(const std::string& manifest_path) {
  const fs::path root = fs::path(manifest_path).parent_path();
  const DatasetManifest man = load_manifest(manifest_path);
  ValidationReport report;
  for (const SampleEntry& s : man.samples) {
    ValidationItem item;
    item.id = s.record.id;
    try {
      const FeatureImage features = load_features((root / s.features).string());
      if (features.m != man.feature_regions)
        throw IoError(s.features + ": feature grid is " +
                      std::to_string(features.m) + ", manifest says " +
                      std::to_string(man.feature_regions));
      const ForceDistribution labels = load_forces((root / s.labels).string());
      if (labels.n != man.label_bins)
        throw IoError(s.labels + ": label grid is " + std::to_string(labels.n) +
                      ", manifest says " + std::to_string(man.label_bins));
      const Vec3d total = total_force(labels);
      const double tol = 1e-4 * std::max(1.0, s.total_force.norm());
      if ((total - s.total_force).norm() > tol)
        throw IoError(s.labels + ": label total drifted from the manifest value");
      for (const std::string& aug : s.augmented) {
        const FeatureImage warped = load_features((root / aug).string());
        if (warped.m != man.feature_regions)
          throw IoError(aug + ": feature grid is " + std::to_string(warped.m) +
                        ", manifest says " + std::to_string(man.feature_regions));
      }
      item.pass = true;
    } catch (const std::exception& e) {
      item.pass = false;
      item.message = e.what();
      report.all_pass = false;
    }
    report.items.push_back(std::move(item));
  }
  return report;
}

}  // namespace gelflow
