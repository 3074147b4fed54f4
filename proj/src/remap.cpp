#include "gelflow/remap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gelflow/io.hpp"
#include "gelflow/parallel.hpp"

namespace gelflow {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

int raster_dim(double v, const char* what) {
  const long long n = std::llround(v);
  if (n < 1 || std::abs(v - static_cast<double>(n)) > 1e-9)
    throw std::invalid_argument(std::string(what) +
                                " must be a positive integer pixel count");
  return static_cast<int>(n);
}

void check_finite_features(const FeatureImage& img, const char* what) {
  for (double v : img.du)
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(what) + ": non-finite entry");
  for (double v : img.dv)
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

RigidTransformd rigid_from_json(const Json& j) {
  RigidTransformd t;
  t.rotation = mat_row_major_from_json(j.at("rotation"), "rotation");
  t.translation = vec3_from_json(j.at("translation_mm"), "translation_mm");
  validate_rigid(t);
  return t;
}

void rigid_to_json(Json& j, const RigidTransformd& t) {
  j["rotation"] = json_mat_row_major(t.rotation);
  j["translation_mm"] = json_vec(t.translation);
}

}  // namespace

double fisheye_rho(const FisheyeModel& model, double theta) {
  const auto& b = model.poly;
  const double poly =
      theta * (b[0] + theta * (b[1] + theta * (b[2] + theta * b[3])));
  return model.tan_coeff == 0.0 ? poly
                                : poly + model.tan_coeff * std::tan(theta);
}

void validate(const FisheyeModel& model) {
  if (!(model.image_size.x() > 0.0) || !(model.image_size.y() > 0.0))
    throw std::invalid_argument("fisheye image size must be positive");
  if (std::abs(model.affine.determinant()) < 1e-12)
    throw std::invalid_argument("fisheye affine matrix is singular");
  if (!(model.theta_max > 0.0))
    throw std::invalid_argument("fisheye theta_max must be positive");
  if (model.theta_max > 1.5707963267948966 ||
      (model.tan_coeff != 0.0 && model.theta_max >= 1.5707963267948966))
    throw std::invalid_argument("fisheye theta_max must stay below pi/2");

  const int n = 512;
  double prev = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double rho = fisheye_rho(model, model.theta_max * i / n);
    if (!(rho > prev))
      throw std::invalid_argument(
          "fisheye radial polynomial is not strictly increasing on "
          "(0, theta_max]");
    prev = rho;
  }
}

Vec2d world2cam(const FisheyeModel& model, const Vec3d& s_c) {
  if (!(s_c.z() < 0.0))
    throw ProjectionError("point is not in front of the real camera");
  const double xt = std::hypot(s_c.x(), s_c.y());
  const double theta = std::atan2(xt, -s_c.z());
  if (theta > model.theta_max)
    throw ProjectionError("incidence angle exceeds the model's theta_max");
  if (xt == 0.0) return model.center;
  const double rho = fisheye_rho(model, theta);
  const Vec2d radial(rho * s_c.x() / xt, rho * s_c.y() / xt);
  return model.center + model.affine * radial;
}

FisheyeCalibration load_fisheye(const std::string& path) {
  const Json j = load_json_file(path);
  FisheyeCalibration calib;
  const auto& poly = j.at("poly");
  if (!poly.is_array() || poly.empty() || poly.size() > 4)
    throw IoError(path + ": 'poly' must hold 1 to 4 coefficients");
  for (std::size_t k = 0; k < poly.size(); ++k)
    calib.model.poly[k] = poly[k].get<double>();
  calib.model.tan_coeff = j.value("tan_coeff", 0.0);
  const auto& affine = j.at("affine");
  if (!affine.is_array() || affine.size() != 4)
    throw IoError(path + ": 'affine' must hold 4 entries, row-major");
  calib.model.affine << affine[0].get<double>(), affine[1].get<double>(),
      affine[2].get<double>(), affine[3].get<double>();
  calib.model.center = vec2_from_json(j.at("center_px"), "center_px");
  calib.model.image_size = vec2_from_json(j.at("image_size_px"), "image_size_px");
  calib.model.theta_max = j.value("theta_max_rad", 1.2);
  calib.gel_to_cam = rigid_from_json(j);
  validate(calib.model);
  return calib;
}

void save_fisheye(const std::string& path, const FisheyeCalibration& calib) {
  Json j;
  j["poly"] = {calib.model.poly[0], calib.model.poly[1], calib.model.poly[2],
               calib.model.poly[3]};
  j["tan_coeff"] = calib.model.tan_coeff;
  j["affine"] = {calib.model.affine(0, 0), calib.model.affine(0, 1),
                 calib.model.affine(1, 0), calib.model.affine(1, 1)};
  j["center_px"] = json_vec(calib.model.center);
  j["image_size_px"] = json_vec(calib.model.image_size);
  j["theta_max_rad"] = calib.model.theta_max;
  rigid_to_json(j, calib.gel_to_cam);
  write_file(path, j.dump(2) + "\n");
}

PinholeRig load_pinhole(const std::string& path) {
  const Json j = load_json_file(path);
  PinholeRig rig;
  rig.camera.focal = j.at("focal_px").get<double>();
  rig.camera.center = vec2_from_json(j.at("center_px"), "center_px");
  rig.camera.image_size = vec2_from_json(j.at("image_size_px"), "image_size_px");
  rig.gel_to_pinhole = rigid_from_json(j);
  validate_camera(rig.camera);
  return rig;
}

void save_pinhole(const std::string& path, const PinholeRig& rig) {
  Json j;
  j["focal_px"] = rig.camera.focal;
  j["center_px"] = json_vec(rig.camera.center);
  j["image_size_px"] = json_vec(rig.camera.image_size);
  rigid_to_json(j, rig.gel_to_pinhole);
  write_file(path, j.dump(2) + "\n");
}

RemapTable build_remap_table(const FisheyeModel& model,
                             const RigidTransformd& gel_to_cam,
                             const PinholeCamerad& pinhole,
                             const RigidTransformd& gel_to_pinhole,
                             std::optional<double> z_plane, int jobs) {
  validate(model);
  validate_camera(pinhole);
  const double plane = z_plane.value_or(gel_to_pinhole.translation.z());
  if (plane == 0.0 || plane * pinhole.focal < 0.0)
    throw std::invalid_argument("reference plane must be in front of the camera");

  RemapTable table;
  table.width = raster_dim(pinhole.image_size.x(), "pinhole width");
  table.height = raster_dim(pinhole.image_size.y(), "pinhole height");
  table.src_width = raster_dim(model.image_size.x(), "fisheye width");
  table.src_height = raster_dim(model.image_size.y(), "fisheye height");
  table.src.assign(static_cast<std::size_t>(table.width) * table.height,
                   Vec2d(kNan, kNan));

  const RigidTransformd pin_to_cam = gel_to_cam * gel_to_pinhole.inverse();
  parallel_for(static_cast<std::size_t>(table.height), jobs, [&](std::size_t y) {
    for (int x = 0; x < table.width; ++x) {
      const Vec3d s_p = invert_pinhole(
          pinhole, Vec2d(static_cast<double>(x), static_cast<double>(y)), plane);
      const Vec3d s_c = transform_point(pin_to_cam, s_p);
      Vec2d src;
      try {
        src = world2cam(model, s_c);
      } catch (const ProjectionError&) {
        continue;
      }
      // Rounding guard: a source a hair past the raster edge still counts,
      // clamped, so boundary pixels of an exact-identity table stay mapped.
      constexpr double kEdgeTol = 1e-6;
      if (!(src.x() >= -kEdgeTol && src.x() <= table.src_width - 1 + kEdgeTol &&
            src.y() >= -kEdgeTol && src.y() <= table.src_height - 1 + kEdgeTol))
        continue;
      src.x() = std::clamp(src.x(), 0.0, double(table.src_width - 1));
      src.y() = std::clamp(src.y(), 0.0, double(table.src_height - 1));
      table.src[table.index(x, static_cast<int>(y))] = src;
    }
  });
  return table;
}

void save_remap_table(const std::string& path, const RemapTable& table) {
  Json header;
  header["width"] = table.width;
  header["height"] = table.height;
  header["src_width"] = table.src_width;
  header["src_height"] = table.src_height;
  std::string out = header.dump() + "\n";
  for (const auto& s : table.src) {
    append_f32_le(out, static_cast<float>(s.x()));
    append_f32_le(out, static_cast<float>(s.y()));
  }
  write_file(path, out);
}

RemapTable load_remap_table(const std::string& path) {
  const std::string bytes = read_file(path);
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos)
    throw IoError(path + ": missing header line");
  Json header;
  try {
    header = Json::parse(bytes.substr(0, nl));
  } catch (const Json::parse_error& e) {
    throw IoError(path + ": bad header: " + e.what());
  }

  RemapTable table;
  table.width = header.at("width").get<int>();
  table.height = header.at("height").get<int>();
  table.src_width = header.at("src_width").get<int>();
  table.src_height = header.at("src_height").get<int>();
  if (table.width < 1 || table.height < 1 || table.src_width < 1 ||
      table.src_height < 1)
    throw IoError(path + ": non-positive dimension in header");

  const std::size_t cells =
      static_cast<std::size_t>(table.width) * table.height;
  if (bytes.size() - nl - 1 != cells * 8)
    throw IoError(path + ": payload size does not match header dimensions");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + nl + 1;
  table.src.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    const double sx = read_f32_le(p + i * 8);
    const double sy = read_f32_le(p + i * 8 + 4);
    if (std::isnan(sx) != std::isnan(sy))
      throw IoError(path + ": half-unmapped table entry");
    if (!std::isnan(sx) &&
        (sx < 0.0 || sx > table.src_width - 1 || sy < 0.0 ||
         sy > table.src_height - 1))
      throw IoError(path + ": mapped source outside the fisheye image bounds");
    table.src[i] = Vec2d(sx, sy);
  }
  return table;
}

GrayImage load_pgm(const std::string& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  const auto token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() &&
           !std::isspace(static_cast<unsigned char>(bytes[pos])))
      ++pos;
    if (start == pos) throw IoError(path + ": truncated PGM header");
    return bytes.substr(start, pos - start);
  };

  if (token() != "P5") throw IoError(path + ": not a binary PGM (P5) file");
  GrayImage img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    const int maxval = std::stoi(token());
    if (maxval != 255)
      throw IoError(path + ": only 8-bit PGM (maxval 255) is supported");
  } catch (const std::logic_error&) {
    throw IoError(path + ": malformed PGM header");
  }
  if (img.width < 1 || img.height < 1)
    throw IoError(path + ": PGM dimensions must be positive");
  ++pos;  // single whitespace after maxval
  const std::size_t count =
      static_cast<std::size_t>(img.width) * img.height;
  if (bytes.size() - pos != count)
    throw IoError(path + ": PGM payload size mismatch");
  img.pixels.assign(bytes.begin() + pos, bytes.end());
  return img;
}

void save_pgm(const std::string& path, const GrayImage& image) {
  if (image.width < 1 || image.height < 1)
    throw std::invalid_argument("image dimensions must be positive");
  if (image.pixels.size() !=
      static_cast<std::size_t>(image.width) * image.height)
    throw std::invalid_argument("image pixel count does not match dimensions");
  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()),
             image.pixels.size());
  write_file(path, out);
}

GrayImage remap_image(const RemapTable& table, const GrayImage& src,
                      bool nearest) {
  if (src.width != table.src_width || src.height != table.src_height)
    throw std::invalid_argument(
        "source image dimensions do not match the remap table");

  GrayImage out;
  out.width = table.width;
  out.height = table.height;
  out.pixels.assign(static_cast<std::size_t>(out.width) * out.height, 0);

  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const Vec2d s = table.src[table.index(x, y)];
      if (std::isnan(s.x())) continue;
      std::uint8_t value;
      if (nearest) {
        const int sx = std::clamp(static_cast<int>(std::lround(s.x())), 0,
                                  src.width - 1);
        const int sy = std::clamp(static_cast<int>(std::lround(s.y())), 0,
                                  src.height - 1);
        value = src.at(sx, sy);
      } else {
        const int x0 = std::min(static_cast<int>(s.x()), src.width - 1);
        const int y0 = std::min(static_cast<int>(s.y()), src.height - 1);
        const int x1 = std::min(x0 + 1, src.width - 1);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double fx = s.x() - x0;
        const double fy = s.y() - y0;
        const double v =
            (1.0 - fy) * ((1.0 - fx) * src.at(x0, y0) + fx * src.at(x1, y0)) +
            fy * ((1.0 - fx) * src.at(x0, y1) + fx * src.at(x1, y1));
        value = static_cast<std::uint8_t>(
            std::clamp<long>(std::lround(v), 0, 255));
      }
      out.pixels[out.width * static_cast<std::size_t>(y) + x] = value;
    }
  }
  return out;
}

double feature_mse(const FeatureImage& a, const FeatureImage& b) {
  if (a.m != b.m)
    throw std::invalid_argument("feature images differ in region count");
  const std::size_t cells = a.du.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    const double du = a.du[i] - b.du[i];
    const double dv = a.dv[i] - b.dv[i];
    sum += du * du + dv * dv;
  }
  return sum / (2.0 * cells);
}

Vec3d refine_translation(
    const std::function<FeatureImage(const Vec3d&)>& make_features,
    const FeatureImage& real_features, const RefineParams& params) {
  if (!(params.step > 0.0))
    throw std::invalid_argument("refinement step must be positive");
  if (params.radius < params.step)
    throw std::invalid_argument("refinement radius must cover at least one step");
  check_finite_features(real_features, "real features");

  const int half = static_cast<int>(params.radius / params.step + 1e-9);
  const int side = 2 * half + 1;
  const std::size_t count =
      static_cast<std::size_t>(side) * side * side;

  const auto candidate = [&](std::size_t i) {
    const int kx = static_cast<int>(i % side) - half;
    const int ky = static_cast<int>((i / side) % side) - half;
    const int kz = static_cast<int>(i / (static_cast<std::size_t>(side) * side)) - half;
    return Vec3d(params.t_init.x() + params.step * kx,
                 params.t_init.y() + params.step * ky,
                 params.t_init.z() + params.step * kz);
  };

  std::vector<double> mse(count);
  parallel_for(count, params.jobs, [&](std::size_t i) {
    const FeatureImage synth = make_features(candidate(i));
    check_finite_features(synth, "candidate features");
    mse[i] = feature_mse(synth, real_features);
  });

  std::size_t best = 0;
  double best_dist = (candidate(0) - params.t_init).squaredNorm();
  for (std::size_t i = 1; i < count; ++i) {
    const double dist = (candidate(i) - params.t_init).squaredNorm();
    const Vec3d t = candidate(i);
    const Vec3d tb = candidate(best);
    const bool better =
        mse[i] < mse[best] ||
        (mse[i] == mse[best] &&
         (dist < best_dist ||
          (dist == best_dist &&
           (t.x() < tb.x() ||
            (t.x() == tb.x() &&
             (t.y() < tb.y() || (t.y() == tb.y() && t.z() < tb.z())))))));
    if (better) {
      best = i;
      best_dist = dist;
    }
  }
  return candidate(best);
}

}  // namespace gelflow
