// Acceptance suite: ten pass/fail checks covering the projection stack, the
// occlusion engine, Monte Carlo visibility calibration, force and flow
// binning, fisheye remapping, extrinsic refinement, and dataset throughput.
// Prints one [PASS]/[FAIL] line per criterion; exit 0 only if all pass.
// argv[1] must point at the command-line binary (driven for criteria 8, 9).
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "gelflow/pipeline.hpp"
#include "gelflow/random.hpp"
#include "gelflow/remap.hpp"
#include "oracles.hpp"

using namespace gelflow;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string fmt_s(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

PinholeCamerad canonical_camera() {
  PinholeCamerad cam;
  cam.focal = default_focal(-30.0);
  cam.center = Vec2d(220.0, 220.0);
  cam.image_size = Vec2d(440.0, 440.0);
  return cam;
}

RigidTransformd canonical_rig() {
  RigidTransformd t;
  t.rotation << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  t.translation = Vec3d(-15.0, 15.0, -30.0);
  return t;
}

struct Scratch {
  fs::path dir;
  Scratch() {
    std::random_device rd;
    dir = fs::temp_directory_path() /
          ("acceptance-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string file(const std::string& name) const { return (dir / name).string(); }
};

int run_cli(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

bool bytes_equal(const std::string& a, const std::string& b) {
  return read_file(a) == read_file(b);
}

// Layer whose sampled particle count comes out exactly `want` (the count
// formula divides by the volume of a midpoint-radius particle).
ParticleLayerSpec layer_with_count(long long want, const Vec3d& extent,
                                   double rmin, double rmax) {
  ParticleLayerSpec layer;
  layer.extent = extent;
  layer.radius_min = rmin;
  layer.radius_max = rmax;
  const double mid = 0.5 * (rmin + rmax);
  const double v1 = 4.0 / 3.0 * M_PI * mid * mid * mid;
  const double volume = extent.x() * extent.y() * extent.z();
  layer.volume_ratio = double(want) * v1 / volume;
  return layer;
}

// --------------------------------------------------------------------------
// 1. projection round-trip, displacement-pair identity, runtime

bool crit1(std::string& detail) {
  const PinholeCamerad cam = canonical_camera();
  std::mt19937_64 rng(101);
  const auto t0 = Clock::now();

  double worst_rt = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const Vec2d px(uniform(rng, 0.0, 440.0), uniform(rng, 0.0, 440.0));
    const double z = uniform(rng, -40.0, -5.0);
    const Vec2d back = pinhole_project(cam, invert_pinhole(cam, px, z));
    worst_rt = std::max(worst_rt, (back - px).cwiseAbs().maxCoeff());
  }

  double worst_pair = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const Vec3d s(uniform(rng, -15.0, 15.0), uniform(rng, -15.0, 15.0),
                  uniform(rng, -40.0, -10.0));
    const Vec3d ds(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5),
                   uniform(rng, -0.5, 0.5));
    const Vec2d pair = pinhole_project_pair(cam, s, ds);
    const double z1 = s.z() + ds.z();
    const Vec2d direct(
        cam.focal * ((s.x() + ds.x()) / z1 - s.x() / s.z()),
        cam.focal * ((s.y() + ds.y()) / z1 - s.y() / s.z()));
    worst_pair = std::max(worst_pair, (pair - direct).cwiseAbs().maxCoeff());
  }

  const double secs = elapsed_s(t0);
  detail = "round-trip " + fmt(worst_rt) + " px, pair identity " +
           fmt(worst_pair) + " px, " + fmt(secs) + " s";
  return worst_rt < 1e-9 && worst_pair < 1e-12 && secs < 1.0;
}

// --------------------------------------------------------------------------
// 2. occluding radius vs. the silhouette-sampling oracle

bool crit2(std::string& detail) {
  const PinholeCamerad cam = canonical_camera();
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3d s(uniform(rng, -18.0, 18.0), uniform(rng, -18.0, 18.0),
                  uniform(rng, -40.0, -12.0));
    const double R = uniform(rng, 0.02, 0.12);
    const double impl = particle_projected_radius(cam, s, R);
    const double ref = oracles::silhouette_radius(cam.focal, cam.center, s, R);
    worst = std::max(worst, std::abs(impl - ref));
  }
  detail = "max |formula - oracle| = " + fmt(worst) + " px over 1000 poses";
  return worst < 1e-6;
}

// --------------------------------------------------------------------------
// 3. hashed occlusion vs. all-pairs brute force

bool crit3(std::string& detail) {
  const PinholeCamerad cam = canonical_camera();
  const RigidTransformd rig = canonical_rig();
  std::mt19937_64 rng(303);
  long long particles_checked = 0;
  for (int c = 0; c < 200; ++c) {
    const long long want = 50 + static_cast<long long>(uniform(rng, 0.0, 450.0));
    ParticleLayerSpec base;
    const ParticleLayerSpec layer =
        layer_with_count(want, base.extent, base.radius_min, base.radius_max);
    const ParticleConfig config =
        sample_particles(layer, derive_seed(9000, static_cast<std::uint64_t>(c)));
    const std::vector<bool> fast = visible_flags(config, cam, rig);

    std::vector<Vec2d> pixels;
    std::vector<double> radii, depths;
    for (const Particle& p : config.particles) {
      const Vec3d s = transform_point(rig, p.center);
      pixels.push_back(pinhole_project(cam, s));
      radii.push_back(particle_projected_radius(cam, s, p.radius));
      depths.push_back(std::abs(s.z()));
    }
    const std::vector<bool> slow =
        oracles::occlusion_all_pairs(pixels, radii, depths);
    if (fast != slow) {
      detail = "mismatch at configuration " + std::to_string(c);
      return false;
    }
    particles_checked += static_cast<long long>(config.particles.size());
  }
  detail = "200 configurations, " + std::to_string(particles_checked) +
           " particles, exact match";
  return true;
}

// --------------------------------------------------------------------------
// 4. Monte Carlo visibility vs. closed-form rank statistics on slab scenes
//
// For N particles dropped i.i.d. uniform over a thin slab, the particle of
// depth rank k is visible iff none of the k-1 closer ones lands its occluding
// circle on its center: probability q^(k-1) with q = 1 - pi r^2 / A, where A
// is the slab's pixel footprint. Averaged over ranks that is
// (1 - q^N) / (N (1 - q)), exact in the interior (no footprint-edge
// truncation). A second slab behind the first is additionally screened by all
// N_A closer particles at the same image point: factor q_A^(N_A), with the
// screening radius taken for a near-slab particle on the far point's ray.
// Monte Carlo aggregation uses per-configuration interior ratios, which are
// free of the small-count conditioning bias that per-bin ratios carry; the
// grid-estimator check therefore runs on coarse bins (~120 particles each).

double rank_mixture(double q, long long n) {
  return (1.0 - std::pow(q, static_cast<double>(n))) /
         (static_cast<double>(n) * (1.0 - q));
}

bool crit4(std::string& detail) {
  const PinholeCamerad cam = canonical_camera();
  const RigidTransformd rig = canonical_rig();
  const double R = 0.0825;
  const double thick = 0.01;
  const long long n_a = 3000, n_b = 3000;
  const int n_configs = 100;
  const double z_b_lo = 4.5 - thick;  // far slab sits at the contact surface
  const double zp_a = -(30.0 + thick / 2.0);
  const double zp_b = -(30.0 + z_b_lo + thick / 2.0);
  const double area_a = std::pow(std::abs(cam.focal) * 30.0 / -zp_a, 2);
  const double area_b = std::pow(std::abs(cam.focal) * 30.0 / -zp_b, 2);

  const ParticleLayerSpec slab =
      layer_with_count(n_a, Vec3d(30.0, 30.0, thick), R, R);

  const auto p_near = [&](double gx, double gy) {
    const Vec3d sa = transform_point(rig, Vec3d(gx, gy, thick / 2.0));
    const double r = particle_projected_radius(cam, sa, R);
    return rank_mixture(1.0 - M_PI * r * r / area_a, n_a);
  };
  const auto p_far = [&](double gx, double gy) {
    const Vec3d sb = transform_point(rig, Vec3d(gx, gy, z_b_lo + thick / 2.0));
    const Vec2d px = pinhole_project(cam, sb);
    const double r_b = particle_projected_radius(cam, sb, R);
    const double r_a =
        particle_projected_radius(cam, invert_pinhole(cam, px, zp_a), R);
    const double q_screen = 1.0 - M_PI * r_a * r_a / area_a;
    const double q_b = 1.0 - M_PI * r_b * r_b / area_b;
    return std::pow(q_screen, double(n_a)) * rank_mixture(q_b, n_b);
  };

  // analytics integrated over the gel interior [2,28]^2, 0.5 mm cells
  double an_a = 0.0, an_b = 0.0;
  int cells = 0;
  for (int iy = 0; iy < 52; ++iy) {
    for (int ix = 0; ix < 52; ++ix) {
      an_a += p_near(2.25 + 0.5 * ix, 2.25 + 0.5 * iy);
      an_b += p_far(2.25 + 0.5 * ix, 2.25 + 0.5 * iy);
      ++cells;
    }
  }
  an_a /= cells;
  an_b /= cells;

  // two-slab scene, per-config interior visibility ratios
  std::vector<double> ratio_a, ratio_b;
  for (int c = 0; c < n_configs; ++c) {
    ParticleConfig combined = sample_particles(
        slab, derive_seed(4001, static_cast<std::uint64_t>(2 * c)));
    ParticleConfig far = sample_particles(
        slab, derive_seed(4001, static_cast<std::uint64_t>(2 * c + 1)));
    for (Particle& p : far.particles) {
      p.center.z() += z_b_lo;
      combined.particles.push_back(p);
    }
    const std::vector<bool> vis = visible_flags(combined, cam, rig);

    long long tot[2] = {0, 0}, seen[2] = {0, 0};
    for (std::size_t i = 0; i < combined.particles.size(); ++i) {
      const Point3d& p = combined.particles[i].center;
      if (p.x() < 2.0 || p.x() > 28.0 || p.y() < 2.0 || p.y() > 28.0) continue;
      const int s = p.z() > 2.25 ? 1 : 0;
      ++tot[s];
      if (vis[i]) ++seen[s];
    }
    ratio_a.push_back(double(seen[0]) / double(tot[0]));
    ratio_b.push_back(double(seen[1]) / double(tot[1]));
  }

  const auto mean_se = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= double(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= double(xs.size() - 1);
    return std::pair<double, double>(mean, std::sqrt(var / double(xs.size())));
  };
  const auto [mc_a, se_a] = mean_se(ratio_a);
  const auto [mc_b, se_b] = mean_se(ratio_b);
  const bool near_ok = std::abs(mc_a - an_a) <= 3.0 * se_a;
  const bool far_ok = std::abs(mc_b - an_b) <= 3.0 * se_b;

  // the library's own estimator on a single slab, coarse 5x5 bins
  VisibilityOptions opts;
  opts.n_configs = n_configs;
  opts.bin_dims = Vec3i(5, 5, 1);
  opts.seed = 777;
  opts.jobs = 1;
  const VisibilityGrid grid = estimate_visibility_grid(slab, cam, rig, opts);
  double api_mean = 0.0, api_an = 0.0;
  for (int by = 1; by <= 3; ++by) {
    for (int bx = 1; bx <= 3; ++bx) {
      api_mean += grid.at(bx, by, 0);
      double s = 0.0;
      for (int iy = 0; iy < 12; ++iy)
        for (int ix = 0; ix < 12; ++ix)
          s += p_near(6.0 * bx + 0.25 + 0.5 * ix, 6.0 * by + 0.25 + 0.5 * iy);
      api_an += s / 144.0;
    }
  }
  api_mean /= 9.0;
  api_an /= 9.0;
  // binomial aggregate SE over (interior count) x (configurations)
  const double n_eff =
      double(n_configs) * double(n_a) * (18.0 * 18.0) / 900.0;
  const double api_se = std::sqrt(api_an * (1.0 - api_an) / n_eff);
  const bool api_ok = std::abs(api_mean - api_an) <= 3.0 * api_se;

  detail = "near slab " + fmt(mc_a) + " vs " + fmt(an_a) + " (3se " +
           fmt(3.0 * se_a) + "), far slab " + fmt(mc_b) + " vs " + fmt(an_b) +
           " (3se " + fmt(3.0 * se_b) + "), estimator " + fmt(api_mean) +
           " vs " + fmt(api_an) + " (3se " + fmt(3.0 * api_se) + ")";
  return near_ok && far_ok && api_ok;
}

// --------------------------------------------------------------------------
// 5. force conservation and 2x2 pooling consistency

bool crit5(std::string& detail) {
  std::mt19937_64 rng(505);
  std::vector<ForceNode> nodes(500);
  Vec3d direct = Vec3d::Zero();
  for (ForceNode& n : nodes) {
    n.position = Point3d(uniform(rng, 0.0, 30.0), uniform(rng, 0.0, 30.0), 4.5);
    n.force = Vec3d(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0),
                    uniform(rng, -2.0, 0.0));
    direct += n.force;
  }
  const Vec2d extent(30.0, 30.0);

  double worst_rel = 0.0;
  for (int n : {1, 5, 20}) {
    const Vec3d total = total_force(bin_forces(nodes, n, extent));
    worst_rel =
        std::max(worst_rel, (total - direct).norm() / direct.norm());
  }

  const ForceDistribution d20 = bin_forces(nodes, 20, extent);
  const ForceDistribution d40 = bin_forces(nodes, 40, extent);
  double worst_pool = 0.0;
  for (int iy = 0; iy < 20; ++iy) {
    for (int ix = 0; ix < 20; ++ix) {
      Vec3d pooled = Vec3d::Zero();
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx)
          pooled += d40.at(2 * ix + sx, 2 * iy + sy);
      worst_pool = std::max(
          worst_pool, (pooled - d20.at(ix, iy)).cwiseAbs().maxCoeff());
    }
  }

  detail = "conservation rel err " + fmt(worst_rel) + ", pooling gap " +
           fmt(worst_pool) + " N";
  return worst_rel < 1e-9 && worst_pool < 1e-9;
}

// --------------------------------------------------------------------------
// 6. feature binning hand cases and weight-scale invariance

bool crit6(std::string& detail) {
  const Vec2d image_size(440.0, 440.0);

  std::vector<FlowSample> hand;
  hand.push_back({Vec2d(50.0, 60.0), Vec2d(2.0, 0.0), 0.25});
  hand.push_back({Vec2d(100.0, 90.0), Vec2d(-2.0, 4.0), 0.75});   // region 0,0
  hand.push_back({Vec2d(300.0, 310.0), Vec2d(7.0, -3.0), 5.0});   // region 1,1
  const FeatureImage img = bin_displacements(hand, 2, image_size);
  const bool hand_ok =
      img.u(0, 0) == 0.25 * 2.0 + 0.75 * -2.0 && img.v(0, 0) == 0.75 * 4.0 &&
      img.u(1, 1) == 7.0 && img.v(1, 1) == -3.0 && img.u(1, 0) == 0.0 &&
      img.v(1, 0) == 0.0 && img.u(0, 1) == 0.0 && img.v(0, 1) == 0.0;

  std::mt19937_64 rng(606);
  std::vector<FlowSample> samples(200);
  for (FlowSample& s : samples) {
    s.pixel = Vec2d(uniform(rng, 0.0, 440.0), uniform(rng, 0.0, 440.0));
    s.delta = Vec2d(uniform(rng, -5.0, 5.0), uniform(rng, -5.0, 5.0));
    s.weight = uniform(rng, 0.1, 2.0);
  }
  const FeatureImage base = bin_displacements(samples, 8, image_size);
  double worst = 0.0;
  for (double c : {1e-3, 1.0, 1e3}) {
    std::vector<FlowSample> scaled = samples;
    for (FlowSample& s : scaled) s.weight *= c;
    const FeatureImage out = bin_displacements(scaled, 8, image_size);
    for (std::size_t i = 0; i < base.du.size(); ++i) {
      worst = std::max(worst, std::abs(out.du[i] - base.du[i]));
      worst = std::max(worst, std::abs(out.dv[i] - base.dv[i]));
    }
  }

  detail = std::string("hand cases ") + (hand_ok ? "exact" : "WRONG") +
           ", scale drift " + fmt(worst);
  return hand_ok && worst < 1e-12;
}

// --------------------------------------------------------------------------
// 7. degenerate fisheye produces an identity remap

bool crit7(std::string& detail) {
  const PinholeCamerad cam = canonical_camera();
  const RigidTransformd rig = canonical_rig();
  FisheyeModel model;
  model.tan_coeff = std::abs(cam.focal);
  model.center = cam.center;
  model.image_size = cam.image_size;
  model.theta_max = 0.9;

  const RemapTable table = build_remap_table(model, rig, cam, rig);
  double worst = 0.0;
  bool all_mapped = true;
  for (int y = 0; y < table.height; ++y) {
    for (int x = 0; x < table.width; ++x) {
      if (!table.mapped(x, y)) {
        all_mapped = false;
        continue;
      }
      const Vec2d src = table.src[table.index(x, y)];
      worst = std::max(worst,
                       (src - Vec2d(double(x), double(y))).cwiseAbs().maxCoeff());
    }
  }

  GrayImage img;
  img.width = 440;
  img.height = 440;
  img.pixels.resize(440 * 440);
  std::mt19937_64 rng(707);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  const GrayImage back = remap_image(table, img);
  int worst_level = 0;
  for (int y = 1; y < 439; ++y)
    for (int x = 1; x < 439; ++x)
      worst_level = std::max(
          worst_level, std::abs(int(back.at(x, y)) - int(img.at(x, y))));

  detail = std::string(all_mapped ? "all pixels mapped" : "UNMAPPED PIXELS") +
           ", table error " + fmt(worst) + " px, round-trip " +
           std::to_string(worst_level) + " levels";
  return all_mapped && worst < 1e-6 && worst_level <= 1;
}

// --------------------------------------------------------------------------
// 8. refine-extrinsics recovers injected 0.7 mm offsets

bool crit8(std::string& detail, const std::string& cli, const Scratch& scratch) {
  PipelineConfig cfg;
  cfg.refine.radius_mm = 1.0;  // must exceed the injected 0.7 mm offset
  const std::string cfg_path = scratch.file("refine_config.json");
  write_file(cfg_path, effective_config(cfg).dump(2));

  // the displacement grid is extrinsic-independent: compute once
  const GridField grid =
      resample_to_grid(record_field(cfg.refine.record, cfg), cfg);
  const VisibilityGrid vis = resolve_visibility(cfg);

  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3d offset = Vec3d::Zero();
    offset[axis] = 0.7;
    RigidTransformd true_rig = cfg.gel_to_pinhole;
    true_rig.translation += offset;
    const FeatureImage real = synth_optical_flow(
        grid, cfg.camera, true_rig, vis, cfg.feature_regions);
    const std::string feat_path =
        scratch.file("real_axis" + std::to_string(axis) + ".f32");
    save_features(feat_path, real);

    const std::string out_path =
        scratch.file("refined_axis" + std::to_string(axis) + ".json");
    const std::string cmd = cli + " --config " + cfg_path +
                            " --jobs 4 refine-extrinsics --features " +
                            feat_path + " --out " + out_path;
    if (run_cli(cmd) != 0) {
      detail = "refine-extrinsics exited nonzero on axis " +
               std::to_string(axis);
      return false;
    }
    const Json out = load_json_file(out_path);
    const Vec3d got = vec3_from_json(out.at("translation_mm"), "translation_mm");
    worst = std::max(worst,
                     (got - true_rig.translation).cwiseAbs().maxCoeff());
  }
  const double secs = elapsed_s(t0);

  detail = "worst recovery error " + fmt(worst) + " mm across 3 axes, " +
           fmt_s(secs) + " s";
  return worst <= 0.05 + 1e-9 && secs < 60.0;
}

// --------------------------------------------------------------------------
// 9. gen-dataset throughput and jobs-independence

bool crit9(std::string& detail, const std::string& cli, const Scratch& scratch) {
  std::string csv = "id,x_mm,y_mm,depth_mm\n";
  std::mt19937_64 rng(909);
  std::vector<std::string> ids;
  for (int i = 0; i < 1000; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "r%04d", i);
    ids.push_back(id);
    csv += std::string(id) + "," + format_double(uniform(rng, 2.0, 28.0)) +
           "," + format_double(uniform(rng, 2.0, 28.0)) + "," +
           format_double(uniform(rng, 0.1, 0.9)) + "\n";
  }
  const std::string records = scratch.file("records.csv");
  write_file(records, csv);
  const std::string cfg_path = scratch.file("dataset_config.json");
  write_file(cfg_path, effective_config(PipelineConfig()).dump(2));

  const std::string dir8 = scratch.file("ds_jobs8");
  const std::string dir1 = scratch.file("ds_jobs1");

  const auto t0 = Clock::now();
  if (run_cli(cli + " --config " + cfg_path + " --jobs 8 gen-dataset --records " +
              records + " --out " + dir8 + " > /dev/null") != 0) {
    detail = "gen-dataset --jobs 8 failed";
    return false;
  }
  const double secs = elapsed_s(t0);

  if (run_cli(cli + " --config " + cfg_path + " --jobs 1 gen-dataset --records " +
              records + " --out " + dir1 + " > /dev/null") != 0) {
    detail = "gen-dataset --jobs 1 failed";
    return false;
  }

  bool identical =
      bytes_equal(dir8 + "/manifest.json", dir1 + "/manifest.json") &&
      bytes_equal(dir8 + "/effective_config.json",
                  dir1 + "/effective_config.json");
  for (const std::string& id : ids) {
    if (!identical) break;
    for (const char* suffix :
         {".features.f32", ".features.json", ".labels.f32", ".labels.json"}) {
      const std::string rel = "/samples/" + id + suffix;
      if (!bytes_equal(dir8 + rel, dir1 + rel)) {
        identical = false;
        break;
      }
    }
  }

  detail = "1000 records in " + fmt_s(secs) + " s (--jobs 8), outputs " +
           (identical ? "byte-identical across --jobs 1/8" : "DIFFER");
  return secs < 600.0 && identical;
}

// --------------------------------------------------------------------------
// 10. remap throughput, single-threaded

bool crit10(std::string& detail) {
  const PinholeCamerad cam = canonical_camera();
  const RigidTransformd rig = canonical_rig();
  FisheyeModel model;
  model.tan_coeff = std::abs(cam.focal);
  model.center = cam.center;
  model.image_size = cam.image_size;
  model.theta_max = 0.9;
  const RemapTable table = build_remap_table(model, rig, cam, rig);

  GrayImage img;
  img.width = 440;
  img.height = 440;
  img.pixels.resize(440 * 440);
  std::mt19937_64 rng(1010);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);

  const int frames = 100;
  std::uint64_t sink = 0;
  const auto t0 = Clock::now();
  for (int i = 0; i < frames; ++i) {
    const GrayImage out = remap_image(table, img);
    sink += out.pixels[(i * 7919) % out.pixels.size()];
  }
  const double secs = elapsed_s(t0);
  const double fps = frames / secs;

  detail = fmt_s(fps) + " frames/s over " + std::to_string(frames) +
           " frames (checksum " + std::to_string(sink % 997) + ")";
  return fps >= 50.0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-cli-binary>\n";
    return 2;
  }
  const std::string cli = argv[1];
  Scratch scratch;

  bool all = true;
  const auto report = [&](int id, const char* name, bool pass,
                          const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": "
              << detail << "\n"
              << std::flush;
    all = all && pass;
  };
  const auto guard = [&](int id, const char* name, auto&& fn) {
    std::string detail;
    bool pass = false;
    try {
      pass = fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    report(id, name, pass, detail);
  };

  guard(1, "projection suite", [](std::string& d) { return crit1(d); });
  guard(2, "occluding radius", [](std::string& d) { return crit2(d); });
  guard(3, "occlusion vs all-pairs", [](std::string& d) { return crit3(d); });
  guard(4, "Monte Carlo visibility", [](std::string& d) { return crit4(d); });
  guard(5, "force conservation", [](std::string& d) { return crit5(d); });
  guard(6, "feature binning", [](std::string& d) { return crit6(d); });
  guard(7, "remap identity", [](std::string& d) { return crit7(d); });
  guard(8, "refinement recovery",
        [&](std::string& d) { return crit8(d, cli, scratch); });
  guard(9, "dataset throughput",
        [&](std::string& d) { return crit9(d, cli, scratch); });
  guard(10, "remap throughput", [](std::string& d) { return crit10(d); });

  std::cout << (all ? "ACCEPTANCE: all 10 criteria passed"
                    : "ACCEPTANCE: FAILURES PRESENT")
            << "\n";
  return all ? 0 : 1;
}
