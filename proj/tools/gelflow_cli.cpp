// Command-line front end: dataset generation, feature extraction, remapping,
// and extrinsic refinement over the library modules.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gelflow/pipeline.hpp"
#include "gelflow/remap.hpp"

using namespace gelflow;

namespace {

// Features of the configured reference indentation under a candidate
// extrinsic translation. The displacement grid depends only on the record,
// so it is resampled once and shared across all candidates.
struct RefineDriver {
  const PipelineConfig& cfg;
  VisibilityGrid vis;
  GridField grid;

  explicit RefineDriver(const PipelineConfig& config)
      : cfg(config), vis(resolve_visibility(config)) {
    validate_record(cfg.refine.record, cfg.layer);
    grid = resample_to_grid(record_field(cfg.refine.record, cfg), cfg);
  }

  FeatureImage at(const Vec3d& t) const {
    RigidTransformd rig = cfg.gel_to_pinhole;
    rig.translation = t;
    return synth_optical_flow(grid, cfg.camera, rig, vis, cfg.feature_regions);
  }
};

struct RefineOutcome {
  Vec3d t;
  double mse;
};

RefineOutcome run_refine(const PipelineConfig& cfg, const FeatureImage& real,
                         int jobs, bool verbose) {
  const RefineDriver driver(cfg);
  const auto make = [&](const Vec3d& t) { return driver.at(t); };

  RefineParams params;
  params.t_init = cfg.gel_to_pinhole.translation;
  params.radius = cfg.refine.radius_mm;
  params.step = cfg.refine.step_mm;
  params.jobs = jobs;

  const double coarse = cfg.refine.coarse_step_mm;
  if (coarse > params.step && params.radius >= coarse) {
    RefineParams first = params;
    first.step = coarse;
    const Vec3d rough = refine_translation(make, real, first);
    if (verbose)
      std::cerr << "coarse pass: " << rough.x() << " " << rough.y() << " "
                << rough.z() << "\n";
    params.t_init = rough;
    params.radius = coarse;  // fine pass covers the full coarse cell
  }
  const Vec3d t = refine_translation(make, real, params);
  return RefineOutcome{t, feature_mse(driver.at(t), real)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic tactile sensing dataset toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool verbose = false;
  app.add_option("--config", config_path,
                 "pipeline config JSON (defaults apply when omitted)");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "master seed, overrides the config");
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 1024));
  app.add_flag("--verbose,-v", verbose, "progress chatter on stderr");

  auto* sc_vis =
      app.add_subcommand("gen-visibility", "estimate the particle visibility grid");
  std::string vis_out;
  sc_vis->add_option("--out", vis_out, "output grid file")->required();

  auto* sc_ds = app.add_subcommand("gen-dataset",
                                   "generate a dataset from indentation records");
  std::string ds_records, ds_out;
  int ds_aug = 0;
  sc_ds->add_option("--records", ds_records, "records .csv or .json")->required();
  sc_ds->add_option("--out", ds_out, "dataset directory")->required();
  sc_ds->add_option("--augment-copies", ds_aug,
                    "baked deformed feature copies per sample")
      ->check(CLI::NonNegativeNumber);

  auto* sc_ef = app.add_subcommand("extract-features",
                                   "displacement field CSV -> feature file");
  std::string ef_field, ef_out;
  sc_ef->add_option("--field", ef_field, "displacement CSV")->required();
  sc_ef->add_option("--out", ef_out, "feature file")->required();

  auto* sc_bf =
      app.add_subcommand("bin-forces", "nodal force CSV -> label file");
  std::string bf_nodes, bf_out;
  sc_bf->add_option("--nodes", bf_nodes, "nodal force CSV")->required();
  sc_bf->add_option("--out", bf_out, "label file")->required();

  auto* sc_br = app.add_subcommand("build-remap",
                                   "fisheye calibration -> pixel remap table");
  std::string br_fisheye, br_pinhole, br_out;
  double br_zplane = 0.0;
  sc_br->add_option("--fisheye", br_fisheye, "fisheye calibration JSON")
      ->required();
  sc_br->add_option("--pinhole", br_pinhole,
                    "reference rig JSON (config camera when omitted)");
  CLI::Option* zp_opt = sc_br->add_option(
      "--z-plane", br_zplane, "gel-frame plane the table back-projects onto");
  sc_br->add_option("--out", br_out, "table file")->required();

  auto* sc_rm =
      app.add_subcommand("remap", "apply a remap table to a PGM image");
  std::string rm_table, rm_in, rm_out;
  bool rm_nearest = false;
  sc_rm->add_option("--table", rm_table, "remap table file")->required();
  sc_rm->add_option("--in", rm_in, "source PGM")->required();
  sc_rm->add_option("--out", rm_out, "destination PGM")->required();
  sc_rm->add_flag("--nearest", rm_nearest, "nearest-neighbor sampling");

  auto* sc_rx = app.add_subcommand(
      "refine-extrinsics",
      "recover the gel-to-camera translation from an observed feature image");
  std::string rx_features, rx_out;
  sc_rx->add_option("--features", rx_features, "observed feature file")
      ->required();
  sc_rx->add_option("--out", rx_out, "result JSON (stdout when omitted)");

  auto* sc_va = app.add_subcommand("validate", "check a dataset manifest");
  std::string va_manifest;
  sc_va->add_option("--manifest", va_manifest, "manifest.json path")->required();

  auto* sc_au =
      app.add_subcommand("augment", "elastic-deform a feature image");
  std::string au_in, au_out;
  double au_alpha = 0.0, au_sigma = 0.0;
  sc_au->add_option("--in", au_in, "input feature file")->required();
  sc_au->add_option("--out", au_out, "output feature file")->required();
  CLI::Option* alpha_opt = sc_au->add_option(
      "--alpha", au_alpha, "peak warp in regions (config value when omitted)");
  CLI::Option* sigma_opt = sc_au->add_option(
      "--sigma", au_sigma, "smoothing std in regions (config value when omitted)");

  auto* sc_pc =
      app.add_subcommand("print-config", "emit the effective config JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg = load_config(config_path);
    if (seed_opt->count() > 0) cfg.seed = seed;

    if (sc_pc->parsed()) {
      std::cout << effective_config(cfg).dump(2) << "\n";
      return 0;
    }

    if (sc_vis->parsed()) {
      VisibilityOptions opts;
      opts.n_configs = cfg.visibility.n_configs;
      opts.bin_dims = cfg.visibility.bin_dims;
      opts.seed = cfg.seed;
      opts.jobs = jobs;
      if (verbose)
        std::cerr << "averaging " << opts.n_configs
                  << " particle configurations\n";
      save_visibility(vis_out, estimate_visibility_grid(
                                   cfg.layer, cfg.camera, cfg.gel_to_pinhole, opts));
      return 0;
    }

    if (sc_ds->parsed()) {
      const std::vector<IndentationRecord> records = load_records(ds_records);
      if (verbose)
        std::cerr << records.size() << " records -> " << ds_out << "\n";
      const DatasetManifest man =
          generate_dataset(records, cfg, ds_out, jobs, ds_aug);
      std::cout << man.samples.size() << " samples, " << man.failures.size()
                << " failures -> " << ds_out << "\n";
      for (const FailureEntry& f : man.failures)
        std::cerr << "failed: " << f.id << ": " << f.error << "\n";
      return man.failures.empty() ? 0 : 2;
    }

    if (sc_ef->parsed()) {
      const GridField grid = resample_to_grid(load_field(ef_field), cfg);
      save_features(ef_out,
                    synth_optical_flow(grid, cfg.camera, cfg.gel_to_pinhole,
                                       resolve_visibility(cfg),
                                       cfg.feature_regions));
      return 0;
    }

    if (sc_bf->parsed()) {
      save_forces(bf_out,
                  bin_forces(load_force_nodes(bf_nodes), cfg.label_bins,
                             Vec2d(cfg.layer.extent.x(), cfg.layer.extent.y())));
      return 0;
    }

    if (sc_br->parsed()) {
      const FisheyeCalibration calib = load_fisheye(br_fisheye);
      PinholeRig rig{cfg.camera, cfg.gel_to_pinhole};
      if (!br_pinhole.empty()) rig = load_pinhole(br_pinhole);
      std::optional<double> z_plane;
      if (zp_opt->count() > 0) z_plane = br_zplane;
      save_remap_table(br_out,
                       build_remap_table(calib.model, calib.gel_to_cam,
                                         rig.camera, rig.gel_to_pinhole,
                                         z_plane, jobs));
      return 0;
    }

    if (sc_rm->parsed()) {
      save_pgm(rm_out, remap_image(load_remap_table(rm_table), load_pgm(rm_in),
                                   rm_nearest));
      return 0;
    }

    if (sc_rx->parsed()) {
      const FeatureImage real = load_features(rx_features);
      const RefineOutcome result = run_refine(cfg, real, jobs, verbose);
      Json out;
      out["translation_mm"] = json_vec(result.t);
      out["mse"] = result.mse;
      const std::string text = out.dump(2) + "\n";
      if (rx_out.empty())
        std::cout << text;
      else
        write_file(rx_out, text);
      return 0;
    }

    if (sc_va->parsed()) {
      const ValidationReport report = validate_manifest(va_manifest);
      for (const ValidationItem& item : report.items) {
        if (item.pass)
          std::cout << "ok   " << item.id << "\n";
        else
          std::cout << "FAIL " << item.id << ": " << item.message << "\n";
      }
      std::cout << (report.all_pass ? "all samples valid" : "validation failed")
                << "\n";
      return report.all_pass ? 0 : 1;
    }

    if (sc_au->parsed()) {
      const double alpha = alpha_opt->count() > 0 ? au_alpha : cfg.augment.alpha;
      const double sigma = sigma_opt->count() > 0 ? au_sigma : cfg.augment.sigma;
      save_features(au_out,
                    elastic_deform(load_features(au_in), alpha, sigma, cfg.seed));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
