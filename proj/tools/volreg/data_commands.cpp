#include <iostream>

#include "app.hpp"
#include "volreg/autonet/train.hpp"
#include "volreg/cam/cam.hpp"
#include "volreg/store/octv.hpp"

namespace volreg::cli {

namespace {

std::vector<Region> requested_regions(const RunContext& ctx) {
  if (ctx.config.contains("regions")) {
    std::vector<Region> out;
    for (const auto& r : ctx.config.at("regions")) out.push_back(parse_region(r.get<std::string>()));
    return out;
  }
  if (ctx.config.contains("region")) return {parse_region(ctx.config.at("region").get<std::string>())};
  return {Region::ONH, Region::Macula};
}

Extents3 extents_setting(const RunContext& ctx, const std::string& key, Extents3 fallback) {
  if (!ctx.config.contains(key)) return fallback;
  const auto v = ctx.config.at(key).get<std::vector<std::size_t>>();
  if (v.size() != 3) throw InvalidArgument("'" + key + "' needs three extents");
  return {v[0], v[1], v[2]};
}

std::vector<eval::Target> requested_targets(const RunContext& ctx, const std::string& fallback) {
  const std::string t = ctx.get<std::string>("target", fallback);
  if (t == "both") return {eval::Target::VFI, eval::Target::MD};
  return {eval::parse_target(t)};
}

}  // namespace

int cmd_synth(RunContext& ctx) {
  synth::CohortOptions opts;
  opts.n_patients = ctx.get<std::size_t>("n_patients", 10);
  opts.healthy_fraction = ctx.get<double>("healthy_fraction", opts.healthy_fraction);
  opts.seed = ctx.seed();
  opts.grid = ctx.get<std::size_t>("grid", opts.grid);
  opts.regions = requested_regions(ctx);
  opts.labels.md_noise_sd = ctx.get<double>("md_noise", opts.labels.md_noise_sd);
  synth::RenderOptions render;
  render.shape = extents_setting(ctx, "shape", render.shape);
  render.speckle_sd = ctx.get<double>("speckle", render.speckle_sd);
  const bool qc = ctx.get<bool>("qc_filter", true);
  const bool volumes = ctx.get<bool>("volumes", true);

  std::vector<synth::ScanCase> cases;
  {
    Stopwatch sw(ctx, "generate");
    cases = synth::generate_cohort(opts);
  }
  std::vector<synth::ScanRecord> records;
  std::vector<regress::FeatureRow> features;
  std::size_t rejected = 0;
  {
    Stopwatch sw(ctx, "render");
    for (const auto& c : cases) {
      if (qc && !synth::qc_filter(c.record)) {
        ++rejected;
        continue;
      }
      records.push_back(c.record);
      features.push_back(synth::truth_to_features(c.truth));
      if (volumes) store::write_volume(synth::render_volume(c.truth, render), ctx.output("volumes/" + c.record.scan_id + ".octv"));
    }
  }
  synth::write_records(records, ctx.output("records.csv"));
  regress::write_features(features, ctx.output("features.csv"));
  ctx.extra["records"] = records.size();
  ctx.extra["rejected_by_qc"] = rejected;
  std::cout << "wrote " << records.size() << " records (" << rejected << " rejected by QC) to " << ctx.out_dir.string()
            << '\n';
  return 0;
}

int cmd_cam(RunContext& ctx) {
  const autonet::Checkpoint ckpt = autonet::load_checkpoint(ctx.require_path("checkpoint"));
  std::vector<std::filesystem::path> paths;
  if (ctx.config.contains("volumes")) {
    for (const auto& p : ctx.config.at("volumes")) paths.emplace_back(p.get<std::string>());
  }
  if (ctx.config.contains("scans")) {
    const std::filesystem::path root = ctx.require_path("data");
    for (const auto& s : ctx.config.at("scans")) paths.push_back(volume_file(root, s.get<std::string>()));
  }
  if (paths.empty()) throw InvalidArgument("cam needs --volume files or --data with --scan ids");
  const std::size_t axis = ctx.get<std::size_t>("axis", 1);
  const double alpha = ctx.get<double>("alpha", 0.5);
  const auto slices = ctx.get<std::vector<std::size_t>>("slices", {});
  const auto targets = requested_targets(ctx, "vfi");

  for (const auto& path : paths) {
    const Volume vol = store::read_volume(path);
    const std::string id = vol.scan_id.empty() ? path.stem().string() : vol.scan_id;
    for (eval::Target target : targets) {
      Stopwatch sw(ctx, "cam");
      const cam::CamVolume c = cam::compute_cam(ckpt, vol, target);
      const Volume on_scan = cam::cam_to_scan(c, vol);
      const std::string stem = id + "_" + eval::to_string(target);
      store::write_volume(on_scan, ctx.output("cams/" + stem + ".octv"));
      const std::vector<std::size_t> wanted = slices.empty() ? std::vector<std::size_t>{vol.extents().at(axis) / 2} : slices;
      for (std::size_t s : wanted) {
        const cam::Image img = cam::render_overlay(vol, on_scan.voxels, axis, s, alpha);
        cam::write_ppm(img, ctx.output("overlays/" + stem + "_axis" + std::to_string(axis) + "_slice" + std::to_string(s) + ".ppm"));
      }
    }
  }
  std::cout << "wrote " << ctx.outputs.size() << " files to " << ctx.out_dir.string() << '\n';
  return 0;
}

}  // namespace volreg::cli
