// Command-line front end: descriptor dumps, matching, registration,
// synthetic pairs, NCC benchmark and RPC projection.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfoc/config.hpp"
#include "sfoc/descriptor.hpp"
#include "sfoc/harness.hpp"
#include "sfoc/pipeline.hpp"
#include "sfoc/raster.hpp"
#include "sfoc/rpc.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitMatch = 3;
constexpr int kExitIo = 4;

// Options shared by every command that runs the matcher.
struct ConfigOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<int> workers;
  std::optional<int> ip_count;
  std::optional<std::string> model;
  std::optional<std::string> descriptor;
  bool first_order_only = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "flat key = value config file")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override one key: --set key=value (repeatable)");
    app->add_option("--workers", workers, "worker threads (outputs do not depend on this)");
    app->add_option("--ip-count", ip_count, "number of interest points");
    app->add_option("--model", model, "projective | poly2 | rfm_affine");
    app->add_option("--descriptor", descriptor, "sfoc | raw");
    app->add_flag("--first-order-only", first_order_only, "drop the second-order channels");
  }

  // File first, then --set, then dedicated flags: later sources win.
  sfoc::RunConfig resolve() const {
    sfoc::RunConfig rc;
    if (!config_file.empty()) sfoc::load_run_config(rc, config_file);
    for (const auto& o : overrides) sfoc::apply_override(rc, o);
    if (workers) sfoc::apply_setting(rc, "workers", std::to_string(*workers));
    if (ip_count) sfoc::apply_setting(rc, "ip_count", std::to_string(*ip_count));
    if (model) sfoc::apply_setting(rc, "model", *model);
    if (descriptor) sfoc::apply_setting(rc, "descriptor", *descriptor);
    if (first_order_only) rc.match.sfoc.first_order_only = true;
    rc.match.validate();
    return rc;
  }
};

// Path options that may also come from the config file.
struct SceneOptions {
  std::string sensed, reference, sensed_world, reference_world, rpc;

  void attach(CLI::App* app) {
    app->add_option("--sensed", sensed, "sensed image (PGM or .fras)");
    app->add_option("--reference", reference, "reference image (PGM or .fras)");
    app->add_option("--sensed-world", sensed_world, "sensed world file");
    app->add_option("--reference-world", reference_world, "reference world file");
    app->add_option("--rpc", rpc, "RPC text file for the sensed image");
  }

  void merge_into(sfoc::RunConfig& rc) const {
    const std::pair<const char*, const std::string*> items[] = {{"sensed", &sensed},
                                                                {"reference", &reference},
                                                                {"sensed_world", &sensed_world},
                                                                {"reference_world", &reference_world},
                                                                {"rpc", &rpc}};
    for (const auto& [key, value] : items) {
      if (!value->empty()) rc.paths[key] = *value;
    }
  }
};

std::optional<std::string> path_of(const sfoc::RunConfig& rc, const std::string& key) {
  const auto it = rc.paths.find(key);
  if (it == rc.paths.end()) return std::nullopt;
  return it->second;
}

sfoc::Scene load_scene(const sfoc::RunConfig& rc) {
  const auto sensed = path_of(rc, "sensed");
  const auto reference = path_of(rc, "reference");
  if (!sensed || !reference) throw sfoc::ConfigError("both sensed and reference images are required");
  if (rc.match.model == sfoc::RegistrationModel::kRfmAffine &&
      (!path_of(rc, "rpc") || !path_of(rc, "reference_world"))) {
    throw sfoc::ConfigError("model rfm_affine needs --rpc and --reference-world");
  }
  sfoc::Scene scene;
  scene.sensed = sfoc::load_raster(*sensed);
  scene.reference = sfoc::load_raster(*reference);
  if (auto p = path_of(rc, "sensed_world")) scene.sensed_geo = sfoc::load_world_file(*p);
  if (auto p = path_of(rc, "reference_world")) scene.reference_geo = sfoc::load_world_file(*p);
  if (auto p = path_of(rc, "rpc")) scene.rpc = sfoc::load_rpc(*p);
  return scene;
}

std::pair<double, double> parse_pair(const std::string& text, const std::string& what) {
  double a = 0.0, b = 0.0;
  char comma = 0;
  std::istringstream in(text);
  if (!(in >> a >> comma >> b) || comma != ',') throw sfoc::ConfigError(what + ": expected 'a,b', got '" + text + "'");
  return {a, b};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw sfoc::IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw sfoc::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw sfoc::IoError("failed writing " + path.string());
}

int run_describe(const std::string& image, const std::string& out, const std::string& montage,
                 const ConfigOptions& opts) {
  const sfoc::RunConfig rc = opts.resolve();
  const sfoc::Raster raster = sfoc::load_raster(image);
  const sfoc::FeatureVolume volume = sfoc::build_sfoc(raster, rc.match.sfoc);
  sfoc::save_feature_volume(volume, out);
  if (!montage.empty()) {
    sfoc::save_raster(sfoc::channel_montage(volume), montage, sfoc::format_for_path(montage));
  }
  std::printf("%s: %d x %d x %d\n", out.c_str(), volume.width(), volume.height(), volume.depth());
  return 0;
}

int run_match(const SceneOptions& scene_opts, const ConfigOptions& opts, const std::string& out,
              const std::string& heatmap_dir, int heatmap_count) {
  sfoc::RunConfig rc = opts.resolve();
  scene_opts.merge_into(rc);
  sfoc::Scene scene = load_scene(rc);
  sfoc::harmonize_resolution(scene);

  std::vector<std::size_t> keep;
  if (!heatmap_dir.empty()) {
    // Evenly spaced IP indices; the detector returns at most ip_count points.
    const int count = std::max(1, std::min(heatmap_count, rc.match.ip_count));
    for (int k = 0; k < count; ++k) keep.push_back(static_cast<std::size_t>(k) * rc.match.ip_count / count);
  }
  const sfoc::Detection det = sfoc::detect_cps(scene, rc.match, keep);
  const auto cps = det.control_points();
  sfoc::save_control_points(cps, out);
  if (!heatmap_dir.empty()) {
    ensure_dir(heatmap_dir);
    for (const auto& [index, surface] : det.surfaces) {
      const fs::path path = fs::path(heatmap_dir) / ("heatmap_" + std::to_string(index) + ".fras");
      sfoc::save_raster(sfoc::Raster::from_plane_clamped(sfoc::surface_heatmap(surface)), path,
                        sfoc::RasterFormat::kFloat);
    }
  }
  std::printf("%zu control points from %zu interest points in %.3f s\n", cps.size(), det.ips.size(), det.seconds);
  return 0;
}

int run_register(const SceneOptions& scene_opts, const ConfigOptions& opts, std::string out_dir,
                 const std::string& truth, const std::string& truth_cps) {
  sfoc::RunConfig rc = opts.resolve();
  scene_opts.merge_into(rc);
  if (!truth.empty()) rc.paths["truth"] = truth;
  if (!truth_cps.empty()) rc.paths["truth_cps"] = truth_cps;
  if (out_dir.empty()) out_dir = path_of(rc, "out_dir").value_or("");
  if (out_dir.empty()) throw sfoc::ConfigError("--out-dir is required");

  sfoc::Scene scene = load_scene(rc);
  std::optional<sfoc::Transform> truth_model;
  if (auto p = path_of(rc, "truth")) truth_model = sfoc::load_transform_json(*p);
  if (auto p = path_of(rc, "truth_cps")) truth_model = sfoc::truth_from_pairs(sfoc::load_truth_pairs(*p));
  sfoc::harmonize_resolution(scene);

  const sfoc::Detection det = sfoc::detect_cps(scene, rc.match);
  std::vector<sfoc::ControlPoint> cps = det.control_points();
  const sfoc::FittedModel model = sfoc::refine_and_reject(cps, scene, rc.match);
  const sfoc::Raster rectified =
      sfoc::rectify(scene.sensed, model, scene.reference.width(), scene.reference.height(), rc.match.workers);

  std::optional<sfoc::RegistrationMetrics> metrics;
  if (truth_model) metrics = sfoc::compute_metrics(cps, *truth_model, rc.match.correct_threshold, det.seconds);

  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  sfoc::save_control_points(cps, dir / "cps.csv");
  sfoc::save_raster(rectified, dir / "rectified.fras", sfoc::RasterFormat::kFloat);
  sfoc::save_raster(sfoc::checkerboard(scene.reference, rectified, 32), dir / "checkerboard.pgm",
                    sfoc::RasterFormat::kPgm8);
  write_text(dir / "metrics.json",
             sfoc::metrics_json(metrics, det.seconds, static_cast<int>(cps.size()), model));

  std::printf("%zu control points, %d inliers (%s)", cps.size(), model.inlier_count, model.name().c_str());
  if (metrics) {
    std::printf(", NCM %d, CMR %.4f", metrics->ncm, metrics->cmr);
    if (metrics->rmse) std::printf(", RMSE %.4f px", *metrics->rmse);
  }
  std::printf("\n");
  return 0;
}

struct SynthOptions {
  std::string base;
  int width = 512, height = 512;
  std::uint64_t seed = 1;
  std::string tone = "none";
  double gamma = 2.2;
  std::vector<std::string> knots;
  double gaussian = 0.0, speckle = 0.0;
  std::string shift = "0,0";
  std::string geo_error = "0,0";
  std::string out_dir;
  std::string format = "fras";
};

int run_synth(const SynthOptions& o) {
  sfoc::SynthSpec spec;
  spec.base = o.base.empty() ? sfoc::procedural_texture(o.width, o.height, o.seed) : sfoc::load_raster(o.base);
  const auto [dx, dy] = parse_pair(o.shift, "--shift");
  const auto [ex, ey] = parse_pair(o.geo_error, "--geo-error");
  spec.transform = sfoc::AffineTransform::translation(dx, dy);
  spec.tone.kind = sfoc::parse_tone_kind(o.tone);
  spec.tone.gamma = o.gamma;
  for (const auto& k : o.knots) {
    const auto [in, out] = parse_pair(k, "--knot");
    spec.tone.knots.emplace_back(in, out);
  }
  spec.gaussian_var = o.gaussian;
  spec.speckle_var = o.speckle;
  spec.geo_error = {ex, ey};
  spec.seed = o.seed;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw sfoc::ConfigError(e.what());
  }

  const sfoc::SynthPair pair = sfoc::synth_pair(spec);
  ensure_dir(o.out_dir);
  const fs::path dir(o.out_dir);
  const sfoc::RasterFormat format = o.format == "pgm" ? sfoc::RasterFormat::kPgm8 : sfoc::RasterFormat::kFloat;
  const std::string ext = o.format == "pgm" ? ".pgm" : ".fras";
  sfoc::save_raster(pair.sensed, dir / ("sensed" + ext), format);
  sfoc::save_raster(pair.reference, dir / ("reference" + ext), format);
  sfoc::save_world_file(pair.sensed_geo, dir / "sensed.wld");
  sfoc::save_world_file(pair.reference_geo, dir / "reference.wld");
  sfoc::save_transform_json(pair.truth, dir / "truth.json");
  sfoc::save_transform_json(pair.planted, dir / "planted.json");
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int run_bench(int m, int M, int z, int repeats) {
  const sfoc::BenchReport r = sfoc::bench_ncc(m, m, M, M, z, repeats);
  std::printf("m=n=%d M=N=%d z=%d repeats=%d\n", m, M, z, repeats);
  std::printf("fast_ncc median   %.6f s\n", r.fast_seconds);
  std::printf("ncc_naive median  %.6f s\n", r.naive_seconds);
  std::printf("measured ratio    %.6f (speedup %.1fx)\n", r.measured_ratio, r.speedup);
  std::printf("predicted ratio   %.6f\n", r.predicted_ratio);
  return 0;
}

int run_rpc_project(const std::string& rpc_path, const std::vector<double>& forward,
                    const std::vector<double>& inverse) {
  const sfoc::RpcModel rpc = sfoc::load_rpc(rpc_path);
  if (forward.size() == 3) {
    const sfoc::ImagePoint p = sfoc::rfm_forward(rpc, forward[0], forward[1], forward[2]);
    std::printf("line %.10g sample %.10g\n", p.line, p.sample);
  }
  if (inverse.size() == 3) {
    const sfoc::RfmInverseResult g = sfoc::rfm_inverse(rpc, inverse[0], inverse[1], inverse[2]);
    std::printf("lat %.10g lon %.10g\n", g.lat, g.lon);
  }
  if (forward.empty() && inverse.empty()) throw sfoc::ConfigError("give --forward LAT LON H or --inverse LINE SAMPLE H");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SFOC multimodal image matching and registration"};
  app.require_subcommand(1);

  // describe
  auto* describe = app.add_subcommand("describe", "write the SFOC feature volume of an image");
  std::string describe_image, describe_out, describe_montage;
  ConfigOptions describe_cfg;
  describe->add_option("image", describe_image, "input image")->required();
  describe->add_option("-o,--out", describe_out, "output feature dump")->required();
  describe->add_option("--montage", describe_montage, "optional per-channel montage image");
  describe_cfg.attach(describe);

  // match
  auto* match = app.add_subcommand("match", "detect control points and write them as CSV");
  SceneOptions match_scene;
  ConfigOptions match_cfg;
  std::string match_out, heatmap_dir;
  int heatmap_count = 4;
  match_scene.attach(match);
  match_cfg.attach(match);
  match->add_option("-o,--out", match_out, "control point CSV")->required();
  match->add_option("--heatmap", heatmap_dir, "directory for correlation heatmaps of sampled IPs");
  match->add_option("--heatmap-count", heatmap_count, "number of sampled IPs");

  // register
  auto* reg = app.add_subcommand("register", "match, reject outliers, rectify, report");
  SceneOptions reg_scene;
  ConfigOptions reg_cfg;
  std::string reg_out, reg_truth, reg_truth_cps;
  reg_scene.attach(reg);
  reg_cfg.attach(reg);
  reg->add_option("--out-dir", reg_out, "output directory");
  reg->add_option("--truth", reg_truth, "truth transform JSON (sensed -> reference)");
  reg->add_option("--truth-cps", reg_truth_cps, "manual truth CSV sensed_x,sensed_y,ref_x,ref_y");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic sensed/reference pair");
  SynthOptions so;
  synth->add_option("--base", so.base, "base image; a procedural texture is used when absent");
  synth->add_option("--width", so.width, "procedural texture width");
  synth->add_option("--height", so.height, "procedural texture height");
  synth->add_option("--seed", so.seed, "random seed");
  synth->add_option("--tone", so.tone, "none | gamma | inversion | piecewise");
  synth->add_option("--gamma", so.gamma, "gamma exponent");
  synth->add_option("--knot", so.knots, "piecewise knot 'in,out' (repeatable)");
  synth->add_option("--gaussian", so.gaussian, "Gaussian noise variance in [0, 0.01]");
  synth->add_option("--speckle", so.speckle, "speckle variance in [0, 0.1]");
  synth->add_option("--shift", so.shift, "planted translation 'dx,dy' (reference -> sensed)");
  synth->add_option("--geo-error", so.geo_error, "geo-referencing error 'ex,ey' in pixels");
  synth->add_option("--format", so.format, "fras | pgm")->check(CLI::IsMember({"fras", "pgm"}));
  synth->add_option("--out-dir", so.out_dir, "output directory")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "time fast_ncc against direct NCC");
  int bench_m = 100, bench_M = 200, bench_z = 12, bench_repeats = 5;
  bench->add_option("--template", bench_m, "template side m = n");
  bench->add_option("--search", bench_M, "search side M = N");
  bench->add_option("--channels", bench_z, "feature channels z");
  bench->add_option("--repeats", bench_repeats, "timed repeats (median reported)");

  // rpc-project
  auto* rpcp = app.add_subcommand("rpc-project", "evaluate an RPC model forward or inverse");
  std::string rpc_path;
  std::vector<double> forward, inverse;
  rpcp->add_option("--rpc", rpc_path, "RPC text file")->required();
  rpcp->add_option("--forward", forward, "LAT LON H")->expected(3);
  rpcp->add_option("--inverse", inverse, "LINE SAMPLE H")->expected(3);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*describe) return run_describe(describe_image, describe_out, describe_montage, describe_cfg);
    if (*match) return run_match(match_scene, match_cfg, match_out, heatmap_dir, heatmap_count);
    if (*reg) return run_register(reg_scene, reg_cfg, reg_out, reg_truth, reg_truth_cps);
    if (*synth) return run_synth(so);
    if (*bench) return run_bench(bench_m, bench_M, bench_z, bench_repeats);
    if (*rpcp) return run_rpc_project(rpc_path, forward, inverse);
  } catch (const sfoc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sfoc::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const sfoc::MatchError& e) {
    std::cerr << "matching failed: " << e.what() << '\n';
    return kExitMatch;
  } catch (const sfoc::DegenerateError& e) {
    std::cerr << "matching failed: " << e.what() << '\n';
    return kExitMatch;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
