#include "sfoc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "sfoc/filters.hpp"

namespace sfoc {
namespace {

std::vector<double> parse_csv_row(const std::string& line, std::size_t expected, const std::string& where) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str()) throw IoError(where + ": not a number: '" + cell + "'");
    values.push_back(v);
  }
  if (values.size() != expected) throw IoError(where + ": expected " + std::to_string(expected) + " columns");
  return values;
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& path, const std::string& header,
                                          std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw IoError(path.string() + ": expected header '" + header + "'");
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_csv_row(line, columns, path.string() + ":" + std::to_string(line_no)));
  }
  return rows;
}

// Template resampled on the reference grid around `center_ref` through the
// inverse of the local affine (reference -> sensed).
Plane resample_template(const Raster& sensed, const AffineTransform& ref_to_sensed, Point2 center_ref, int size) {
  const int half = size / 2;
  Plane out(size, size);
  for (int j = 0; j < size; ++j) {
    for (int i = 0; i < size; ++i) {
      const Point2 s = ref_to_sensed.apply({center_ref.x + i - half, center_ref.y + j - half});
      out.at(i, j) = bilinear_sample(sensed, s.x, s.y).value;
    }
  }
  return out;
}

}  // namespace

std::string model_name(RegistrationModel model) {
  switch (model) {
    case RegistrationModel::kProjective: return "projective";
    case RegistrationModel::kPoly2: return "poly2";
    case RegistrationModel::kRfmAffine: return "rfm_affine";
  }
  return "unknown";
}

RegistrationModel parse_registration_model(const std::string& name) {
  if (name == "projective") return RegistrationModel::kProjective;
  if (name == "poly2") return RegistrationModel::kPoly2;
  if (name == "rfm_affine") return RegistrationModel::kRfmAffine;
  throw ConfigError("unknown model '" + name + "' (projective, poly2, rfm_affine)");
}

std::string descriptor_name(DescriptorKind kind) { return kind == DescriptorKind::kSfoc ? "sfoc" : "raw"; }

DescriptorKind parse_descriptor_kind(const std::string& name) {
  if (name == "sfoc") return DescriptorKind::kSfoc;
  if (name == "raw") return DescriptorKind::kRaw;
  throw ConfigError("unknown descriptor '" + name + "' (sfoc, raw)");
}

void MatchConfig::validate() const {
  if (template_size < 8) throw ConfigError("template_size must be at least 8");
  if (search_size <= template_size) throw ConfigError("search_size must exceed template_size");
  if (ip_count < 1) throw ConfigError("ip_count must be positive");
  if (!(min_score >= -1.0 && min_score <= 1.0)) throw ConfigError("min_score must be in [-1, 1]");
  if (!(correct_threshold > 0.0)) throw ConfigError("correct_threshold must be positive");
  if (!(fast_threshold > 0.0)) throw ConfigError("fast_threshold must be positive");
  if (workers < 1) throw ConfigError("workers must be positive");
  if (!std::isfinite(h0)) throw ConfigError("h0 must be finite");
  try {
    sfoc.validate();
    ransac.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Point2 predict_reference_location(const std::optional<GeoRef>& sensed_geo,
                                  const std::optional<GeoRef>& reference_geo, Point2 ip) {
  const GeoRef s = sensed_geo.value_or(GeoRef::identity());
  const GeoRef r = reference_geo.value_or(GeoRef::identity());
  return r.geo_to_pixel(s.pixel_to_geo(ip));
}

std::optional<SearchWindow> predict_search_window(Point2 predicted, int ref_width, int ref_height,
                                                  const MatchConfig& config) {
  if (!std::isfinite(predicted.x) || !std::isfinite(predicted.y)) return std::nullopt;
  const double cx = std::round(predicted.x), cy = std::round(predicted.y);
  if (cx < 0.0 || cy < 0.0 || cx >= ref_width || cy >= ref_height) return std::nullopt;
  const int half = config.search_size / 2;
  const int x0 = std::max(0, static_cast<int>(cx) - half);
  const int y0 = std::max(0, static_cast<int>(cy) - half);
  const int x1 = std::min(ref_width, static_cast<int>(cx) - half + config.search_size);
  const int y1 = std::min(ref_height, static_cast<int>(cy) - half + config.search_size);
  SearchWindow w{x0, y0, x1 - x0, y1 - y0};
  if (w.width < config.template_size || w.height < config.template_size) return std::nullopt;
  return w;
}

FeatureVolume describe(const Plane& image, const MatchConfig& config) {
  return config.descriptor == DescriptorKind::kSfoc ? build_sfoc(image, config.sfoc) : raw_volume(image);
}

std::optional<ControlPoint> match_ip(const FeatureVolume& templ, const FeatureVolume& search,
                                     const SearchWindow& window, Point2 template_center, const MatchConfig& config,
                                     CorrelationSurface* surface) {
  CorrelationSurface s;
  try {
    s = fast_ncc(templ, search);
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
  if (surface != nullptr) *surface = s;
  if (s.valid_count() == 0) return std::nullopt;
  const Peak peak = peak_locate(s, config.subpixel);
  if (peak.score < config.min_score) return std::nullopt;
  ControlPoint cp;
  cp.sensed_x = template_center.x;
  cp.sensed_y = template_center.y;
  cp.ref_x = window.x0 + peak.sub_x + templ.width() / 2;
  cp.ref_y = window.y0 + peak.sub_y + templ.height() / 2;
  cp.score = std::clamp(peak.score, -1.0, 1.0);
  return cp;
}

std::optional<ControlPoint> match_ip(const Raster& templ, const Patch& search, Point2 template_center,
                                     const MatchConfig& config) {
  const SearchWindow window{search.origin_x, search.origin_y, search.raster.width(), search.raster.height()};
  return match_ip(describe(templ.plane(), config), describe(search.raster.plane(), config), window,
                  template_center, config);
}

std::vector<ControlPoint> Detection::control_points() const {
  std::vector<ControlPoint> out;
  for (const auto& slot : slots) {
    if (slot) out.push_back(*slot);
  }
  return out;
}

Detection detect_cps(const Scene& scene, const MatchConfig& config, const std::vector<std::size_t>& keep_surfaces) {
  config.validate();
  const bool rpc_path = config.model == RegistrationModel::kRfmAffine;
  if (rpc_path && (!scene.rpc || !scene.reference_geo)) {
    throw ConfigError("model rfm_affine needs an RPC file and a reference world file");
  }
  const auto start = std::chrono::steady_clock::now();

  const int t = config.template_size;
  const int half = t / 2;
  const Raster& sensed = scene.sensed;
  const Raster& reference = scene.reference;
  if (sensed.width() < t + kFastRadius * 2 || sensed.height() < t + kFastRadius * 2) {
    throw MatchError("sensed image is smaller than a template");
  }
  if (reference.width() < t || reference.height() < t) throw MatchError("reference image is smaller than a template");

  // IPs are restricted to centers whose template fits inside the sensed image.
  const Patch interior = crop(sensed, half, half, sensed.width() - t + 1, sensed.height() - t + 1);
  Detection det;
  det.ips = block_fast(interior.raster.plane(), {config.ip_count, config.fast_threshold, 9});
  for (auto& ip : det.ips) {
    ip.x += half;
    ip.y += half;
  }

  const FeatureVolume ref_volume = describe(reference.plane(), config);
  const FeatureVolume sensed_volume = rpc_path ? FeatureVolume{} : describe(sensed.plane(), config);

  det.slots.assign(det.ips.size(), std::nullopt);
  std::vector<std::optional<CorrelationSurface>> surfaces(det.ips.size());
  std::vector<std::uint8_t> keep(det.ips.size(), 0);
  for (std::size_t k : keep_surfaces) {
    if (k < keep.size()) keep[k] = 1;
  }

  parallel_for(det.ips.size(), config.workers, [&](std::size_t i) {
    const Point2 ip{static_cast<double>(det.ips[i].x), static_cast<double>(det.ips[i].y)};
    CorrelationSurface surface;
    CorrelationSurface* surface_ptr = keep[i] ? &surface : nullptr;
    std::optional<ControlPoint> cp;
    if (!rpc_path) {
      const auto window = predict_search_window(predict_reference_location(scene.sensed_geo, scene.reference_geo, ip),
                                                reference.width(), reference.height(), config);
      if (!window) return;
      const FeatureVolume templ = sensed_volume.crop(det.ips[i].x - half, det.ips[i].y - half, t, t);
      const FeatureVolume search = ref_volume.crop(window->x0, window->y0, window->width, window->height);
      cp = match_ip(templ, search, *window, ip, config, surface_ptr);
    } else {
      LocalAffine local;
      AffineTransform ref_to_sensed;
      try {
        local = local_affine_from_rfm(*scene.rpc, *scene.reference_geo, ip, half, config.h0);
        ref_to_sensed = local.transform.inverse();
      } catch (const DegenerateError&) {
        return;
      }
      // Anchor the template on an integer reference pixel so the peak offset
      // maps back without quantization.
      const Point2 predicted = local.transform.apply(ip);
      const Point2 center_ref{std::round(predicted.x), std::round(predicted.y)};
      const auto window = predict_search_window(center_ref, reference.width(), reference.height(), config);
      if (!window) return;
      const Plane patch = resample_template(sensed, ref_to_sensed, center_ref, t);
      const FeatureVolume search = ref_volume.crop(window->x0, window->y0, window->width, window->height);
      cp = match_ip(describe(patch, config), search, *window, ref_to_sensed.apply(center_ref), config, surface_ptr);
    }
    det.slots[i] = cp;
    if (surface_ptr != nullptr && cp) surfaces[i] = std::move(surface);
  });

  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    if (surfaces[i]) det.surfaces.emplace(i, std::move(*surfaces[i]));
  }
  det.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (std::none_of(det.slots.begin(), det.slots.end(), [](const auto& s) { return s.has_value(); })) {
    throw MatchError("no control points: none of " + std::to_string(det.ips.size()) + " interest points matched");
  }
  return det;
}

std::optional<Transform> FittedModel::pixel_transform() const {
  if (const auto* t = std::get_if<Transform>(&model)) return *t;
  return std::nullopt;
}

std::string FittedModel::name() const {
  if (const auto* t = std::get_if<Transform>(&model)) return model_name(kind_of(*t));
  return "rfm_affine";
}

std::vector<double> FittedModel::coefficients() const {
  if (const auto* t = std::get_if<Transform>(&model)) return sfoc::coefficients(*t);
  const auto& b = std::get<RfmCorrection>(model).bias;
  return {b.a0, b.a1, b.a2, b.b0, b.b1, b.b2};
}

FittedModel refine_and_reject(std::vector<ControlPoint>& cps, const Scene& scene, const MatchConfig& config) {
  FittedModel fitted;
  if (config.model != RegistrationModel::kRfmAffine) {
    std::vector<PointPair> pairs;
    for (const auto& cp : cps) pairs.push_back({{cp.sensed_x, cp.sensed_y}, {cp.ref_x, cp.ref_y}});
    const ModelKind kind = config.model == RegistrationModel::kPoly2 ? ModelKind::kPoly2 : ModelKind::kProjective;
    const RansacResult r = ransac(pairs, kind, config.ransac);
    for (std::size_t i = 0; i < cps.size(); ++i) cps[i].valid = r.inliers[i] != 0;
    fitted.model = r.model;
    fitted.inlier_count = r.inlier_count;
    return fitted;
  }

  if (!scene.rpc || !scene.reference_geo) {
    throw ConfigError("model rfm_affine needs an RPC file and a reference world file");
  }
  std::vector<GroundControlPoint> gcps;
  for (const auto& cp : cps) {
    const Point2 world = scene.reference_geo->pixel_to_geo({cp.ref_x, cp.ref_y});
    gcps.push_back({cp.sensed_y, cp.sensed_x, {world.y, world.x, config.h0}});
  }
  const AffineBiasResult r = affine_bias_fit(gcps, *scene.rpc, config.ransac.inlier_threshold);
  int count = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    cps[i].valid = r.inliers[i] != 0;
    count += r.inliers[i] != 0;
  }
  fitted.model = RfmCorrection{*scene.rpc, *scene.reference_geo, r.bias, config.h0};
  fitted.inlier_count = count;
  return fitted;
}

Raster rectify(const Raster& sensed, const FittedModel& model, int out_width, int out_height, int workers) {
  if (const auto* t = std::get_if<Transform>(&model.model)) {
    return warp_resample(sensed, *t, out_width, out_height, workers);
  }
  const RfmCorrection correction = std::get<RfmCorrection>(model.model);
  return warp_resample(
      sensed, InverseMap([correction](Point2 p) { return correction.reference_to_sensed(p); }), out_width,
      out_height, workers);
}

RegistrationMetrics compute_metrics(const std::vector<ControlPoint>& cps, const Transform& truth, double threshold,
                                    double mt_seconds) {
  if (cps.empty()) throw MatchError("compute_metrics: zero total matches");
  RegistrationMetrics m;
  m.total = static_cast<int>(cps.size());
  m.mt_seconds = mt_seconds;
  double sq = 0.0;
  for (const auto& cp : cps) {
    const Point2 p = apply(truth, {cp.sensed_x, cp.sensed_y});
    const double dx = cp.ref_x - p.x, dy = cp.ref_y - p.y;
    const double err = std::hypot(dx, dy);
    if (err <= threshold) {
      ++m.ncm;
      sq += dx * dx + dy * dy;
    }
  }
  m.cmr = static_cast<double>(m.ncm) / m.total;
  if (m.ncm > 0) m.rmse = std::sqrt(sq / m.ncm);
  return m;
}

Transform truth_from_pairs(const std::vector<PointPair>& pairs) { return estimate_projective(pairs); }

bool harmonize_resolution(Scene& scene) {
  if (!scene.sensed_geo || !scene.reference_geo) return false;
  const double ps = scene.sensed_geo->pixel_size();
  const double pr = scene.reference_geo->pixel_size();
  if (std::abs(ps / pr - 1.0) <= 0.01) return false;

  const bool sensed_finer = ps < pr;
  Raster& image = sensed_finer ? scene.sensed : scene.reference;
  GeoRef& geo = sensed_finer ? *scene.sensed_geo : *scene.reference_geo;
  const double factor = sensed_finer ? pr / ps : ps / pr;

  // Anti-alias, then sample at the new pixel centers.
  const double sigma = 0.5 * std::sqrt(factor * factor - 1.0);
  Plane smooth = image.plane();
  if (sigma > 0.0) {
    const int radius = kernel_radius(sigma);
    if (2 * radius + 1 <= std::min(image.width(), image.height())) {
      SeparableKernel k{Axis::kX, gaussian_taps(sigma, radius), gaussian_taps(sigma, radius), false};
      smooth = convolve_separable(smooth, k);
    }
  }
  const int w = std::max(1, static_cast<int>(std::floor(image.width() / factor)));
  const int h = std::max(1, static_cast<int>(std::floor(image.height() / factor)));
  const double offset = (factor - 1.0) / 2.0;
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.at(x, y) = bilinear_sample(smooth, factor * x + offset, factor * y + offset).value;
  }
  image = Raster::from_plane_clamped(std::move(out), image.bit_depth_origin());
  geo = GeoRef(geo.a() * factor, geo.d() * factor, geo.b() * factor, geo.e() * factor,
               geo.c() + (geo.a() + geo.b()) * offset, geo.f() + (geo.d() + geo.e()) * offset);
  return true;
}

void save_control_points(const std::vector<ControlPoint>& cps, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "sensed_x,sensed_y,ref_x,ref_y,score,valid\n";
  for (const auto& cp : cps) {
    out << cp.sensed_x << ',' << cp.sensed_y << ',' << cp.ref_x << ',' << cp.ref_y << ',' << cp.score << ','
        << (cp.valid ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<ControlPoint> load_control_points(const std::filesystem::path& path) {
  std::vector<ControlPoint> cps;
  for (const auto& row : read_csv(path, "sensed_x,sensed_y,ref_x,ref_y,score,valid", 6)) {
    cps.push_back({row[0], row[1], row[2], row[3], row[4], row[5] != 0.0});
  }
  return cps;
}

std::vector<PointPair> load_truth_pairs(const std::filesystem::path& path) {
  std::vector<PointPair> pairs;
  for (const auto& row : read_csv(path, "sensed_x,sensed_y,ref_x,ref_y", 4)) {
    pairs.push_back({{row[0], row[1]}, {row[2], row[3]}});
  }
  return pairs;
}

void save_truth_pairs(const std::vector<PointPair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "sensed_x,sensed_y,ref_x,ref_y\n";
  for (const auto& p : pairs) out << p.src.x << ',' << p.src.y << ',' << p.dst.x << ',' << p.dst.y << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::string metrics_json(const std::optional<RegistrationMetrics>& metrics, double mt_seconds, int total_cps,
                         const FittedModel& model) {
  nlohmann::ordered_json j;
  j["total"] = total_cps;
  if (metrics) {
    j["ncm"] = metrics->ncm;
    j["cmr"] = metrics->cmr;
    j["rmse_px"] = metrics->rmse ? nlohmann::ordered_json(*metrics->rmse) : nlohmann::ordered_json(nullptr);
  } else {
    j["ncm"] = nullptr;
    j["cmr"] = nullptr;
    j["rmse_px"] = nullptr;
  }
  j["mt_seconds"] = mt_seconds;
  j["model"] = {{"name", model.name()}, {"inliers", model.inlier_count}, {"coefficients", model.coefficients()}};
  return j.dump(2) + "\n";
}

void save_transform_json(const Transform& transform, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["kind"] = model_name(kind_of(transform));
  j["coefficients"] = coefficients(transform);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Transform load_transform_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto c = j.at("coefficients").get<std::vector<double>>();
    switch (kind) {
      case ModelKind::kAffine:
        if (c.size() != 6) break;
        return AffineTransform{c[0], c[1], c[2], c[3], c[4], c[5]};
      case ModelKind::kProjective: {
        if (c.size() != 9) break;
        Eigen::Matrix3d h;
        h << c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8];
        return ProjectiveTransform::from_matrix(h);
      }
      case ModelKind::kPoly2: {
        if (c.size() != 12) break;
        Poly2Transform p;
        std::copy(c.begin(), c.begin() + 6, p.cx.begin());
        std::copy(c.begin() + 6, c.end(), p.cy.begin());
        return p;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  throw IoError(path.string() + ": wrong coefficient count");
}

Raster checkerboard(const Raster& a, const Raster& b, int cell) {
  if (a.width() != b.width() || a.height() != b.height()) throw std::invalid_argument("checkerboard: size mismatch");
  if (cell < 1) throw std::invalid_argument("checkerboard: cell must be positive");
  Plane out(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) out.at(x, y) = ((x / cell + y / cell) % 2 == 0) ? a.at(x, y) : b.at(x, y);
  }
  return Raster::from_plane(std::move(out));
}

double interior_psnr(const Raster& a, const Raster& b, int margin) {
  if (a.width() != b.width() || a.height() != b.height()) throw std::invalid_argument("interior_psnr: size mismatch");
  double sq = 0.0;
  std::size_t count = 0;
  for (int y = margin; y < a.height() - margin; ++y) {
    for (int x = margin; x < a.width() - margin; ++x) {
      const double d = a.at(x, y) - b.at(x, y);
      sq += d * d;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("interior_psnr: margin leaves no pixels");
  const double mse = sq / static_cast<double>(count);
  return mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
}

}  // namespace sfoc
