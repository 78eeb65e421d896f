#include "sfoc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "sfoc/similarity.hpp"

namespace sfoc {
namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Transform invert(const Transform& t, int width, int height) {
  if (const auto* a = std::get_if<AffineTransform>(&t)) return a->inverse();
  if (const auto* h = std::get_if<ProjectiveTransform>(&t)) return h->inverse();
  // No closed form for the polynomial: fit its inverse over the image.
  const auto& poly = std::get<Poly2Transform>(t);
  std::vector<PointPair> grid;
  for (int j = 0; j <= 16; ++j) {
    for (int i = 0; i <= 16; ++i) {
      const Point2 p{i * (width - 1) / 16.0, j * (height - 1) / 16.0};
      grid.push_back({poly.apply(p), p});
    }
  }
  return estimate_poly2(grid);
}

AffineTransform affine_part(const Transform& t, int width, int height) {
  if (const auto* a = std::get_if<AffineTransform>(&t)) return *a;
  std::vector<PointPair> grid;
  for (int j = 0; j <= 8; ++j) {
    for (int i = 0; i <= 8; ++i) {
      const Point2 p{i * (width - 1) / 8.0, j * (height - 1) / 8.0};
      grid.push_back({p, apply(t, p)});
    }
  }
  return estimate_affine(grid);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

std::string tone_name(ToneKind kind) {
  switch (kind) {
    case ToneKind::kNone: return "none";
    case ToneKind::kGamma: return "gamma";
    case ToneKind::kInversion: return "inversion";
    case ToneKind::kPiecewise: return "piecewise";
  }
  return "unknown";
}

ToneKind parse_tone_kind(const std::string& name) {
  if (name == "none") return ToneKind::kNone;
  if (name == "gamma") return ToneKind::kGamma;
  if (name == "inversion") return ToneKind::kInversion;
  if (name == "piecewise") return ToneKind::kPiecewise;
  throw ConfigError("unknown tone '" + name + "' (none, gamma, inversion, piecewise)");
}

void ToneMap::validate() const {
  if (kind == ToneKind::kGamma && !(gamma > 0.0)) throw std::invalid_argument("tone: gamma must be positive");
  if (kind == ToneKind::kPiecewise) {
    if (knots.size() < 2) throw std::invalid_argument("tone: piecewise map needs at least two knots");
    for (std::size_t i = 1; i < knots.size(); ++i) {
      if (!(knots[i].first > knots[i - 1].first)) throw std::invalid_argument("tone: knot inputs must increase");
    }
  }
}

double ToneMap::apply(double v) const {
  switch (kind) {
    case ToneKind::kNone: return v;
    case ToneKind::kGamma: return std::pow(v, gamma);
    case ToneKind::kInversion: return 1.0 - v;
    case ToneKind::kPiecewise: {
      if (v <= knots.front().first) return knots.front().second;
      if (v >= knots.back().first) return knots.back().second;
      auto hi = std::upper_bound(knots.begin(), knots.end(), v,
                                 [](double x, const auto& k) { return x < k.first; });
      auto lo = hi - 1;
      const double t = (v - lo->first) / (hi->first - lo->first);
      return lo->second + t * (hi->second - lo->second);
    }
  }
  return v;
}

void SynthSpec::validate() const {
  if (base.empty()) throw std::invalid_argument("synth: empty base image");
  const auto [lo, hi] = std::minmax_element(base.data().begin(), base.data().end());
  if (*lo == *hi) throw std::invalid_argument("synth: base image has no texture");
  if (!(gaussian_var >= 0.0 && gaussian_var <= 0.01)) throw std::invalid_argument("synth: gaussian_var outside [0, 0.01]");
  if (!(speckle_var >= 0.0 && speckle_var <= 0.1)) throw std::invalid_argument("synth: speckle_var outside [0, 0.1]");
  tone.validate();
}

SynthPair synth_pair(const SynthSpec& spec) {
  spec.validate();
  const int w = spec.base.width(), h = spec.base.height();
  SynthPair pair;
  pair.reference = spec.base;
  pair.planted = spec.transform;
  pair.truth = invert(spec.transform, w, h);

  const Raster warped = warp_resample(spec.base, spec.transform, w, h);
  Plane toned = warped.plane();
  for (double& v : toned.data) v = spec.tone.apply(v);
  Raster sensed = Raster::from_plane_clamped(std::move(toned));
  if (spec.gaussian_var > 0.0) sensed = add_gaussian_noise(sensed, spec.gaussian_var, mix_seed(spec.seed, 1));
  if (spec.speckle_var > 0.0) sensed = add_speckle(sensed, spec.speckle_var, mix_seed(spec.seed, 2));
  pair.sensed = std::move(sensed);

  // Reference GeoRef chosen so geo prediction lands at truth + geo_error
  // (exact for affine truths, the best affine fit otherwise).
  AffineTransform predict = affine_part(pair.truth, w, h);
  predict.a0 += spec.geo_error.x;
  predict.b0 += spec.geo_error.y;
  const AffineTransform to_world = predict.inverse();
  pair.sensed_geo = GeoRef::identity();
  pair.reference_geo = GeoRef(to_world.a1, to_world.b1, to_world.a2, to_world.b2, to_world.a0, to_world.b0);
  return pair;
}

Raster add_gaussian_noise(const Raster& image, double variance, std::uint64_t seed) {
  if (!(variance >= 0.0)) throw std::invalid_argument("gaussian noise: variance must be >= 0");
  if (variance == 0.0) return image;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(variance));
  Plane out = image.plane();
  for (double& v : out.data) v += noise(rng);
  return Raster::from_plane_clamped(std::move(out), image.bit_depth_origin());
}

Raster add_speckle(const Raster& image, double variance, std::uint64_t seed) {
  if (!(variance >= 0.0)) throw std::invalid_argument("speckle: variance must be >= 0");
  if (variance == 0.0) return image;
  std::mt19937_64 rng(seed);
  const double half_width = std::sqrt(3.0 * variance);
  std::uniform_real_distribution<double> noise(-half_width, half_width);
  Plane out = image.plane();
  for (double& v : out.data) v *= 1.0 + noise(rng);
  return Raster::from_plane_clamped(std::move(out), image.bit_depth_origin());
}

Raster procedural_texture(int width, int height, std::uint64_t seed) {
  if (width < 8 || height < 8) throw std::invalid_argument("procedural_texture: image too small");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Plane img(width, height);

  double amplitude = 1.0;
  for (int cell : {48, 24, 12, 6}) {
    const int gw = width / cell + 2, gh = height / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (double& v : lattice) v = unit(rng);
    for (int y = 0; y < height; ++y) {
      const int gy = y / cell;
      const double ty = smoothstep(static_cast<double>(y % cell) / cell);
      for (int x = 0; x < width; ++x) {
        const int gx = x / cell;
        const double tx = smoothstep(static_cast<double>(x % cell) / cell);
        auto at = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * gw + i]; };
        const double top = at(gx, gy) + tx * (at(gx + 1, gy) - at(gx, gy));
        const double bottom = at(gx, gy + 1) + tx * (at(gx + 1, gy + 1) - at(gx, gy + 1));
        img.at(x, y) += amplitude * (top + ty * (bottom - top));
      }
    }
    amplitude *= 0.5;
  }

  // Flat-shaded rectangles give the detector sharp corners to find.
  const int rects = std::max(8, width * height / 900);
  std::uniform_int_distribution<int> px(0, width - 1), py(0, height - 1), extent(5, 32);
  for (int r = 0; r < rects; ++r) {
    const int x0 = px(rng), y0 = py(rng);
    const int x1 = std::min(width, x0 + extent(rng)), y1 = std::min(height, y0 + extent(rng));
    const double level = 2.0 * unit(rng);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) img.at(x, y) = 0.35 * img.at(x, y) + 0.65 * level;
    }
  }
  const int lines = std::max(4, (width + height) / 60);
  for (int l = 0; l < lines; ++l) {
    const double x0 = px(rng), y0 = py(rng), angle = unit(rng) * 3.14159265358979;
    const double len = 30.0 + unit(rng) * 80.0, level = 2.0 * unit(rng);
    for (double s = 0.0; s < len; s += 0.5) {
      const int x = static_cast<int>(x0 + s * std::cos(angle)), y = static_cast<int>(y0 + s * std::sin(angle));
      for (int d = 0; d < 2; ++d) {
        if (img.contains(x + d, y)) img.at(x + d, y) = level;
      }
    }
  }

  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  const double lo_v = *lo, span = std::max(*hi - *lo, 1e-12);
  for (double& v : img.data) v = 0.05 + 0.9 * (v - lo_v) / span;
  return Raster::from_plane_clamped(std::move(img));
}

std::vector<SweepRow> noise_sweep(const SweepConfig& config) {
  if (config.bases.empty()) throw std::invalid_argument("noise_sweep: no base images");
  struct Cell {
    double cmr_sum = 0.0;
    double rmse_sum = 0.0;
    int rmse_count = 0;
    double mt_sum = 0.0;
  };
  const std::vector<std::pair<std::string, const std::vector<double>*>> kinds = {
      {"gaussian", &config.gaussian_levels}, {"speckle", &config.speckle_levels}};
  // cells[method][kind][level]
  std::vector<std::vector<std::vector<Cell>>> cells(config.methods.size());
  for (auto& per_method : cells) {
    for (const auto& kind : kinds) per_method.emplace_back(kind.second->size());
  }

  for (std::size_t k = 0; k < kinds.size(); ++k) {
    const auto& levels = *kinds[k].second;
    for (std::size_t lv = 0; lv < levels.size(); ++lv) {
      for (std::size_t b = 0; b < config.bases.size(); ++b) {
        SynthSpec spec;
        spec.base = config.bases[b];
        spec.transform = AffineTransform::translation(config.shift.x, config.shift.y);
        spec.tone = config.tone;
        (k == 0 ? spec.gaussian_var : spec.speckle_var) = levels[lv];
        spec.geo_error = config.geo_error;
        spec.seed = mix_seed(config.seed, (k * 1000 + lv) * 1000 + b);
        const SynthPair pair = synth_pair(spec);
        const Scene scene = pair.scene();

        for (std::size_t m = 0; m < config.methods.size(); ++m) {
          MatchConfig match = config.match;
          match.descriptor = config.methods[m];
          Cell& cell = cells[m][k][lv];
          const auto start = std::chrono::steady_clock::now();
          try {
            const Detection det = detect_cps(scene, match);
            const auto metrics =
                compute_metrics(det.control_points(), pair.truth, match.correct_threshold, det.seconds);
            cell.cmr_sum += metrics.cmr;
            if (metrics.rmse) {
              cell.rmse_sum += *metrics.rmse;
              ++cell.rmse_count;
            }
            cell.mt_sum += det.seconds;
          } catch (const MatchError&) {
            // No matches at all counts as CMR 0.
            cell.mt_sum += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          }
        }
      }
    }
  }

  std::vector<SweepRow> rows;
  const double nb = static_cast<double>(config.bases.size());
  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      const auto& levels = *kinds[k].second;
      for (std::size_t lv = 0; lv < levels.size(); ++lv) {
        const Cell& c = cells[m][k][lv];
        SweepRow row;
        row.method = config.methods[m] == DescriptorKind::kSfoc ? "sfoc_fastncc" : "raw_ncc";
        row.noise_kind = kinds[k].first;
        row.variance = levels[lv];
        row.cmr = c.cmr_sum / nb;
        if (c.rmse_count > 0) row.rmse_px = c.rmse_sum / c.rmse_count;
        row.mt_seconds = c.mt_sum / nb;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void save_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  out << "method,noise_kind,variance,cmr,rmse_px,mt_seconds\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.noise_kind << ',' << r.variance << ',' << r.cmr << ',';
    if (r.rmse_px) out << *r.rmse_px;
    out << ',' << r.mt_seconds << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

BenchReport bench_ncc(int m, int n, int M, int N, int z, int repeats, std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("bench_ncc: repeats must be >= 1");
  BenchReport report{m, n, M, N, z};
  report.predicted_ratio = complexity_estimate(m, n, M, N, z).ratio;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FeatureVolume templ(m, n, z), search(M, N, z);
  for (double& v : templ.data()) v = unit(rng);
  for (double& v : search.data()) v = unit(rng);

  std::vector<double> fast_times, naive_times;
  for (int r = 0; r < repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    const CorrelationSurface fast = fast_ncc(templ, search);
    auto t1 = std::chrono::steady_clock::now();
    const CorrelationSurface naive = ncc_naive(templ, search);
    auto t2 = std::chrono::steady_clock::now();
    fast_times.push_back(std::chrono::duration<double>(t1 - t0).count());
    naive_times.push_back(std::chrono::duration<double>(t2 - t1).count());
  }
  report.fast_seconds = median(fast_times);
  report.naive_seconds = median(naive_times);
  report.speedup = report.naive_seconds / std::max(report.fast_seconds, 1e-12);
  report.measured_ratio = report.fast_seconds / std::max(report.naive_seconds, 1e-12);
  return report;
}

}  // namespace sfoc
