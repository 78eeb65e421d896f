#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfoc/geometry.hpp"
#include "sfoc/pipeline.hpp"
#include "sfoc/raster.hpp"

namespace sfoc {

enum class ToneKind { kNone, kGamma, kInversion, kPiecewise };

std::string tone_name(ToneKind kind);
ToneKind parse_tone_kind(const std::string& name);

/// Intensity remapping applied to the sensed image to emulate radiometric
/// differences between modalities.
struct ToneMap {
  ToneKind kind = ToneKind::kNone;
  double gamma = 1.0;
  /// Piecewise-linear knots (input, output) with increasing inputs; the
  /// curve is extended flat beyond the first and last knot.
  std::vector<std::pair<double, double>> knots;

  double apply(double v) const;
  void validate() const;
};

struct SynthSpec {
  Raster base;
  /// Planted geometry: reference pixel -> sensed pixel.
  Transform transform = AffineTransform{};
  ToneMap tone;
  double gaussian_var = 0.0;  // [0, 0.01]
  double speckle_var = 0.0;   // [0, 0.1]
  /// Error of the geo-referencing: the reference GeoRef predicts truth + geo_error.
  Point2 geo_error{0.0, 0.0};
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthPair {
  Raster sensed;
  Raster reference;
  Transform planted;  // reference -> sensed
  Transform truth;    // sensed -> reference
  GeoRef sensed_geo;
  GeoRef reference_geo;

  Scene scene() const { return {sensed, reference, sensed_geo, reference_geo, std::nullopt}; }
};

/// reference = base; sensed = warp(base) -> tone map -> Gaussian -> speckle.
SynthPair synth_pair(const SynthSpec& spec);

/// I + n, n ~ N(0, variance), clamped to [0, 1].
Raster add_gaussian_noise(const Raster& image, double variance, std::uint64_t seed);
/// I * (1 + u), u uniform with zero mean and the given variance, clamped.
Raster add_speckle(const Raster& image, double variance, std::uint64_t seed);

/// Multi-octave value noise with overlaid rectangles and line segments: a
/// corner-rich stand-in for satellite scenes.
Raster procedural_texture(int width, int height, std::uint64_t seed);

struct SweepConfig {
  std::vector<Raster> bases;
  std::vector<DescriptorKind> methods{DescriptorKind::kSfoc, DescriptorKind::kRaw};
  std::vector<double> gaussian_levels{0.002, 0.004, 0.006, 0.008, 0.01};
  std::vector<double> speckle_levels{0.02, 0.04, 0.06, 0.08, 0.1};
  ToneMap tone{ToneKind::kInversion, 1.0, {}};
  Point2 shift{6.0, -4.0};  // planted translation, reference -> sensed
  Point2 geo_error{0.0, 0.0};
  MatchConfig match;
  std::uint64_t seed = 7;
};

struct SweepRow {
  std::string method;
  std::string noise_kind;  // gaussian | speckle
  double variance = 0.0;
  double cmr = 0.0;
  std::optional<double> rmse_px;  // mean over bases that produced correct matches
  double mt_seconds = 0.0;        // mean matching time per base
};

/// Rows ordered by method, then noise kind (gaussian first), then level.
/// Each base and level uses the same synthetic pair for every method.
std::vector<SweepRow> noise_sweep(const SweepConfig& config);
void save_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

struct BenchReport {
  int m = 0, n = 0, M = 0, N = 0, z = 0;
  double fast_seconds = 0.0;   // median
  double naive_seconds = 0.0;  // median
  double speedup = 0.0;        // naive / fast
  double measured_ratio = 0.0; // fast / naive
  double predicted_ratio = 0.0;
};

/// Median timings of fast_ncc and ncc_naive on random volumes.
BenchReport bench_ncc(int m, int n, int M, int N, int z, int repeats, std::uint64_t seed = 3);

}  // namespace sfoc
