#pragma once

#include <filesystem>
#include <span>

#include "sfoc/core.hpp"

namespace sfoc {

enum class BitDepth { k8, k16, kFloat };

enum class RasterFormat { kPgm8, kPgm16, kFloat };

/// Grayscale image with intensities normalized to [0, 1]. Immutable once
/// constructed; build pixel data in a Plane and hand it over.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, double fill = 0.0);

  /// Validates that every value is finite and within [0, 1].
  static Raster from_plane(Plane plane, BitDepth origin = BitDepth::kFloat);
  /// Clamps into [0, 1]; non-finite values are rejected.
  static Raster from_plane_clamped(Plane plane, BitDepth origin = BitDepth::kFloat);

  int width() const { return plane_.width; }
  int height() const { return plane_.height; }
  double at(int x, int y) const { return plane_.at(x, y); }
  const Plane& plane() const { return plane_; }
  std::span<const double> data() const { return plane_.data; }
  BitDepth bit_depth_origin() const { return origin_; }
  bool empty() const { return plane_.empty(); }

 private:
  Plane plane_;
  BitDepth origin_ = BitDepth::kFloat;
};

/// Six-parameter world-file affine: X = a*x + b*y + c, Y = d*x + e*y + f,
/// with (x, y) in pixels and (X, Y) in world units.
class GeoRef {
 public:
  GeoRef() = default;  // identity
  GeoRef(double a, double d, double b, double e, double c, double f);

  static GeoRef identity() { return {}; }

  Point2 pixel_to_geo(Point2 pixel) const;
  Point2 geo_to_pixel(Point2 world) const;

  /// Square root of the absolute area of one pixel in world units.
  double pixel_size() const;

  double a() const { return a_; }
  double d() const { return d_; }
  double b() const { return b_; }
  double e() const { return e_; }
  double c() const { return c_; }
  double f() const { return f_; }

 private:
  double a_ = 1.0, d_ = 0.0, b_ = 0.0, e_ = 1.0, c_ = 0.0, f_ = 0.0;
};

/// A sub-image together with where its top-left sat in the parent.
struct Patch {
  Raster raster;
  int origin_x = 0;
  int origin_y = 0;
};

struct Sample {
  double value = 0.0;
  bool in_bounds = false;
};

// File I/O. Supported inputs: PGM P2/P5 (any maxval up to 65535) and the
// float raster format ("FRAS 1" / "width height" / little-endian float32).
Raster load_raster(const std::filesystem::path& path);
void save_raster(const Raster& raster, const std::filesystem::path& path, RasterFormat format);
/// Picks the format from the extension: .pgm -> 8-bit PGM, .fras -> float.
RasterFormat format_for_path(const std::filesystem::path& path);

// World files: six lines in the order a, d, b, e, c, f.
GeoRef load_world_file(const std::filesystem::path& path);
void save_world_file(const GeoRef& geo, const std::filesystem::path& path);

/// Bilinear interpolation. Outside [0, w-1] x [0, h-1] returns 0 with
/// in_bounds == false.
Sample bilinear_sample(const Plane& plane, double x, double y);
inline Sample bilinear_sample(const Raster& raster, double x, double y) {
  return bilinear_sample(raster.plane(), x, y);
}

/// (2*half_w+1) x (2*half_h+1) patch centered on (center_x, center_y).
/// Throws std::out_of_range when the patch does not fit.
Patch extract_patch(const Raster& raster, int center_x, int center_y, int half_w, int half_h);

/// Rectangular crop with an explicit origin. Throws std::out_of_range when
/// the rectangle leaves the raster.
Patch crop(const Raster& raster, int x0, int y0, int width, int height);

}  // namespace sfoc
