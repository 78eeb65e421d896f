#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "sfoc/core.hpp"
#include "sfoc/raster.hpp"

namespace sfoc {

/// (x, y) -> (a0 + a1 x + a2 y, b0 + b1 x + b2 y)
struct AffineTransform {
  double a0 = 0.0, a1 = 1.0, a2 = 0.0;
  double b0 = 0.0, b1 = 0.0, b2 = 1.0;

  static AffineTransform translation(double dx, double dy) { return {dx, 1.0, 0.0, dy, 0.0, 1.0}; }

  Point2 apply(Point2 p) const { return {a0 + a1 * p.x + a2 * p.y, b0 + b1 * p.x + b2 * p.y}; }
  double determinant() const { return a1 * b2 - a2 * b1; }
  /// Throws DegenerateError when the linear part is singular.
  AffineTransform inverse() const;
};

/// Homography with h(2, 2) == 1.
struct ProjectiveTransform {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();

  /// Scales so the bottom-right entry is 1; throws DegenerateError if it is ~0.
  static ProjectiveTransform from_matrix(const Eigen::Matrix3d& m);

  Point2 apply(Point2 p) const;
  ProjectiveTransform inverse() const;
};

/// Full second-order polynomial per output coordinate. Coefficient order
/// within each array: 1, x, y, x^2, x y, y^2.
struct Poly2Transform {
  std::array<double, 6> cx{0.0, 1.0, 0.0, 0.0, 0.0, 0.0};
  std::array<double, 6> cy{0.0, 0.0, 1.0, 0.0, 0.0, 0.0};

  Point2 apply(Point2 p) const;
  /// Newton solve for the source point mapping onto `target`.
  std::optional<Point2> solve(Point2 target, Point2 seed) const;
};

enum class ModelKind { kAffine, kProjective, kPoly2 };

using Transform = std::variant<AffineTransform, ProjectiveTransform, Poly2Transform>;

ModelKind kind_of(const Transform& t);
std::string model_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);
int min_sample(ModelKind kind);

Point2 apply(const Transform& t, Point2 p);
/// Flat coefficient list for reports: affine a0..b2, projective row-major
/// 3x3, poly2 cx then cy.
std::vector<double> coefficients(const Transform& t);

struct PointPair {
  Point2 src;
  Point2 dst;
};

/// Least squares on Hartley-normalized coordinates. Exact on clean minimal
/// samples; DegenerateError on rank deficiency.
AffineTransform estimate_affine(std::span<const PointPair> pairs);
ProjectiveTransform estimate_projective(std::span<const PointPair> pairs);
Poly2Transform estimate_poly2(std::span<const PointPair> pairs);
Transform estimate(ModelKind kind, std::span<const PointPair> pairs);

/// |apply(t, src) - dst|
double reprojection_error(const Transform& t, const PointPair& pair);

struct RansacConfig {
  double inlier_threshold = 1.5;  // pixels
  int max_iterations = 2000;
  double confidence = 0.995;
  /// Consensus must reach max(min_sample + 1, ceil(fraction * n)) pairs.
  double min_inlier_fraction = 0.1;
  std::uint64_t seed = 42;

  void validate() const;
};

struct RansacResult {
  Transform model;
  std::vector<std::uint8_t> inliers;
  int inlier_count = 0;
  int iterations = 0;
};

/// Hypothesize-and-verify, then least-squares refit on the consensus.
/// Throws MatchError when no hypothesis gathers enough support.
RansacResult ransac(std::span<const PointPair> pairs, ModelKind kind, const RansacConfig& config = {});

/// Output pixel -> source pixel; nullopt marks an unmappable output pixel.
using InverseMap = std::function<std::optional<Point2>(Point2)>;

/// Inverse-mapped bilinear resampling. `transform` maps source pixels to
/// output pixels. Unmapped or out-of-source pixels are 0.
Raster warp_resample(const Raster& image, const Transform& transform, int out_width, int out_height,
                     int workers = 1);
Raster warp_resample(const Raster& image, const InverseMap& inverse, int out_width, int out_height,
                     int workers = 1);

}  // namespace sfoc
