#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "sfoc/core.hpp"
#include "sfoc/geometry.hpp"
#include "sfoc/raster.hpp"

namespace sfoc {

/// Rational polynomial camera: normalized (lat, lon, h) -> normalized
/// (line, sample) as ratios of 20-term cubics.
///
/// Term order for coefficient i (1-based in files): 1, L, P, H, LP, LH, PH,
/// L^2, P^2, H^2, LPH, L^3, LP^2, LH^2, L^2P, P^3, PH^2, L^2H, P^2H, H^3,
/// with P = normalized latitude, L = normalized longitude, H = normalized height.
struct RpcModel {
  double line_off = 0.0, samp_off = 0.0, lat_off = 0.0, lon_off = 0.0, height_off = 0.0;
  double line_scale = 1.0, samp_scale = 1.0, lat_scale = 1.0, lon_scale = 1.0, height_scale = 1.0;
  std::array<double, 20> num_l{};
  std::array<double, 20> den_l{};
  std::array<double, 20> num_s{};
  std::array<double, 20> den_s{};

  /// Throws std::invalid_argument on non-positive scales or non-finite values.
  void validate() const;
};

/// The 20 cubic monomials in the documented order.
std::array<double, 20> rpc_terms(double p, double l, double h);

struct ImagePoint {
  double line = 0.0;
  double sample = 0.0;
};

struct GroundPoint {
  double lat = 0.0;
  double lon = 0.0;
  double h = 0.0;
};

/// Ground -> image. Throws DegenerateError when a denominator is below 1e-10
/// in magnitude, std::out_of_range when a normalized input leaves (-1.2, 1.2).
ImagePoint rfm_forward(const RpcModel& rpc, double lat, double lon, double h);

struct RfmInverseResult {
  double lat = 0.0;
  double lon = 0.0;
  int iterations = 0;  // residual evaluations until convergence
};

/// Image -> ground at fixed height: damped Newton on normalized coordinates
/// with a central-difference Jacobian, seeded at the offsets. Converged when
/// the image residual is below 1e-6 normalized units; DegenerateError after
/// 50 iterations.
RfmInverseResult rfm_inverse(const RpcModel& rpc, double line, double sample, double h);

/// `KEY: value` text, keys as in the common RPC00B text layout.
RpcModel load_rpc(const std::filesystem::path& path);
void save_rpc(const RpcModel& rpc, const std::filesystem::path& path);

// Ground coordinates relate to reference pixels through the reference
// GeoRef with world X = longitude and world Y = latitude.

struct LocalAffine {
  AffineTransform transform;  // sensed pixel -> reference pixel
  double residual_rms = 0.0;  // pixels, over the five fitted points
};

/// Projects the four corners and the center of the sensed patch around `ip`
/// to the ground at height h0, then into reference pixels, and fits an
/// affine through the five correspondences.
LocalAffine local_affine_from_rfm(const RpcModel& rpc, const GeoRef& reference, Point2 ip, int half_size,
                                  double h0);

/// Sensed image point paired with the ground coordinates of its match.
struct GroundControlPoint {
  double line = 0.0;
  double sample = 0.0;
  GroundPoint ground;
};

/// Image-space systematic error model: RFM(ground) - (r, c) = (dr, dc) with
///   dr = a0 + a1 r + a2 c,   dc = b0 + b1 r + b2 c.
struct AffineBias {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0;
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  double residual_rms = 0.0;  // pixels, over the surviving points

  ImagePoint correct(double line, double sample) const {
    return {line + a0 + a1 * line + a2 * sample, sample + b0 + b1 * line + b2 * sample};
  }
  /// Inverse of correct(); throws DegenerateError if singular.
  ImagePoint uncorrect(double line, double sample) const;
};

struct AffineBiasResult {
  AffineBias bias;
  std::vector<std::uint8_t> inliers;
};

/// Least-squares bias fit with iterative rejection: after each fit the single
/// worst point is dropped while its residual exceeds `threshold`. Throws
/// MatchError when fewer than 4 points survive.
AffineBiasResult affine_bias_fit(const std::vector<GroundControlPoint>& cps, const RpcModel& rpc,
                                 double threshold);

/// Reference pixel -> sensed pixel through ground (height h0), the RPC and
/// the inverse bias correction. Used as the inverse map for rectification.
struct RfmCorrection {
  RpcModel rpc;
  GeoRef reference;
  AffineBias bias;
  double h0 = 0.0;

  std::optional<Point2> reference_to_sensed(Point2 ref) const;
};

}  // namespace sfoc
