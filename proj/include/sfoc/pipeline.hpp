#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sfoc/core.hpp"
#include "sfoc/descriptor.hpp"
#include "sfoc/detect.hpp"
#include "sfoc/geometry.hpp"
#include "sfoc/raster.hpp"
#include "sfoc/rpc.hpp"
#include "sfoc/similarity.hpp"

namespace sfoc {

/// projective / poly2 fit pixel-space models with RANSAC on geo-referenced
/// (L2) data. rfm_affine selects the RPC path (L1): local correction of each
/// template through the RPC and bias compensation for outlier rejection.
enum class RegistrationModel { kProjective, kPoly2, kRfmAffine };
enum class DescriptorKind { kSfoc, kRaw };

std::string model_name(RegistrationModel model);
RegistrationModel parse_registration_model(const std::string& name);
std::string descriptor_name(DescriptorKind kind);
DescriptorKind parse_descriptor_kind(const std::string& name);

struct MatchConfig {
  int template_size = 100;
  int search_size = 200;
  int ip_count = 400;
  double min_score = 0.2;
  double correct_threshold = 1.5;
  SfocParams sfoc;
  RansacConfig ransac;
  RegistrationModel model = RegistrationModel::kProjective;
  double h0 = 0.0;
  DescriptorKind descriptor = DescriptorKind::kSfoc;
  double fast_threshold = 0.08;
  bool subpixel = false;
  int workers = 1;

  /// Throws ConfigError.
  void validate() const;
};

struct ControlPoint {
  double sensed_x = 0.0;
  double sensed_y = 0.0;
  double ref_x = 0.0;
  double ref_y = 0.0;
  double score = 0.0;
  bool valid = true;
};

/// Everything the pipeline may use. Missing GeoRefs mean identity.
struct Scene {
  Raster sensed;
  Raster reference;
  std::optional<GeoRef> sensed_geo;
  std::optional<GeoRef> reference_geo;
  std::optional<RpcModel> rpc;
};

/// Integer rectangle in reference pixels.
struct SearchWindow {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

/// Where the sensed pixel `ip` should land in the reference, from the two
/// GeoRefs (identity where absent).
Point2 predict_reference_location(const std::optional<GeoRef>& sensed_geo,
                                  const std::optional<GeoRef>& reference_geo, Point2 ip);

/// search_size square centered on `predicted`, clipped to the reference.
/// nullopt when the center falls outside the reference or the clipped window
/// cannot hold a template.
std::optional<SearchWindow> predict_search_window(Point2 predicted, int ref_width, int ref_height,
                                                  const MatchConfig& config);

/// SFOC or raw intensities, as configured.
FeatureVolume describe(const Plane& image, const MatchConfig& config);

/// Matches one template volume inside one search volume whose top-left sits
/// at (window.x0, window.y0). `template_center` is the sensed point that the
/// template center represents. nullopt for flat templates, windows without a
/// valid score, or peaks below min_score.
std::optional<ControlPoint> match_ip(const FeatureVolume& templ, const FeatureVolume& search,
                                     const SearchWindow& window, Point2 template_center, const MatchConfig& config,
                                     CorrelationSurface* surface = nullptr);

/// Image-level convenience: describes both patches first. The template is
/// template_size square and centered on `template_center`.
std::optional<ControlPoint> match_ip(const Raster& templ, const Patch& search, Point2 template_center,
                                     const MatchConfig& config);

struct Detection {
  std::vector<InterestPoint> ips;
  /// One slot per IP, in IP order; empty slots are IPs that produced nothing.
  std::vector<std::optional<ControlPoint>> slots;
  /// Correlation surfaces for the IP indices requested.
  std::map<std::size_t, CorrelationSurface> surfaces;
  double seconds = 0.0;

  std::vector<ControlPoint> control_points() const;
};

/// IPs on the sensed interior (block FAST), one template match per IP.
/// Throws MatchError when no IP yields a control point, ConfigError when the
/// RPC path lacks its inputs.
Detection detect_cps(const Scene& scene, const MatchConfig& config,
                     const std::vector<std::size_t>& keep_surfaces = {});

struct FittedModel {
  std::variant<Transform, RfmCorrection> model;
  int inlier_count = 0;

  /// Sensed pixel -> reference pixel when that is available in closed form
  /// (pixel-space models only).
  std::optional<Transform> pixel_transform() const;
  std::string name() const;
  std::vector<double> coefficients() const;
};

/// RANSAC (pixel-space models) or bias compensation (RPC path); rejected
/// points keep their place with valid = false. Throws MatchError without
/// consensus.
FittedModel refine_and_reject(std::vector<ControlPoint>& cps, const Scene& scene, const MatchConfig& config);

/// Resamples the sensed image onto the reference grid.
Raster rectify(const Raster& sensed, const FittedModel& model, int out_width, int out_height, int workers = 1);

struct RegistrationMetrics {
  int total = 0;
  int ncm = 0;
  double cmr = 0.0;
  std::optional<double> rmse;  // over correct matches; empty when ncm == 0
  double mt_seconds = 0.0;
};

/// `truth` maps sensed pixels to reference pixels.
RegistrationMetrics compute_metrics(const std::vector<ControlPoint>& cps, const Transform& truth, double threshold,
                                    double mt_seconds);

/// Truth model from manually picked pairs (sensed -> reference).
Transform truth_from_pairs(const std::vector<PointPair>& pairs);

/// Downsamples whichever image is finer so both share the coarser pixel
/// size; its GeoRef is updated to match. Returns true if anything changed.
bool harmonize_resolution(Scene& scene);

// Reports.
void save_control_points(const std::vector<ControlPoint>& cps, const std::filesystem::path& path);
std::vector<ControlPoint> load_control_points(const std::filesystem::path& path);
/// Manual truth pairs: CSV sensed_x,sensed_y,ref_x,ref_y.
std::vector<PointPair> load_truth_pairs(const std::filesystem::path& path);
void save_truth_pairs(const std::vector<PointPair>& pairs, const std::filesystem::path& path);
/// ncm, cmr, rmse_px are null when no truth is available.
std::string metrics_json(const std::optional<RegistrationMetrics>& metrics, double mt_seconds, int total_cps,
                         const FittedModel& model);

/// Transform as JSON: {"kind": "affine|projective|poly2", "coefficients": [...]}
/// with coefficients in the order of sfoc::coefficients().
void save_transform_json(const Transform& transform, const std::filesystem::path& path);
Transform load_transform_json(const std::filesystem::path& path);

/// Alternating cells of a (even cells) and b (odd cells).
Raster checkerboard(const Raster& a, const Raster& b, int cell);

/// PSNR over pixels at least `margin` from the border.
double interior_psnr(const Raster& a, const Raster& b, int margin);

}  // namespace sfoc
