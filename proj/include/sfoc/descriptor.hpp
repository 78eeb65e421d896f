#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "sfoc/core.hpp"
#include "sfoc/raster.hpp"

namespace sfoc {

/// Descriptor parameters. Defaults: six orientations at k*pi/6, first-order
/// scales {0.6, 0.8, 1.0}, second-order scale 1.5, dilation rates {1, 2, 3}.
struct SfocParams {
  int orientations = 6;
  std::vector<double> sigmas_first{0.6, 0.8, 1.0};
  std::vector<double> sigmas_second{1.5};
  std::vector<int> dilation_rates{1, 2, 3};
  double smooth_sigma_first = 1.0;
  double smooth_sigma_second = 1.5;
  double epsilon = 1e-6;
  bool first_order_only = false;  // F-SFOC ablation: drops the second-order group

  void validate() const;
  int channel_count() const { return first_order_only ? orientations : 2 * orientations; }
  double orientation(int k) const;
  /// Distance from the border beyond which replication no longer reaches.
  int support_radius() const;
};

struct ChannelStack {
  int width = 0;
  int height = 0;
  std::vector<Plane> channels;
};

/// width x height x z feature volume, stored plane-major (channel outermost).
class FeatureVolume {
 public:
  FeatureVolume() = default;
  FeatureVolume(int width, int height, int z, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int depth() const { return depth_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }

  double at(int x, int y, int k) const { return data_[offset(x, y, k)]; }
  double& at(int x, int y, int k) { return data_[offset(x, y, k)]; }

  std::span<const double> plane(int k) const { return {data_.data() + k * plane_size(), plane_size()}; }
  std::span<double> plane(int k) { return {data_.data() + k * plane_size(), plane_size()}; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  FeatureVolume crop(int x0, int y0, int w, int h) const;

 private:
  std::size_t offset(int x, int y, int k) const {
    return static_cast<std::size_t>(k) * plane_size() + static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  int depth_ = 0;
  std::vector<double> data_;
};

/// Per orientation, |steered first derivative| summed over sigmas_first.
ChannelStack first_order_channels(const Plane& image, const SfocParams& params);
/// Per orientation, |steered second derivative| summed over sigmas_second.
ChannelStack second_order_channels(const Plane& image, const SfocParams& params);
/// Average of the plane smoothed by one dilated Gaussian per rate.
ChannelStack dilated_smooth(const ChannelStack& stack, double smooth_sigma, const std::vector<int>& rates);
/// Per-pixel L2 normalization across the stack; norms <= epsilon become zero.
ChannelStack normalize_group(const ChannelStack& stack, double epsilon);

/// First-order group (channels 0..orientations-1) stacked on the
/// second-order group (channels orientations..2*orientations-1).
FeatureVolume build_sfoc(const Plane& image, const SfocParams& params = {});
inline FeatureVolume build_sfoc(const Raster& image, const SfocParams& params = {}) {
  return build_sfoc(image.plane(), params);
}

/// Single-channel volume of raw intensities (the NCC baseline).
FeatureVolume raw_volume(const Plane& image);

// Dump format: "SFOC 1\n" "width height z\n" then z little-endian float32
// planes, plane-major.
void save_feature_volume(const FeatureVolume& volume, const std::filesystem::path& path);
FeatureVolume load_feature_volume(const std::filesystem::path& path);

/// Tiles all channels side by side into one raster for inspection.
Raster channel_montage(const FeatureVolume& volume, int columns = 6);

}  // namespace sfoc
