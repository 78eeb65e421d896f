#include "sfoc/descriptor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

#include "sfoc/filters.hpp"

namespace sfoc {
namespace {

ChannelStack empty_stack(const Plane& image, int count) {
  ChannelStack stack{image.width, image.height, {}};
  stack.channels.assign(static_cast<std::size_t>(count), Plane(image.width, image.height));
  return stack;
}

int max_radius(const std::vector<double>& sigmas) {
  int r = 0;
  for (double s : sigmas) r = std::max(r, kernel_radius(s));
  return r;
}

void write_group(FeatureVolume& volume, const ChannelStack& stack, int first_channel) {
  for (std::size_t k = 0; k < stack.channels.size(); ++k) {
    const auto& src = stack.channels[k].data;
    auto dst = volume.plane(first_channel + static_cast<int>(k));
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace

void SfocParams::validate() const {
  if (orientations < 2) throw std::invalid_argument("SfocParams: orientations must be >= 2");
  if (sigmas_first.empty()) throw std::invalid_argument("SfocParams: sigmas_first is empty");
  if (!first_order_only && sigmas_second.empty()) throw std::invalid_argument("SfocParams: sigmas_second is empty");
  for (double s : sigmas_first) {
    if (!(s > 0.0)) throw std::invalid_argument("SfocParams: first-order sigma must be positive");
  }
  for (double s : sigmas_second) {
    if (!(s > 0.0)) throw std::invalid_argument("SfocParams: second-order sigma must be positive");
  }
  if (!(smooth_sigma_first > 0.0) || !(smooth_sigma_second > 0.0)) {
    throw std::invalid_argument("SfocParams: smoothing sigma must be positive");
  }
  if (dilation_rates.empty()) throw std::invalid_argument("SfocParams: dilation_rates is empty");
  std::set<int> seen;
  for (int r : dilation_rates) {
    if (r < 1 || !seen.insert(r).second) {
      throw std::invalid_argument("SfocParams: dilation rates must be distinct positive integers");
    }
  }
  if (!(epsilon >= 0.0)) throw std::invalid_argument("SfocParams: epsilon must be non-negative");
}

double SfocParams::orientation(int k) const { return k * std::numbers::pi / orientations; }

int SfocParams::support_radius() const {
  const int max_rate = *std::max_element(dilation_rates.begin(), dilation_rates.end());
  int r = max_radius(sigmas_first) + kernel_radius(smooth_sigma_first) * max_rate;
  if (!first_order_only) {
    r = std::max(r, max_radius(sigmas_second) + kernel_radius(smooth_sigma_second) * max_rate);
  }
  return r;
}

FeatureVolume::FeatureVolume(int width, int height, int z, double fill)
    : width_(width), height_(height), depth_(z) {
  if (width < 0 || height < 0 || z < 0) throw std::invalid_argument("FeatureVolume: negative dimensions");
  data_.assign(plane_size() * static_cast<std::size_t>(z), fill);
}

FeatureVolume FeatureVolume::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > width_ || y0 + h > height_) {
    throw std::out_of_range("FeatureVolume::crop: rectangle exceeds volume");
  }
  FeatureVolume out(w, h, depth_);
  for (int k = 0; k < depth_; ++k) {
    for (int y = 0; y < h; ++y) {
      const double* src = &data_[offset(x0, y0 + y, k)];
      std::copy(src, src + w, &out.data_[out.offset(0, y, k)]);
    }
  }
  return out;
}

ChannelStack first_order_channels(const Plane& image, const SfocParams& params) {
  params.validate();
  ChannelStack stack = empty_stack(image, params.orientations);
  for (double sigma : params.sigmas_first) {
    const SteerableBasisG1 basis = g1_basis(sigma);
    const Plane gx = convolve_separable(image, basis.sx);
    const Plane gy = convolve_separable(image, basis.sy);
    for (int k = 0; k < params.orientations; ++k) {
      const double c = std::cos(params.orientation(k));
      const double s = std::sin(params.orientation(k));
      auto& out = stack.channels[static_cast<std::size_t>(k)].data;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += std::abs(c * gx.data[i] + s * gy.data[i]);
    }
  }
  return stack;
}

ChannelStack second_order_channels(const Plane& image, const SfocParams& params) {
  params.validate();
  ChannelStack stack = empty_stack(image, params.orientations);
  for (double sigma : params.sigmas_second) {
    const SteerableBasisG2 basis = g2_basis(sigma);
    const Plane gxx = convolve_separable(image, basis.sxx);
    const Plane gyy = convolve_separable(image, basis.syy);
    const Plane gxy = convolve_separable(image, basis.sxy);
    for (int k = 0; k < params.orientations; ++k) {
      const double c = std::cos(params.orientation(k));
      const double s = std::sin(params.orientation(k));
      const double wxx = c * c;
      const double wyy = s * s;
      const double wxy = 2.0 * s * c;
      auto& out = stack.channels[static_cast<std::size_t>(k)].data;
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += std::abs(wxx * gxx.data[i] + wyy * gyy.data[i] + wxy * gxy.data[i]);
      }
    }
  }
  return stack;
}

ChannelStack dilated_smooth(const ChannelStack& stack, double smooth_sigma, const std::vector<int>& rates) {
  if (rates.empty()) throw std::invalid_argument("dilated_smooth: no rates");
  const int radius = kernel_radius(smooth_sigma);
  std::vector<SeparableKernel> kernels;
  for (int rate : rates) {
    const Taps1d taps = gaussian_taps(smooth_sigma, radius, rate);
    kernels.push_back(SeparableKernel{Axis::kX, taps, taps, false});
  }

  ChannelStack out{stack.width, stack.height, {}};
  const double inv_count = 1.0 / static_cast<double>(rates.size());
  for (const Plane& plane : stack.channels) {
    Plane acc(plane.width, plane.height);
    for (const auto& kernel : kernels) {
      const Plane smoothed = convolve_separable(plane, kernel);
      for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += smoothed.data[i];
    }
    for (double& v : acc.data) v *= inv_count;
    out.channels.push_back(std::move(acc));
  }
  return out;
}

ChannelStack normalize_group(const ChannelStack& stack, double epsilon) {
  ChannelStack out = stack;
  if (stack.channels.empty()) return out;
  const std::size_t n = stack.channels.front().data.size();
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (const Plane& p : stack.channels) sq += p.data[i] * p.data[i];
    const double norm = std::sqrt(sq);
    for (Plane& p : out.channels) {
      if (norm <= epsilon) {
        p.data[i] = 0.0;
      } else {
        p.data[i] = std::clamp(p.data[i] / norm, -1.0, 1.0);
      }
    }
  }
  return out;
}

FeatureVolume build_sfoc(const Plane& image, const SfocParams& params) {
  params.validate();
  FeatureVolume volume(image.width, image.height, params.channel_count());

  const ChannelStack first = normalize_group(
      dilated_smooth(first_order_channels(image, params), params.smooth_sigma_first, params.dilation_rates),
      params.epsilon);
  write_group(volume, first, 0);

  if (!params.first_order_only) {
    const ChannelStack second = normalize_group(
        dilated_smooth(second_order_channels(image, params), params.smooth_sigma_second, params.dilation_rates),
        params.epsilon);
    write_group(volume, second, params.orientations);
  }
  return volume;
}

FeatureVolume raw_volume(const Plane& image) {
  FeatureVolume volume(image.width, image.height, 1);
  std::copy(image.data.begin(), image.data.end(), volume.plane(0).begin());
  return volume;
}

void save_feature_volume(const FeatureVolume& volume, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "SFOC 1\n" << volume.width() << ' ' << volume.height() << ' ' << volume.depth() << '\n';
  std::vector<unsigned char> body(volume.data().size() * 4);
  for (std::size_t i = 0; i < volume.data().size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(volume.data()[i]));
    for (int b = 0; b < 4; ++b) body[4 * i + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

FeatureVolume load_feature_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic, version;
  long long w = 0, h = 0, z = 0;
  if (!(in >> magic >> version >> w >> h >> z) || magic != "SFOC" || version != "1") {
    throw IoError("malformed feature volume header");
  }
  if (w <= 0 || h <= 0 || z <= 0 || w * h * z > (1LL << 31)) throw IoError("feature volume dimension overflow");
  if (in.get() != '\n') throw IoError("malformed feature volume header");

  FeatureVolume volume(static_cast<int>(w), static_cast<int>(h), static_cast<int>(z));
  std::vector<unsigned char> body(volume.data().size() * 4);
  in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (in.gcount() != static_cast<std::streamsize>(body.size())) throw IoError("truncated feature volume");
  for (std::size_t i = 0; i < volume.data().size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t{body[4 * i + b]} << (8 * b);
    volume.data()[i] = std::bit_cast<float>(bits);
  }
  return volume;
}

Raster channel_montage(const FeatureVolume& volume, int columns) {
  columns = std::max(1, std::min(columns, volume.depth()));
  const int rows = (volume.depth() + columns - 1) / columns;
  Plane out(columns * volume.width(), rows * volume.height());
  for (int k = 0; k < volume.depth(); ++k) {
    const int ox = (k % columns) * volume.width();
    const int oy = (k / columns) * volume.height();
    for (int y = 0; y < volume.height(); ++y) {
      for (int x = 0; x < volume.width(); ++x) out.at(ox + x, oy + y) = volume.at(x, y, k);
    }
  }
  return Raster::from_plane_clamped(std::move(out));
}

}  // namespace sfoc
