#include "sfoc/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sfoc {
namespace {

void require_positive_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
}

std::vector<double> sample(int radius, auto&& fn) {
  std::vector<double> out(static_cast<std::size_t>(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k) out[static_cast<std::size_t>(k + radius)] = fn(static_cast<double>(k));
  return out;
}

double weighted_moment(const std::vector<double>& w, int radius, int power) {
  double acc = 0.0;
  for (int k = -radius; k <= radius; ++k) acc += w[static_cast<std::size_t>(k + radius)] * std::pow(k, power);
  return acc;
}

double vector_sum(const std::vector<double>& w) {
  double acc = 0.0;
  for (double v : w) acc += v;
  return acc;
}

Taps1d make_taps(std::vector<double> w, int radius) { return {radius, 1, std::move(w)}; }

SeparableKernel transposed(const SeparableKernel& k) {
  SeparableKernel t = k;
  t.first_axis = k.first_axis == Axis::kX ? Axis::kY : Axis::kX;
  return t;
}

// Correlate each row with the taps; edge replication through a padded copy.
Plane pass_x(const Plane& in, const Taps1d& taps, bool differential) {
  Plane out(in.width, in.height);
  const int reach = taps.reach();
  std::vector<double> padded(static_cast<std::size_t>(in.width + 2 * reach));
  for (int y = 0; y < in.height; ++y) {
    const double* row = &in.data[in.index(0, y)];
    for (int i = 0; i < static_cast<int>(padded.size()); ++i) {
      padded[static_cast<std::size_t>(i)] = row[std::clamp(i - reach, 0, in.width - 1)];
    }
    double* dst = &out.data[out.index(0, y)];
    for (int x = 0; x < in.width; ++x) {
      const double* center = &padded[static_cast<std::size_t>(x + reach)];
      const double base = differential ? *center : 0.0;
      double acc = 0.0;
      for (int k = -taps.radius; k <= taps.radius; ++k) {
        acc += taps.weights[static_cast<std::size_t>(k + taps.radius)] * (center[k * taps.step] - base);
      }
      dst[x] = acc;
    }
  }
  return out;
}

// Correlate each column with the taps, accumulating whole rows at a time.
Plane pass_y(const Plane& in, const Taps1d& taps, bool differential) {
  Plane out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    double* dst = &out.data[out.index(0, y)];
    const double* center = &in.data[in.index(0, y)];
    for (int k = -taps.radius; k <= taps.radius; ++k) {
      const double w = taps.weights[static_cast<std::size_t>(k + taps.radius)];
      const int sy = std::clamp(y + k * taps.step, 0, in.height - 1);
      const double* src = &in.data[in.index(0, sy)];
      if (differential) {
        for (int x = 0; x < in.width; ++x) dst[x] += w * (src[x] - center[x]);
      } else {
        for (int x = 0; x < in.width; ++x) dst[x] += w * src[x];
      }
    }
  }
  return out;
}

}  // namespace

double Kernel::sum() const {
  double acc = 0.0;
  for (double v : taps) acc += v;
  return acc;
}

Kernel Kernel::impulse() {
  Kernel k(0);
  k.taps[0] = 1.0;
  return k;
}

double Taps1d::sum() const { return vector_sum(weights); }

Kernel SeparableKernel::to_kernel() const {
  const int rf = first.reach();
  const int rs = second.reach();
  Kernel k(std::max(rf, rs));
  for (int i = -first.radius; i <= first.radius; ++i) {
    for (int j = -second.radius; j <= second.radius; ++j) {
      const double w = first.weights[static_cast<std::size_t>(i + first.radius)] *
                       second.weights[static_cast<std::size_t>(j + second.radius)];
      const int a = i * first.step;
      const int b = j * second.step;
      if (first_axis == Axis::kX) {
        k.at(a, b) = w;
      } else {
        k.at(b, a) = w;
      }
    }
  }
  return k;
}

int kernel_radius(double sigma) {
  require_positive_sigma(sigma);
  return static_cast<int>(std::ceil(3.0 * sigma));
}

Kernel gaussian_kernel(double sigma, int radius) {
  require_positive_sigma(sigma);
  if (radius < kernel_radius(sigma)) throw std::invalid_argument("gaussian_kernel: radius below ceil(3 sigma)");
  Kernel k(radius);
  const double norm = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      k.at(dx, dy) = norm * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  }
  const double total = k.sum();
  for (double& t : k.taps) t /= total;
  return k;
}

Taps1d gaussian_taps(double sigma, int radius, int step) {
  require_positive_sigma(sigma);
  if (step < 1) throw std::invalid_argument("gaussian_taps: step must be >= 1");
  auto w = sample(radius, [&](double t) { return std::exp(-t * t / (2.0 * sigma * sigma)); });
  const double total = vector_sum(w);
  for (double& v : w) v /= total;
  return {radius, step, std::move(w)};
}

SteerableBasisG1 g1_basis(double sigma) {
  const int r = kernel_radius(sigma);
  const double s2 = sigma * sigma;
  // Derivative factor along the steering axis, smoothing factor across it.
  auto deriv = sample(r, [&](double t) { return -t * std::exp(-t * t / (2.0 * s2)); });
  const double ramp_gain = -weighted_moment(deriv, r, 1);
  for (double& v : deriv) v /= ramp_gain;
  const Taps1d smooth = gaussian_taps(sigma, r);

  SteerableBasisG1 basis;
  basis.sigma = sigma;
  basis.sx = SeparableKernel{Axis::kX, make_taps(deriv, r), smooth, true};
  basis.sy = transposed(basis.sx);
  basis.kx = basis.sx.to_kernel();
  basis.ky = basis.sy.to_kernel();
  return basis;
}

Kernel steer_g1(const SteerableBasisG1& basis, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Kernel k(basis.kx.radius);
  for (std::size_t i = 0; i < k.taps.size(); ++i) k.taps[i] = c * basis.kx.taps[i] + s * basis.ky.taps[i];
  return k;
}

SteerableBasisG2 g2_basis(double sigma) {
  const int r = kernel_radius(sigma);
  const double s2 = sigma * sigma;
  const auto gauss = sample(r, [&](double t) { return std::exp(-t * t / (2.0 * s2)); });
  const double gauss_sum = vector_sum(gauss);

  auto curvature = sample(r, [&](double t) { return (t * t / s2 - 1.0) * std::exp(-t * t / (2.0 * s2)); });
  const double offset = vector_sum(curvature) / gauss_sum;
  for (std::size_t i = 0; i < curvature.size(); ++i) curvature[i] -= offset * gauss[i];
  const double scale = 1.0 / (0.5 * weighted_moment(curvature, r, 2));
  for (double& v : curvature) v *= scale;

  std::vector<double> smooth(gauss);
  for (double& v : smooth) v /= gauss_sum;

  // Gxy shares Gxx's constant: Gxy / Gxx = (x y / s2) / (x^2 / s2 - 1).
  auto odd_first = sample(r, [&](double t) { return scale * t * std::exp(-t * t / (2.0 * s2)) / s2; });
  auto odd_second = sample(r, [&](double t) { return t * std::exp(-t * t / (2.0 * s2)) / gauss_sum; });

  SteerableBasisG2 basis;
  basis.sigma = sigma;
  basis.sxx = SeparableKernel{Axis::kX, make_taps(curvature, r), make_taps(smooth, r), true};
  basis.syy = transposed(basis.sxx);
  basis.sxy = SeparableKernel{Axis::kX, make_taps(odd_first, r), make_taps(odd_second, r), true};
  basis.kxx = basis.sxx.to_kernel();
  basis.kyy = basis.syy.to_kernel();
  basis.kxy = basis.sxy.to_kernel();
  return basis;
}

Kernel steer_g2(const SteerableBasisG2& basis, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Kernel k(basis.kxx.radius);
  for (std::size_t i = 0; i < k.taps.size(); ++i) {
    k.taps[i] = c * c * basis.kxx.taps[i] + s * s * basis.kyy.taps[i] + 2.0 * s * c * basis.kxy.taps[i];
  }
  return k;
}

Kernel dilated_gaussian(double sigma, int radius, int rate) {
  if (rate < 1) throw std::invalid_argument("dilated_gaussian: rate must be >= 1");
  const Kernel dense = gaussian_kernel(sigma, radius);
  Kernel k(radius * rate);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) k.at(dx * rate, dy * rate) = dense.at(dx, dy);
  }
  return k;
}

Plane convolve2d(const Plane& image, const Kernel& kernel) {
  if (kernel.side() > image.width || kernel.side() > image.height) {
    throw std::invalid_argument("convolve2d: kernel larger than image");
  }
  Plane out(image.width, image.height);
  const int r = kernel.radius;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) acc += kernel.at(dx, dy) * image.clamped(x + dx, y + dy);
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

Plane convolve_separable(const Plane& image, const SeparableKernel& kernel) {
  if (kernel.first_axis == Axis::kX) {
    return pass_y(pass_x(image, kernel.first, kernel.first_zero_sum), kernel.second, false);
  }
  return pass_x(pass_y(image, kernel.first, kernel.first_zero_sum), kernel.second, false);
}

}  // namespace sfoc
