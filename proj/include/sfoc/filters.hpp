#pragma once

#include <vector>

#include "sfoc/core.hpp"

namespace sfoc {

/// Square filter kernel of side 2*radius+1, anchored at its center.
/// Kernels are applied as correlations: out(p) = sum_q k(q) * in(p + q).
struct Kernel {
  int radius = 0;
  std::vector<double> taps;  // row-major, dy outer

  Kernel() = default;
  explicit Kernel(int r) : radius(r), taps(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)), 0.0) {}

  int side() const { return 2 * radius + 1; }
  double at(int dx, int dy) const { return taps[index(dx, dy)]; }
  double& at(int dx, int dy) { return taps[index(dx, dy)]; }
  double sum() const;

  static Kernel impulse();

 private:
  std::size_t index(int dx, int dy) const {
    return static_cast<std::size_t>((dy + radius) * side() + (dx + radius));
  }
};

/// One-dimensional taps at offsets k*step for k in [-radius, radius].
struct Taps1d {
  int radius = 0;
  int step = 1;
  std::vector<double> weights;

  double sum() const;
  int reach() const { return radius * step; }
};

enum class Axis { kX, kY };

/// Outer-product kernel: `first` runs along `first_axis`, `second` along the
/// other axis. When `first` is zero-sum it is applied in differential form,
/// sum_k w_k * (in(p + k) - in(p)), so constant inputs give exactly zero and
/// negated inputs give exactly negated outputs.
struct SeparableKernel {
  Axis first_axis = Axis::kX;
  Taps1d first;
  Taps1d second;
  bool first_zero_sum = false;

  Kernel to_kernel() const;
};

struct SteerableBasisG1 {
  double sigma = 0.0;
  Kernel kx;
  Kernel ky;
  SeparableKernel sx;
  SeparableKernel sy;
};

struct SteerableBasisG2 {
  double sigma = 0.0;
  Kernel kxx;
  Kernel kyy;
  Kernel kxy;
  SeparableKernel sxx;
  SeparableKernel syy;
  SeparableKernel sxy;
};

/// Truncation radius used throughout: ceil(3 sigma).
int kernel_radius(double sigma);

/// Sampled isotropic Gaussian renormalized to unit sum. Requires sigma > 0
/// and radius >= ceil(3 sigma).
Kernel gaussian_kernel(double sigma, int radius);
Taps1d gaussian_taps(double sigma, int radius, int step = 1);

/// First-derivative basis, scaled so correlating the ramp I(x, y) = x with kx
/// gives -1 (the sign of the analytic derivative kernel's prefactor).
SteerableBasisG1 g1_basis(double sigma);
Kernel steer_g1(const SteerableBasisG1& basis, double theta);

/// Second-derivative basis {Gxx, Gyy, Gxy} sharing one scale constant, chosen
/// so kxx maps I = x^2 / 2 to +1. kxx/kyy are re-centered to zero sum by
/// subtracting a multiple of the sampled Gaussian.
SteerableBasisG2 g2_basis(double sigma);
/// cos^2 * kxx + sin^2 * kyy + 2 sin cos * kxy: the second derivative along
/// (cos theta, sin theta).
Kernel steer_g2(const SteerableBasisG2& basis, double theta);

/// Gaussian taps spread onto a lattice with spacing `rate` (zeros between).
Kernel dilated_gaussian(double sigma, int radius, int rate);

/// Brute-force 2-D correlation with edge replication. Same-size output.
/// Throws std::invalid_argument when the kernel is larger than the image.
Plane convolve2d(const Plane& image, const Kernel& kernel);

/// Two-pass equivalent of convolve2d(image, kernel.to_kernel()).
Plane convolve_separable(const Plane& image, const SeparableKernel& kernel);

}  // namespace sfoc
