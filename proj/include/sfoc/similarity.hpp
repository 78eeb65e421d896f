#pragma once

#include <cstdint>
#include <vector>

#include "sfoc/core.hpp"
#include "sfoc/descriptor.hpp"

namespace sfoc {

/// Per-element variance at or below this marks a window as degenerate.
inline constexpr double kDegenerateVariance = 1e-12;

/// Template-only terms of the factored NCC.
struct TemplateStats {
  double r_t = 0.0;      // sum of all template features
  double r_tt = 0.0;     // sum of squared template features
  double count = 0.0;    // m * n * z
  double denom_t = 0.0;  // r_tt - r_t^2 / count, computed from centered values, clamped at 0

  static TemplateStats of(const FeatureVolume& templ);
  bool degenerate() const { return denom_t <= kDegenerateVariance * count; }
};

/// Exclusive-prefix summed-area table of size (width+1) x (height+1):
/// at(x, y) is the sum of all cells with column < x and row < y.
class SumTable {
 public:
  SumTable() = default;
  explicit SumTable(const Plane& values);

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int x, int y) const { return cells_[static_cast<std::size_t>(y) * (width_ + 1) + x]; }
  /// Sum over the w x h rectangle with top-left (x, y).
  double region_sum(int x, int y, int w, int h) const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> cells_;
};

/// Tables over the channel-summed features and channel-summed squares.
struct SumTablePair {
  SumTable sum;
  SumTable sum_sq;
};

SumTablePair build_sum_tables(const FeatureVolume& search);
inline double region_sum(const SumTable& table, int x, int y, int w, int h) {
  return table.region_sum(x, y, w, h);
}

/// NCC scores over all valid offsets x in [0, M-m], y in [0, N-n].
struct CorrelationSurface {
  int width = 0;   // M - m + 1
  int height = 0;  // N - n + 1
  int m = 0, n = 0, M = 0, N = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> valid;

  double score(int x, int y) const { return scores[index(x, y)]; }
  bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  std::size_t valid_count() const;
};

/// Direct-summation NCC; the correctness oracle for fast_ncc.
CorrelationSurface ncc_naive(const FeatureVolume& templ, const FeatureVolume& search);

/// Smallest n' >= n whose prime factors are all <= 5.
int next_smooth_size(int n);

/// R_ST over valid offsets via zero-padded FFTs (search spectrum times the
/// conjugate template spectrum), summed across channels.
Plane cross_corr_fft(const FeatureVolume& search, const FeatureVolume& templ);

/// Factored NCC: FFT numerator, summed-area-table window statistics, and
/// template statistics. The search volume is shifted by its global mean
/// first (NCC is offset invariant), which keeps the prefix sums small.
CorrelationSurface fast_ncc(const FeatureVolume& templ, const FeatureVolume& search);

struct Peak {
  int x = 0;
  int y = 0;
  double score = 0.0;
  double sub_x = 0.0;  // equals x unless subpixel refinement moved it
  double sub_y = 0.0;
};

/// Arg-max over valid scores; ties go to the smallest y, then smallest x.
/// Optional separable quadratic refinement on the 3x3 neighbourhood.
Peak peak_locate(const CorrelationSurface& surface, bool subpixel = false);

/// Multiplication-count model of the fast and naive paths.
struct ComplexityReport {
  double t1 = 0.0;     // 4 M N z log2(M N z)
  double t2 = 0.0;     // 3 m n z (M - m + 1)(N - n + 1)
  double ratio = 0.0;  // t1 / t2
};

ComplexityReport complexity_estimate(int m, int n, int M, int N, int z);

/// Heatmap view of a surface: (s + 1) / 2, invalid cells written as -1
/// before the shift (so they read as 0).
Plane surface_heatmap(const CorrelationSurface& surface);

}  // namespace sfoc
