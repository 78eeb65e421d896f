#include "sfoc/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fft.hpp"

namespace sfoc {
namespace {

void check_sizes(const FeatureVolume& templ, const FeatureVolume& search) {
  if (templ.depth() != search.depth()) throw std::invalid_argument("NCC: channel counts differ");
  if (templ.depth() <= 0 || templ.width() <= 0 || templ.height() <= 0) {
    throw std::invalid_argument("NCC: empty template");
  }
  if (templ.width() > search.width() || templ.height() > search.height()) {
    throw std::invalid_argument("NCC: template larger than search area");
  }
}

CorrelationSurface empty_surface(const FeatureVolume& templ, const FeatureVolume& search) {
  CorrelationSurface s;
  s.m = templ.width();
  s.n = templ.height();
  s.M = search.width();
  s.N = search.height();
  s.width = s.M - s.m + 1;
  s.height = s.N - s.n + 1;
  const auto cells = static_cast<std::size_t>(s.width) * s.height;
  s.scores.assign(cells, 0.0);
  s.valid.assign(cells, 0);
  return s;
}

std::vector<std::span<const double>> planes_of(const FeatureVolume& v) {
  std::vector<std::span<const double>> out;
  for (int k = 0; k < v.depth(); ++k) out.push_back(v.plane(k));
  return out;
}

double mean_of(std::span<const double> values) {
  double acc = 0.0;
  for (double v : values) acc += v;
  return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

FeatureVolume shifted(const FeatureVolume& v, double offset) {
  FeatureVolume out = v;
  for (double& x : out.data()) x -= offset;
  return out;
}

}  // namespace

TemplateStats TemplateStats::of(const FeatureVolume& templ) {
  TemplateStats st;
  st.count = static_cast<double>(templ.data().size());
  const double mean = mean_of(templ.data());
  double centered_sq = 0.0;
  for (double v : templ.data()) {
    st.r_t += v;
    st.r_tt += v * v;
    centered_sq += (v - mean) * (v - mean);
  }
  st.denom_t = std::max(0.0, centered_sq);
  return st;
}

SumTable::SumTable(const Plane& values)
    : width_(values.width), height_(values.height),
      cells_(static_cast<std::size_t>(values.width + 1) * (values.height + 1), 0.0) {
  // Column cumulative sum s, then G(x, y) = G(x - 1, y) + s(x, y).
  std::vector<double> column(static_cast<std::size_t>(width_), 0.0);
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  for (int y = 0; y < height_; ++y) {
    double* row = &cells_[(static_cast<std::size_t>(y) + 1) * stride];
    for (int x = 0; x < width_; ++x) {
      column[static_cast<std::size_t>(x)] += values.at(x, y);
      row[x + 1] = row[x] + column[static_cast<std::size_t>(x)];
    }
  }
}

double SumTable::region_sum(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > width_ || y + h > height_) {
    throw std::out_of_range("region_sum: rectangle outside table");
  }
  return at(x + w, y + h) - at(x, y + h) - at(x + w, y) + at(x, y);
}

SumTablePair build_sum_tables(const FeatureVolume& search) {
  Plane sum(search.width(), search.height());
  Plane sum_sq(search.width(), search.height());
  for (int k = 0; k < search.depth(); ++k) {
    const auto plane = search.plane(k);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      sum.data[i] += plane[i];
      sum_sq.data[i] += plane[i] * plane[i];
    }
  }
  return {SumTable(sum), SumTable(sum_sq)};
}

std::size_t CorrelationSurface::valid_count() const {
  std::size_t n_valid = 0;
  for (auto v : valid) n_valid += v != 0;
  return n_valid;
}

CorrelationSurface ncc_naive(const FeatureVolume& templ, const FeatureVolume& search) {
  check_sizes(templ, search);
  const TemplateStats stats = TemplateStats::of(templ);
  if (stats.degenerate()) throw DegenerateError("NCC: template has zero variance");

  const double t_mean = stats.r_t / stats.count;
  FeatureVolume centered = shifted(templ, t_mean);
  CorrelationSurface surface = empty_surface(templ, search);
  const int m = templ.width(), n = templ.height(), z = templ.depth();

  for (int oy = 0; oy < surface.height; ++oy) {
    for (int ox = 0; ox < surface.width; ++ox) {
      double s_sum = 0.0;
      for (int k = 0; k < z; ++k) {
        for (int j = 0; j < n; ++j) {
          for (int i = 0; i < m; ++i) s_sum += search.at(ox + i, oy + j, k);
        }
      }
      const double s_mean = s_sum / stats.count;
      double cross = 0.0;
      double s_var = 0.0;
      for (int k = 0; k < z; ++k) {
        for (int j = 0; j < n; ++j) {
          for (int i = 0; i < m; ++i) {
            const double ds = search.at(ox + i, oy + j, k) - s_mean;
            cross += ds * centered.at(i, j, k);
            s_var += ds * ds;
          }
        }
      }
      const std::size_t idx = surface.index(ox, oy);
      if (s_var <= kDegenerateVariance * stats.count) continue;
      surface.scores[idx] = cross / std::sqrt(s_var * stats.denom_t);
      surface.valid[idx] = 1;
    }
  }
  return surface;
}

int next_smooth_size(int n) {
  if (n <= 1) return 1;
  for (int candidate = n;; ++candidate) {
    int r = candidate;
    for (int p : {2, 3, 5}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return candidate;
  }
}

Plane cross_corr_fft(const FeatureVolume& search, const FeatureVolume& templ) {
  check_sizes(templ, search);
  return detail::correlate_valid(planes_of(search), search.width(), search.height(), planes_of(templ),
                                 templ.width(), templ.height());
}

CorrelationSurface fast_ncc(const FeatureVolume& templ, const FeatureVolume& search) {
  check_sizes(templ, search);
  const TemplateStats stats = TemplateStats::of(templ);
  if (stats.degenerate()) throw DegenerateError("NCC: template has zero variance");

  const FeatureVolume t_centered = shifted(templ, stats.r_t / stats.count);
  const FeatureVolume s_centered = shifted(search, mean_of(search.data()));
  double r_t = 0.0;
  for (double v : t_centered.data()) r_t += v;

  const Plane r_st = cross_corr_fft(s_centered, t_centered);
  const SumTablePair tables = build_sum_tables(s_centered);

  CorrelationSurface surface = empty_surface(templ, search);
  const int m = templ.width(), n = templ.height();
  for (int oy = 0; oy < surface.height; ++oy) {
    for (int ox = 0; ox < surface.width; ++ox) {
      const double r_s = tables.sum.region_sum(ox, oy, m, n);
      const double r_ss = tables.sum_sq.region_sum(ox, oy, m, n);
      const double s_var = r_ss - r_s * r_s / stats.count;
      const std::size_t idx = surface.index(ox, oy);
      if (s_var <= kDegenerateVariance * stats.count) continue;
      const double numerator = r_st.at(ox, oy) - r_s * r_t / stats.count;
      surface.scores[idx] = numerator / std::sqrt(s_var * stats.denom_t);
      surface.valid[idx] = 1;
    }
  }
  return surface;
}

Peak peak_locate(const CorrelationSurface& surface, bool subpixel) {
  Peak best;
  bool found = false;
  for (int y = 0; y < surface.height; ++y) {
    for (int x = 0; x < surface.width; ++x) {
      if (!surface.is_valid(x, y)) continue;
      const double s = surface.score(x, y);
      if (!found || s > best.score) {
        best = {x, y, s, static_cast<double>(x), static_cast<double>(y)};
        found = true;
      }
    }
  }
  if (!found) throw MatchError("peak_locate: no valid scores");

  if (subpixel) {
    auto refine = [&](int dx, int dy) {
      const int x0 = best.x - dx, y0 = best.y - dy, x1 = best.x + dx, y1 = best.y + dy;
      if (x0 < 0 || y0 < 0 || x1 >= surface.width || y1 >= surface.height) return 0.0;
      if (!surface.is_valid(x0, y0) || !surface.is_valid(x1, y1)) return 0.0;
      const double l = surface.score(x0, y0), r = surface.score(x1, y1);
      const double curvature = l - 2.0 * best.score + r;
      if (!(curvature < 0.0)) return 0.0;
      return std::clamp(0.5 * (l - r) / curvature, -0.5, 0.5);
    };
    best.sub_x = best.x + refine(1, 0);
    best.sub_y = best.y + refine(0, 1);
  }
  return best;
}

ComplexityReport complexity_estimate(int m, int n, int M, int N, int z) {
  if (m <= 0 || n <= 0 || M <= 0 || N <= 0 || z <= 0 || m > M || n > N) {
    throw std::invalid_argument("complexity_estimate: need 0 < m <= M, 0 < n <= N, z > 0");
  }
  const double volume = static_cast<double>(M) * N * z;
  ComplexityReport r;
  r.t1 = 4.0 * volume * std::log2(volume);
  r.t2 = 3.0 * m * n * static_cast<double>(z) * (M - m + 1) * (N - n + 1);
  r.ratio = r.t1 / r.t2;
  return r;
}

Plane surface_heatmap(const CorrelationSurface& surface) {
  Plane out(surface.width, surface.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double s = surface.valid[i] ? std::clamp(surface.scores[i], -1.0, 1.0) : -1.0;
    out.data[i] = (s + 1.0) / 2.0;
  }
  return out;
}

}  // namespace sfoc
