#include "sfoc/detect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

namespace sfoc {
namespace {

constexpr std::array<std::array<int, 2>, 16> kCircle{{{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1},
                                                      {2, 2}, {1, 3}, {0, 3}, {-1, 3}, {-2, 2}, {-3, 1},
                                                      {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}}};

// Best qualifying arc for one polarity; excess[i] > 0 marks a passing pixel.
double best_arc(const std::array<double, 16>& excess, int arc_len) {
  int passing = 0;
  double total = 0.0;
  for (double e : excess) {
    if (e > 0.0) {
      ++passing;
      total += e;
    }
  }
  if (passing < arc_len) return 0.0;
  if (passing == 16) return total;

  // Start scanning right after a failing pixel so no run wraps past the start.
  int start = 0;
  while (excess[static_cast<std::size_t>(start)] > 0.0) ++start;
  double best = 0.0;
  int run = 0;
  double run_sum = 0.0;
  for (int step = 1; step <= 16; ++step) {
    const double e = excess[static_cast<std::size_t>((start + step) % 16)];
    if (e > 0.0) {
      ++run;
      run_sum += e;
    } else {
      if (run >= arc_len) best = std::max(best, run_sum);
      run = 0;
      run_sum = 0.0;
    }
  }
  if (run >= arc_len) best = std::max(best, run_sum);
  return best;
}

bool suppressed(const Plane& scores, int x, int y) {
  const double s = scores.at(x, y);
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const int nx = x + dx, ny = y + dy;
      if (!scores.contains(nx, ny)) continue;
      if (scores.at(nx, ny) > s) return true;
    }
  }
  return false;
}

bool stronger(const InterestPoint& a, const InterestPoint& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

}  // namespace

BlockGrid BlockGrid::for_target(int target_count) {
  if (target_count < 1) throw std::invalid_argument("BlockGrid: target_count must be >= 1");
  int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(target_count))));
  while (side * side < target_count) ++side;
  while (side > 1 && (side - 1) * (side - 1) >= target_count) --side;
  return {side, side};
}

double fast_score(const Plane& image, int x, int y, double threshold, int arc_len) {
  const double center = image.at(x, y);
  std::array<double, 16> brighter{};
  std::array<double, 16> darker{};
  for (std::size_t i = 0; i < kCircle.size(); ++i) {
    const double diff = image.at(x + kCircle[i][0], y + kCircle[i][1]) - center;
    brighter[i] = diff - threshold;
    darker[i] = -diff - threshold;
  }
  return std::max(best_arc(brighter, arc_len), best_arc(darker, arc_len));
}

std::vector<InterestPoint> fast_corners(const Plane& image, double threshold, int arc_len) {
  if (!(threshold > 0.0)) throw std::invalid_argument("fast_corners: threshold must be positive");
  if (arc_len < 1 || arc_len > 16) throw std::invalid_argument("fast_corners: arc_len must be in [1, 16]");
  std::vector<InterestPoint> out;
  if (image.width < 2 * kFastRadius + 1 || image.height < 2 * kFastRadius + 1) return out;

  Plane scores(image.width, image.height);
  for (int y = kFastRadius; y < image.height - kFastRadius; ++y) {
    for (int x = kFastRadius; x < image.width - kFastRadius; ++x) {
      scores.at(x, y) = fast_score(image, x, y, threshold, arc_len);
    }
  }
  for (int y = kFastRadius; y < image.height - kFastRadius; ++y) {
    for (int x = kFastRadius; x < image.width - kFastRadius; ++x) {
      if (scores.at(x, y) > 0.0 && !suppressed(scores, x, y)) out.push_back({x, y, scores.at(x, y)});
    }
  }
  return out;
}

std::vector<InterestPoint> block_fast(const Plane& image, const BlockFastParams& params) {
  const BlockGrid grid = BlockGrid::for_target(params.target_count);
  const std::vector<InterestPoint> base = fast_corners(image, params.threshold, params.arc_len);
  std::optional<std::vector<InterestPoint>> relaxed;

  auto block_of = [&](const InterestPoint& p) {
    const int col = static_cast<int>(static_cast<long long>(p.x) * grid.cols / image.width);
    const int row = static_cast<int>(static_cast<long long>(p.y) * grid.rows / image.height);
    return row * grid.cols + col;
  };
  auto strongest_per_block = [&](const std::vector<InterestPoint>& corners) {
    std::vector<std::optional<InterestPoint>> best(static_cast<std::size_t>(grid.rows * grid.cols));
    for (const auto& p : corners) {
      auto& slot = best[static_cast<std::size_t>(block_of(p))];
      if (!slot || stronger(p, *slot)) slot = p;
    }
    return best;
  };

  auto picks = strongest_per_block(base);
  for (std::size_t b = 0; b < picks.size(); ++b) {
    if (picks[b]) continue;
    if (!relaxed) relaxed = fast_corners(image, params.threshold / 2.0, params.arc_len);
    for (const auto& p : *relaxed) {
      if (static_cast<std::size_t>(block_of(p)) == b && (!picks[b] || stronger(p, *picks[b]))) picks[b] = p;
    }
  }

  std::vector<std::pair<int, InterestPoint>> chosen;
  for (std::size_t b = 0; b < picks.size(); ++b) {
    if (picks[b]) chosen.emplace_back(static_cast<int>(b), *picks[b]);
  }
  if (static_cast<int>(chosen.size()) > params.target_count) {
    std::sort(chosen.begin(), chosen.end(), [](const auto& a, const auto& b) { return stronger(a.second, b.second); });
    chosen.resize(static_cast<std::size_t>(params.target_count));
    std::sort(chosen.begin(), chosen.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  std::vector<InterestPoint> out;
  out.reserve(chosen.size());
  for (const auto& [block, p] : chosen) out.push_back(p);
  return out;
}

}  // namespace sfoc
