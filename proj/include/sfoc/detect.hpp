#pragma once

#include <vector>

#include "sfoc/core.hpp"

namespace sfoc {

/// FAST corner. `score` is the largest sum of (|I(q) - I(p)| - threshold) over
/// a qualifying contiguous arc of the 16-pixel Bresenham circle.
struct InterestPoint {
  int x = 0;
  int y = 0;
  double score = 0.0;

  friend bool operator==(const InterestPoint&, const InterestPoint&) = default;
};

inline constexpr int kFastRadius = 3;

struct BlockGrid {
  int rows = 1;
  int cols = 1;

  /// Square ceil(sqrt(k)) x ceil(sqrt(k)) grid.
  static BlockGrid for_target(int target_count);
};

struct BlockFastParams {
  int target_count = 400;
  double threshold = 0.08;  // about 20/255 on normalized intensities
  int arc_len = 9;
};

/// Segment-test score at (x, y); 0 when the test fails. The caller guarantees
/// a kFastRadius margin.
double fast_score(const Plane& image, int x, int y, double threshold, int arc_len);

/// FAST segment test on every pixel with a kFastRadius margin, followed by
/// 3x3 non-maximum suppression on the score (a point survives unless a
/// neighbour is strictly stronger, so plateaus keep all their pixels).
/// Sorted by (y, x).
std::vector<InterestPoint> fast_corners(const Plane& image, double threshold, int arc_len = 9);

/// Grid-partitioned FAST: the strongest corner per block, a single retry at
/// half threshold for empty blocks, trimmed to target_count by strength.
/// Ordered by (block row, block col).
std::vector<InterestPoint> block_fast(const Plane& image, const BlockFastParams& params = {});

}  // namespace sfoc
