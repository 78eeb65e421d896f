#pragma once

#include <span>
#include <vector>

#include "sfoc/core.hpp"

namespace sfoc::detail {

/// Multi-channel cross-correlation over valid offsets:
/// out(x, y) = sum_k sum_{i,j} search_k(x + i, y + j) * templ_k(i, j)
/// for x in [0, sw - tw], y in [0, sh - th]. Channels are accumulated in the
/// frequency domain in index order, then a single inverse transform is run.
Plane correlate_valid(const std::vector<std::span<const double>>& search, int sw, int sh,
                      const std::vector<std::span<const double>>& templ, int tw, int th);

}  // namespace sfoc::detail
