#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfoc {

// Error taxonomy. The CLI maps each family to its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Rank-deficient or otherwise numerically unusable geometric configuration.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Matching produced nothing usable (no control points, no consensus).
class MatchError : public Error {
 public:
  using Error::Error;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
double distance(Point2 a, Point2 b);

/// Dense real-valued plane, row-major. Used for intensities, filter
/// responses, and single feature channels alike.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0);

  double at(int x, int y) const { return data[index(x, y)]; }
  double& at(int x, int y) { return data[index(x, y)]; }

  /// Edge-replicated access: coordinates are clamped into the plane.
  double clamped(int x, int y) const;

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
};

/// Runs body(i) for i in [0, count) on up to `workers` threads. Each index is
/// processed exactly once; callers write results into per-index slots so the
/// output never depends on scheduling.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace sfoc
