#include "sfoc/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace sfoc {

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

Plane::Plane(int w, int h, double fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw std::invalid_argument("Plane: negative dimensions");
  data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

double Plane::clamped(int x, int y) const {
  x = std::clamp(x, 0, width - 1);
  y = std::clamp(y, 0, height - 1);
  return data[index(x, y)];
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
  const std::size_t n_threads =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(n_threads - 1);
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sfoc
