#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "sfoc/similarity.hpp"

namespace sfoc::detail {
namespace {

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
std::unique_ptr<T[], FftwDeleter> fftw_array(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return std::unique_ptr<T[], FftwDeleter>(p);
}

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// The FFTW planner is not re-entrant; plans are created once per size under a
// lock and then executed through the thread-safe new-array interface.
// FFTW_ESTIMATE keeps plan selection (and therefore rounding) deterministic.
PlanPair plans_for(int rows, int cols) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, PlanPair> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find({rows, cols});
  if (it != cache.end()) return it->second;

  const auto real_n = static_cast<std::size_t>(rows) * cols;
  const auto complex_n = static_cast<std::size_t>(rows) * (cols / 2 + 1);
  auto real = fftw_array<double>(real_n);
  auto spectrum = fftw_array<fftw_complex>(complex_n);
  PlanPair plans;
  plans.forward = fftw_plan_dft_r2c_2d(rows, cols, real.get(), spectrum.get(), FFTW_ESTIMATE);
  plans.inverse = fftw_plan_dft_c2r_2d(rows, cols, spectrum.get(), real.get(), FFTW_ESTIMATE);
  if (plans.forward == nullptr || plans.inverse == nullptr) throw Error("FFTW planning failed");
  cache.emplace(std::make_pair(rows, cols), plans);
  return plans;
}

}  // namespace

Plane correlate_valid(const std::vector<std::span<const double>>& search, int sw, int sh,
                      const std::vector<std::span<const double>>& templ, int tw, int th) {
  if (search.size() != templ.size()) throw std::invalid_argument("correlate_valid: channel count mismatch");
  const int cols = next_smooth_size(sw + tw - 1);
  const int rows = next_smooth_size(sh + th - 1);
  const PlanPair plans = plans_for(rows, cols);

  const auto real_n = static_cast<std::size_t>(rows) * cols;
  const int spec_cols = cols / 2 + 1;
  const auto complex_n = static_cast<std::size_t>(rows) * spec_cols;
  auto real = fftw_array<double>(real_n);
  auto s_spec = fftw_array<fftw_complex>(complex_n);
  auto t_spec = fftw_array<fftw_complex>(complex_n);
  auto accum = fftw_array<fftw_complex>(complex_n);
  for (std::size_t i = 0; i < complex_n; ++i) accum[i][0] = accum[i][1] = 0.0;

  auto load = [&](std::span<const double> src, int w, int h) {
    std::fill(real.get(), real.get() + real_n, 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        real[static_cast<std::size_t>(y) * cols + x] = src[static_cast<std::size_t>(y) * w + x];
      }
    }
  };

  for (std::size_t k = 0; k < search.size(); ++k) {
    load(search[k], sw, sh);
    fftw_execute_dft_r2c(plans.forward, real.get(), s_spec.get());
    load(templ[k], tw, th);
    fftw_execute_dft_r2c(plans.forward, real.get(), t_spec.get());
    for (std::size_t i = 0; i < complex_n; ++i) {
      const double sr = s_spec[i][0], si = s_spec[i][1];
      const double tr = t_spec[i][0], ti = t_spec[i][1];
      // S * conj(T)
      accum[i][0] += sr * tr + si * ti;
      accum[i][1] += si * tr - sr * ti;
    }
  }

  fftw_execute_dft_c2r(plans.inverse, accum.get(), real.get());
  const double norm = 1.0 / static_cast<double>(real_n);
  Plane out(sw - tw + 1, sh - th + 1);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) out.at(x, y) = real[static_cast<std::size_t>(y) * cols + x] * norm;
  }
  return out;
}

}  // namespace sfoc::detail
