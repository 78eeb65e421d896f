#include "sfoc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>

namespace sfoc {
namespace {

constexpr double kRankTolerance = 1e-10;

// Isotropic normalization: centroid to the origin, mean distance sqrt(2).
struct Normalizer {
  double cx = 0.0, cy = 0.0, s = 1.0;

  static Normalizer of(std::span<const Point2> pts) {
    Normalizer n;
    for (const auto& p : pts) {
      n.cx += p.x;
      n.cy += p.y;
    }
    n.cx /= static_cast<double>(pts.size());
    n.cy /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += std::hypot(p.x - n.cx, p.y - n.cy);
    mean_dist /= static_cast<double>(pts.size());
    if (!(mean_dist > 0.0)) throw DegenerateError("all points coincide");
    n.s = std::sqrt(2.0) / mean_dist;
    return n;
  }

  Point2 apply(Point2 p) const { return {s * (p.x - cx), s * (p.y - cy)}; }
  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d m;
    m << s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0;
    return m;
  }
  Eigen::Matrix3d inverse_matrix() const {
    Eigen::Matrix3d m;
    m << 1.0 / s, 0.0, cx, 0.0, 1.0 / s, cy, 0.0, 0.0, 1.0;
    return m;
  }
};

struct NormalizedPairs {
  Normalizer src, dst;
  std::vector<Point2> u, v;  // normalized src, dst
};

NormalizedPairs normalize(std::span<const PointPair> pairs) {
  std::vector<Point2> src, dst;
  for (const auto& p : pairs) {
    src.push_back(p.src);
    dst.push_back(p.dst);
  }
  NormalizedPairs out{Normalizer::of(src), Normalizer::of(dst), {}, {}};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out.u.push_back(out.src.apply(src[i]));
    out.v.push_back(out.dst.apply(dst[i]));
  }
  return out;
}

void check_count(std::span<const PointPair> pairs, ModelKind kind) {
  if (static_cast<int>(pairs.size()) < min_sample(kind)) {
    throw std::invalid_argument("estimate " + model_name(kind) + ": need at least " +
                                std::to_string(min_sample(kind)) + " pairs");
  }
}

// Least squares with an explicit rank check on the design matrix.
Eigen::MatrixXd solve_least_squares(const Eigen::MatrixXd& design, const Eigen::MatrixXd& rhs) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(sv.size() - 1) > kRankTolerance * sv(0))) {
    throw DegenerateError("rank-deficient point configuration");
  }
  return svd.solve(rhs);
}

bool collinear(Point2 a, Point2 b, Point2 c) {
  const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  const double scale = std::max({std::hypot(b.x - a.x, b.y - a.y), std::hypot(c.x - a.x, c.y - a.y), 1e-300});
  return std::abs(cross) <= 1e-9 * scale * scale;
}

bool sample_degenerate(std::span<const PointPair> sample, ModelKind kind) {
  if (kind == ModelKind::kAffine) {
    return collinear(sample[0].src, sample[1].src, sample[2].src) ||
           collinear(sample[0].dst, sample[1].dst, sample[2].dst);
  }
  if (kind == ModelKind::kProjective) {
    for (std::size_t i = 0; i < sample.size(); ++i) {
      for (std::size_t j = i + 1; j < sample.size(); ++j) {
        for (std::size_t k = j + 1; k < sample.size(); ++k) {
          if (collinear(sample[i].src, sample[j].src, sample[k].src) ||
              collinear(sample[i].dst, sample[j].dst, sample[k].dst)) {
            return true;
          }
        }
      }
    }
  }
  return false;
}

// Re-expresses a polynomial in (u, v) = (s x + t, s y + w) in terms of (x, y).
std::array<double, 6> expand_poly(const std::array<double, 6>& c, double s, double tx, double ty) {
  return {c[0] + c[1] * tx + c[2] * ty + c[3] * tx * tx + c[4] * tx * ty + c[5] * ty * ty,
          s * (c[1] + 2.0 * c[3] * tx + c[4] * ty),
          s * (c[2] + c[4] * tx + 2.0 * c[5] * ty),
          s * s * c[3],
          s * s * c[4],
          s * s * c[5]};
}

double poly_eval(const std::array<double, 6>& c, double x, double y) {
  return c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
}

}  // namespace

AffineTransform AffineTransform::inverse() const {
  const double det = determinant();
  const double scale = std::max({std::abs(a1), std::abs(a2), std::abs(b1), std::abs(b2)});
  if (!(std::abs(det) > 1e-12 * scale * scale)) throw DegenerateError("affine transform is not invertible");
  AffineTransform inv;
  inv.a1 = b2 / det;
  inv.a2 = -a2 / det;
  inv.b1 = -b1 / det;
  inv.b2 = a1 / det;
  inv.a0 = -(inv.a1 * a0 + inv.a2 * b0);
  inv.b0 = -(inv.b1 * a0 + inv.b2 * b0);
  return inv;
}

ProjectiveTransform ProjectiveTransform::from_matrix(const Eigen::Matrix3d& m) {
  if (!m.allFinite() || !(std::abs(m(2, 2)) > 1e-12 * m.cwiseAbs().maxCoeff())) {
    throw DegenerateError("homography cannot be normalized");
  }
  return {m / m(2, 2)};
}

Point2 ProjectiveTransform::apply(Point2 p) const {
  const double w = h(2, 0) * p.x + h(2, 1) * p.y + h(2, 2);
  if (w == 0.0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  return {(h(0, 0) * p.x + h(0, 1) * p.y + h(0, 2)) / w, (h(1, 0) * p.x + h(1, 1) * p.y + h(1, 2)) / w};
}

ProjectiveTransform ProjectiveTransform::inverse() const {
  Eigen::FullPivLU<Eigen::Matrix3d> lu(h);
  if (!lu.isInvertible()) throw DegenerateError("homography is not invertible");
  return from_matrix(lu.inverse());
}

Point2 Poly2Transform::apply(Point2 p) const { return {poly_eval(cx, p.x, p.y), poly_eval(cy, p.x, p.y)}; }

std::optional<Point2> Poly2Transform::solve(Point2 target, Point2 seed) const {
  Point2 p = seed;
  for (int it = 0; it < 30; ++it) {
    const Point2 f = apply(p);
    const double rx = f.x - target.x, ry = f.y - target.y;
    if (std::hypot(rx, ry) < 1e-10) return p;
    const double j11 = cx[1] + 2.0 * cx[3] * p.x + cx[4] * p.y;
    const double j12 = cx[2] + cx[4] * p.x + 2.0 * cx[5] * p.y;
    const double j21 = cy[1] + 2.0 * cy[3] * p.x + cy[4] * p.y;
    const double j22 = cy[2] + cy[4] * p.x + 2.0 * cy[5] * p.y;
    const double det = j11 * j22 - j12 * j21;
    if (!(std::abs(det) > 1e-14)) return std::nullopt;
    p.x -= (j22 * rx - j12 * ry) / det;
    p.y -= (-j21 * rx + j11 * ry) / det;
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
  }
  const Point2 f = apply(p);
  if (std::hypot(f.x - target.x, f.y - target.y) < 1e-6) return p;
  return std::nullopt;
}

ModelKind kind_of(const Transform& t) {
  if (std::holds_alternative<AffineTransform>(t)) return ModelKind::kAffine;
  if (std::holds_alternative<ProjectiveTransform>(t)) return ModelKind::kProjective;
  return ModelKind::kPoly2;
}

std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kAffine: return "affine";
    case ModelKind::kProjective: return "projective";
    case ModelKind::kPoly2: return "poly2";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "affine") return ModelKind::kAffine;
  if (name == "projective") return ModelKind::kProjective;
  if (name == "poly2") return ModelKind::kPoly2;
  throw std::invalid_argument("unknown model kind: " + name);
}

int min_sample(ModelKind kind) {
  switch (kind) {
    case ModelKind::kAffine: return 3;
    case ModelKind::kProjective: return 4;
    case ModelKind::kPoly2: return 6;
  }
  return 0;
}

Point2 apply(const Transform& t, Point2 p) {
  return std::visit([p](const auto& m) { return m.apply(p); }, t);
}

std::vector<double> coefficients(const Transform& t) {
  if (const auto* a = std::get_if<AffineTransform>(&t)) return {a->a0, a->a1, a->a2, a->b0, a->b1, a->b2};
  if (const auto* h = std::get_if<ProjectiveTransform>(&t)) {
    std::vector<double> out;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out.push_back(h->h(r, c));
    }
    return out;
  }
  const auto& p = std::get<Poly2Transform>(t);
  std::vector<double> out(p.cx.begin(), p.cx.end());
  out.insert(out.end(), p.cy.begin(), p.cy.end());
  return out;
}

AffineTransform estimate_affine(std::span<const PointPair> pairs) {
  check_count(pairs, ModelKind::kAffine);
  const NormalizedPairs np = normalize(pairs);
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::MatrixXd rhs(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    design.row(i) << 1.0, np.u[k].x, np.u[k].y;
    rhs.row(i) << np.v[k].x, np.v[k].y;
  }
  const Eigen::MatrixXd sol = solve_least_squares(design, rhs);
  Eigen::Matrix3d m;
  m << sol(1, 0), sol(2, 0), sol(0, 0), sol(1, 1), sol(2, 1), sol(0, 1), 0.0, 0.0, 1.0;
  const Eigen::Matrix3d full = np.dst.inverse_matrix() * m * np.src.matrix();
  return {full(0, 2), full(0, 0), full(0, 1), full(1, 2), full(1, 0), full(1, 1)};
}

ProjectiveTransform estimate_projective(std::span<const PointPair> pairs) {
  check_count(pairs, ModelKind::kProjective);
  const NormalizedPairs np = normalize(pairs);
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(2 * n, 9), 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double x = np.u[k].x, y = np.u[k].y, xp = np.v[k].x, yp = np.v[k].y;
    a.row(2 * i) << -x, -y, -1.0, 0.0, 0.0, 0.0, x * xp, y * xp, xp;
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -x, -y, -1.0, x * yp, y * yp, yp;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(7) > kRankTolerance * sv(0))) throw DegenerateError("rank-deficient point configuration");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return ProjectiveTransform::from_matrix(np.dst.inverse_matrix() * hn * np.src.matrix());
}

Poly2Transform estimate_poly2(std::span<const PointPair> pairs) {
  check_count(pairs, ModelKind::kPoly2);
  const NormalizedPairs np = normalize(pairs);
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd design(n, 6);
  Eigen::MatrixXd rhs(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double x = np.u[k].x, y = np.u[k].y;
    design.row(i) << 1.0, x, y, x * x, x * y, y * y;
    rhs.row(i) << np.v[k].x, np.v[k].y;
  }
  const Eigen::MatrixXd sol = solve_least_squares(design, rhs);
  std::array<double, 6> ux{}, uy{};
  for (int j = 0; j < 6; ++j) {
    ux[static_cast<std::size_t>(j)] = sol(j, 0);
    uy[static_cast<std::size_t>(j)] = sol(j, 1);
  }
  const double s = np.src.s, tx = -np.src.s * np.src.cx, ty = -np.src.s * np.src.cy;
  Poly2Transform out;
  out.cx = expand_poly(ux, s, tx, ty);
  out.cy = expand_poly(uy, s, tx, ty);
  // Undo the destination normalization: x' = u' / s_d + c_d.
  for (auto& c : out.cx) c /= np.dst.s;
  for (auto& c : out.cy) c /= np.dst.s;
  out.cx[0] += np.dst.cx;
  out.cy[0] += np.dst.cy;
  return out;
}

Transform estimate(ModelKind kind, std::span<const PointPair> pairs) {
  switch (kind) {
    case ModelKind::kAffine: return estimate_affine(pairs);
    case ModelKind::kProjective: return estimate_projective(pairs);
    case ModelKind::kPoly2: return estimate_poly2(pairs);
  }
  throw std::invalid_argument("estimate: unknown model kind");
}

double reprojection_error(const Transform& t, const PointPair& pair) {
  const Point2 p = apply(t, pair.src);
  return std::hypot(p.x - pair.dst.x, p.y - pair.dst.y);
}

void RansacConfig::validate() const {
  if (!(inlier_threshold > 0.0)) throw std::invalid_argument("ransac: inlier_threshold must be positive");
  if (max_iterations < 1) throw std::invalid_argument("ransac: max_iterations must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("ransac: confidence must be in (0, 1)");
  if (!(min_inlier_fraction >= 0.0 && min_inlier_fraction <= 1.0)) {
    throw std::invalid_argument("ransac: min_inlier_fraction must be in [0, 1]");
  }
}

RansacResult ransac(std::span<const PointPair> pairs, ModelKind kind, const RansacConfig& config) {
  config.validate();
  const int s = min_sample(kind);
  const int n = static_cast<int>(pairs.size());
  if (n < s) {
    throw MatchError("ransac: " + std::to_string(n) + " pairs cannot support a " + model_name(kind) + " model");
  }
  const int min_consensus =
      std::min(n, std::max(s + 1, static_cast<int>(std::ceil(config.min_inlier_fraction * n))));

  auto score = [&](const Transform& model, std::vector<std::uint8_t>& mask, double& err_sum) {
    int count = 0;
    err_sum = 0.0;
    mask.assign(pairs.size(), 0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double e = reprojection_error(model, pairs[i]);
      if (e <= config.inlier_threshold) {
        mask[i] = 1;
        ++count;
        err_sum += e;
      }
    }
    return count;
  };

  std::mt19937_64 rng(config.seed);
  std::vector<int> indices(static_cast<std::size_t>(n));
  std::iota(indices.begin(), indices.end(), 0);
  std::vector<PointPair> sample(static_cast<std::size_t>(s));

  std::optional<Transform> best;
  std::vector<std::uint8_t> best_mask, mask;
  int best_count = -1;
  double best_err = 0.0;
  int needed = config.max_iterations;
  int it = 0;
  for (; it < needed; ++it) {
    // Partial Fisher-Yates draw of s distinct indices.
    for (int j = 0; j < s; ++j) {
      std::uniform_int_distribution<int> pick(j, n - 1);
      std::swap(indices[static_cast<std::size_t>(j)], indices[static_cast<std::size_t>(pick(rng))]);
      sample[static_cast<std::size_t>(j)] = pairs[static_cast<std::size_t>(indices[static_cast<std::size_t>(j)])];
    }
    if (sample_degenerate(sample, kind)) continue;
    Transform model;
    try {
      model = estimate(kind, sample);
    } catch (const DegenerateError&) {
      continue;
    }
    double err = 0.0;
    const int count = score(model, mask, err);
    if (count > best_count || (count == best_count && err < best_err)) {
      best = model;
      best_mask = mask;
      best_count = count;
      best_err = err;
      const double w = static_cast<double>(count) / n;
      if (w >= 1.0) {
        needed = it + 1;
      } else if (w > 0.0) {
        const double denom = std::log(1.0 - std::pow(w, s));
        if (denom < 0.0) {
          const double est = std::ceil(std::log(1.0 - config.confidence) / denom);
          needed = std::min(config.max_iterations, static_cast<int>(std::min(est, 1e9)));
        }
      }
    }
  }
  if (!best || best_count < min_consensus) {
    throw MatchError("ransac: no consensus (best support " + std::to_string(std::max(best_count, 0)) + " of " +
                     std::to_string(n) + ", need " + std::to_string(min_consensus) + ")");
  }

  // Refit on the consensus until the inlier set stops changing.
  Transform model = *best;
  std::vector<std::uint8_t> current = best_mask;
  for (int round = 0; round < 10; ++round) {
    std::vector<PointPair> consensus;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (current[i]) consensus.push_back(pairs[i]);
    }
    Transform refit;
    try {
      refit = estimate(kind, consensus);
    } catch (const DegenerateError&) {
      break;
    }
    double err = 0.0;
    std::vector<std::uint8_t> next;
    const int count = score(refit, next, err);
    if (count < min_consensus) break;
    model = refit;
    const bool stable = next == current;
    current = std::move(next);
    if (stable) break;
  }

  RansacResult result;
  result.model = model;
  double err = 0.0;
  result.inlier_count = score(model, result.inliers, err);
  result.iterations = it;
  if (result.inlier_count < min_consensus) throw MatchError("ransac: refit lost consensus");
  return result;
}

Raster warp_resample(const Raster& image, const InverseMap& inverse, int out_width, int out_height, int workers) {
  if (out_width <= 0 || out_height <= 0) throw std::invalid_argument("warp_resample: empty output grid");
  Plane out(out_width, out_height);
  parallel_for(static_cast<std::size_t>(out_height), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < out_width; ++x) {
      const auto src = inverse({static_cast<double>(x), static_cast<double>(y)});
      if (!src) continue;
      out.at(x, y) = bilinear_sample(image, src->x, src->y).value;
    }
  });
  return Raster::from_plane_clamped(std::move(out));
}

Raster warp_resample(const Raster& image, const Transform& transform, int out_width, int out_height,
                     int workers) {
  if (const auto* a = std::get_if<AffineTransform>(&transform)) {
    const AffineTransform inv = a->inverse();
    return warp_resample(image, InverseMap([inv](Point2 p) -> std::optional<Point2> { return inv.apply(p); }),
                         out_width, out_height, workers);
  }
  if (const auto* h = std::get_if<ProjectiveTransform>(&transform)) {
    const ProjectiveTransform inv = h->inverse();
    return warp_resample(image, InverseMap([inv](Point2 p) -> std::optional<Point2> {
                           const Point2 q = inv.apply(p);
                           if (!std::isfinite(q.x) || !std::isfinite(q.y)) return std::nullopt;
                           return q;
                         }),
                         out_width, out_height, workers);
  }
  // Poly2: an approximate inverse fitted on a source grid seeds a per-pixel
  // Newton solve.
  const auto& poly = std::get<Poly2Transform>(transform);
  std::vector<PointPair> grid;
  for (int j = 0; j <= 8; ++j) {
    for (int i = 0; i <= 8; ++i) {
      const Point2 src{i * (image.width() - 1) / 8.0, j * (image.height() - 1) / 8.0};
      grid.push_back({poly.apply(src), src});
    }
  }
  Poly2Transform seed_map;
  try {
    seed_map = estimate_poly2(grid);
  } catch (const DegenerateError&) {
    throw DegenerateError("warp_resample: polynomial transform is not invertible over the image");
  }
  return warp_resample(image, InverseMap([poly, seed_map](Point2 p) { return poly.solve(p, seed_map.apply(p)); }),
                       out_width, out_height, workers);
}

}  // namespace sfoc
