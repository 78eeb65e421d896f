// Transform estimation, RANSAC and resampling.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sfoc/geometry.hpp"
#include "sfoc/pipeline.hpp"
#include "test_util.hpp"

namespace sfoc {
namespace {

ProjectiveTransform planted_homography() {
  Eigen::Matrix3d h;
  h << 1.02, 0.03, 12.5, -0.02, 0.98, -7.25, 2e-5, -1e-5, 1.0;
  return ProjectiveTransform::from_matrix(h);
}

Poly2Transform planted_poly2() {
  Poly2Transform p;
  p.cx = {3.0, 1.01, 0.02, 1e-5, -2e-5, 3e-5};
  p.cy = {-4.0, -0.01, 0.99, 2e-5, 1e-5, -1e-5};
  return p;
}

std::vector<PointPair> pairs_through(const Transform& t, const std::vector<Point2>& src) {
  std::vector<PointPair> out;
  for (Point2 p : src) out.push_back({p, apply(t, p)});
  return out;
}

std::vector<Point2> random_points(int count, std::uint64_t seed, double extent = 500.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Point2> out;
  for (int i = 0; i < count; ++i) out.push_back({u(rng), u(rng)});
  return out;
}

double max_error(const Transform& t, const std::vector<PointPair>& pairs) {
  double worst = 0.0;
  for (const auto& p : pairs) worst = std::max(worst, reprojection_error(t, p));
  return worst;
}

TEST(Estimate, IdentityPairsGiveIdentity) {
  const auto pts = random_points(10, 1);
  const auto pairs = pairs_through(AffineTransform{}, pts);
  const AffineTransform a = estimate_affine(pairs);
  EXPECT_NEAR(a.a1, 1.0, 1e-12);
  EXPECT_NEAR(a.b2, 1.0, 1e-12);
  EXPECT_NEAR(a.a0, 0.0, 1e-9);
  const ProjectiveTransform h = estimate_projective(pairs);
  EXPECT_TRUE(h.h.isApprox(Eigen::Matrix3d::Identity(), 1e-10));
}

TEST(Estimate, MinimalSampleExactness) {
  const AffineTransform affine{5.0, 0.9, 0.1, -3.0, -0.05, 1.1};
  const std::vector<Point2> three{{10, 20}, {400, 35}, {150, 380}};
  EXPECT_LE(max_error(estimate_affine(pairs_through(affine, three)), pairs_through(affine, random_points(20, 2))),
            1e-9);

  const std::vector<Point2> four{{0, 0}, {499, 0}, {499, 499}, {0, 499}};
  const auto h = planted_homography();
  EXPECT_LE(max_error(estimate_projective(pairs_through(h, four)), pairs_through(h, random_points(20, 3))), 1e-9);

  const std::vector<Point2> six{{0, 0}, {500, 10}, {20, 480}, {490, 500}, {250, 240}, {100, 300}};
  const auto p = planted_poly2();
  EXPECT_LE(max_error(estimate_poly2(pairs_through(p, six)), pairs_through(p, random_points(20, 4))), 1e-9);
}

TEST(Estimate, NoisyAffineResidual) {
  const AffineTransform affine{5.0, 0.9, 0.1, -3.0, -0.05, 1.1};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.1);
  auto pairs = pairs_through(affine, random_points(20, 6));
  for (auto& p : pairs) p.dst = {p.dst.x + noise(rng), p.dst.y + noise(rng)};
  const AffineTransform fit = estimate_affine(pairs);
  double sq = 0.0;
  for (const auto& p : pairs) sq += std::pow(reprojection_error(fit, p), 2);
  EXPECT_LE(std::sqrt(sq / pairs.size()), 0.15);
}

TEST(Estimate, DegenerateConfigurations) {
  const std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}};
  EXPECT_THROW(estimate_affine(pairs_through(AffineTransform{}, line)), DegenerateError);
  EXPECT_THROW(estimate_projective(pairs_through(AffineTransform{}, line)), DegenerateError);
  const std::vector<Point2> two{{0, 0}, {1, 0}};
  EXPECT_THROW(estimate_affine(pairs_through(AffineTransform{}, two)), std::invalid_argument);
  const std::vector<Point2> long_line{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}, {6, 6}};
  EXPECT_THROW(estimate(ModelKind::kPoly2, pairs_through(AffineTransform{}, long_line)), DegenerateError);
}

TEST(Transforms, InversesRoundTrip) {
  const AffineTransform a{5.0, 0.9, 0.1, -3.0, -0.05, 1.1};
  const auto h = planted_homography();
  const auto poly = planted_poly2();
  for (Point2 p : random_points(20, 7)) {
    const Point2 qa = a.inverse().apply(a.apply(p));
    EXPECT_NEAR(qa.x, p.x, 1e-9);
    EXPECT_NEAR(qa.y, p.y, 1e-9);
    const Point2 qh = h.inverse().apply(h.apply(p));
    EXPECT_NEAR(qh.x, p.x, 1e-8);
    EXPECT_NEAR(qh.y, p.y, 1e-8);
    const auto qp = poly.solve(poly.apply(p), {p.x + 5, p.y - 5});
    ASSERT_TRUE(qp.has_value());
    EXPECT_NEAR(qp->x, p.x, 1e-8);
    EXPECT_NEAR(qp->y, p.y, 1e-8);
  }
  EXPECT_THROW((AffineTransform{0, 1, 2, 0, 2, 4}).inverse(), DegenerateError);
}

TEST(Transforms, NamesAndCoefficients) {
  EXPECT_EQ(parse_model_kind("projective"), ModelKind::kProjective);
  EXPECT_EQ(model_name(ModelKind::kPoly2), "poly2");
  EXPECT_THROW(parse_model_kind("spline"), std::invalid_argument);
  EXPECT_EQ(min_sample(ModelKind::kAffine), 3);
  EXPECT_EQ(min_sample(ModelKind::kProjective), 4);
  EXPECT_EQ(min_sample(ModelKind::kPoly2), 6);
  EXPECT_EQ(coefficients(AffineTransform{1, 2, 3, 4, 5, 6}), (std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(coefficients(planted_homography()).size(), 9u);
  EXPECT_EQ(coefficients(planted_poly2()).size(), 12u);
}

TEST(Ransac, CleanPairsAllInliers) {
  const auto pairs = pairs_through(planted_homography(), random_points(30, 8));
  const RansacResult r = ransac(pairs, ModelKind::kProjective);
  EXPECT_EQ(r.inlier_count, 30);
  EXPECT_LE(max_error(r.model, pairs), 1e-8);
}

struct Contaminated {
  std::vector<PointPair> pairs;
  std::vector<bool> truly_inlier;
};

Contaminated contaminated(const Transform& t, int n, double outlier_fraction, std::uint64_t seed) {
  Contaminated c;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 500.0), coin(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.02);
  const int outliers = static_cast<int>(std::round(n * outlier_fraction));
  for (int i = 0; i < n; ++i) {
    const Point2 p{u(rng), u(rng)};
    Point2 q = apply(t, p);
    const bool inlier = i >= outliers;
    if (inlier) {
      q = {q.x + jitter(rng), q.y + jitter(rng)};
    } else {
      // uniform, but far enough from the truth that it is an unambiguous outlier
      do q = {u(rng), u(rng)};
      while (distance(q, apply(t, p)) < 10.0);
    }
    c.pairs.push_back({p, q});
    c.truly_inlier.push_back(inlier);
  }
  return c;
}

TEST(Ransac, FortyPercentOutliers) {
  const auto h = planted_homography();
  const auto data = contaminated(h, 100, 0.4, 9);
  const RansacResult r = ransac(data.pairs, ModelKind::kProjective);
  int recovered = 0, total = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    if (!data.truly_inlier[i]) {
      EXPECT_FALSE(r.inliers[i]);
      continue;
    }
    ++total;
    recovered += r.inliers[i] != 0;
    worst = std::max(worst, distance(apply(r.model, data.pairs[i].src), apply(h, data.pairs[i].src)));
  }
  EXPECT_GE(recovered, 0.95 * total);
  EXPECT_LE(worst, 0.1);
}

TEST(Ransac, RandomPairsHaveNoConsensus) {
  std::vector<PointPair> pairs;
  const auto a = random_points(100, 10), b = random_points(100, 11);
  for (int i = 0; i < 100; ++i) pairs.push_back({a[i], b[i]});
  EXPECT_THROW(ransac(pairs, ModelKind::kProjective), MatchError);
  EXPECT_THROW(ransac(std::span(pairs).first(3), ModelKind::kProjective), MatchError);
}

TEST(Ransac, DeterministicForFixedSeed) {
  const auto data = contaminated(planted_poly2(), 80, 0.3, 12);
  const RansacResult a = ransac(data.pairs, ModelKind::kPoly2);
  const RansacResult b = ransac(data.pairs, ModelKind::kPoly2);
  EXPECT_EQ(a.inliers, b.inliers);
  EXPECT_EQ(coefficients(a.model), coefficients(b.model));
}

TEST(Ransac, MaskInvariantUnderScaling) {
  const auto data = contaminated(planted_homography(), 100, 0.35, 13);
  const double s = 2.5;
  std::vector<PointPair> scaled;
  for (const auto& p : data.pairs) scaled.push_back({{p.src.x * s, p.src.y * s}, {p.dst.x * s, p.dst.y * s}});
  RansacConfig config;
  const RansacResult a = ransac(data.pairs, ModelKind::kProjective, config);
  config.inlier_threshold *= s;
  const RansacResult b = ransac(scaled, ModelKind::kProjective, config);
  EXPECT_EQ(a.inliers, b.inliers);
}

TEST(Ransac, ConfigValidation) {
  RansacConfig c;
  c.inlier_threshold = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.confidence = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(WarpResample, IdentityIsExact) {
  const Raster img = Raster::from_plane(testing::random_plane(31, 27, 14));
  const Raster out = warp_resample(img, AffineTransform{}, 31, 27);
  for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_EQ(out.data()[i], img.data()[i]);
}

TEST(WarpResample, IntegerTranslation) {
  const Raster img = Raster::from_plane(testing::random_plane(40, 30, 15));
  const Raster out = warp_resample(img, AffineTransform::translation(5, -3), 40, 30);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x) {
      const int sx = x - 5, sy = y + 3;
      EXPECT_EQ(out.at(x, y), img.plane().contains(sx, sy) ? img.at(sx, sy) : 0.0);
    }
}

TEST(WarpResample, HomographyRoundTripPsnr) {
  const Raster img = Raster::from_plane(testing::smooth_plane(200, 200, 16));
  Eigen::Matrix3d m;
  m << 1.01, 0.02, 3.3, -0.015, 0.995, -2.7, 1e-5, 2e-5, 1.0;
  const auto h = ProjectiveTransform::from_matrix(m);
  const Raster forward = warp_resample(img, h, 200, 200);
  const Raster back = warp_resample(forward, h.inverse(), 200, 200);
  EXPECT_GE(interior_psnr(back, img, 20), 40.0);
}

TEST(WarpResample, AffineKeepsRampsStraight) {
  Plane ramp(60, 50);
  for (int y = 0; y < 50; ++y)
    for (int x = 0; x < 60; ++x) ramp.at(x, y) = 0.1 + 0.01 * x + 0.004 * y;
  const AffineTransform a{2.0, 0.97, 0.05, -1.5, -0.04, 1.02};
  const Raster out = warp_resample(Raster::from_plane(ramp), a, 60, 50);
  const AffineTransform inv = a.inverse();
  for (int y = 8; y < 42; ++y)
    for (int x = 8; x < 52; ++x) {
      const Point2 s = inv.apply({double(x), double(y)});
      EXPECT_NEAR(out.at(x, y), 0.1 + 0.01 * s.x + 0.004 * s.y, 1e-12);
    }
}

TEST(WarpResample, DeterministicAcrossWorkers) {
  const Raster img = Raster::from_plane(testing::smooth_plane(80, 70, 17));
  const auto poly = planted_poly2();
  const Raster a = warp_resample(img, poly, 80, 70, 1);
  const Raster b = warp_resample(img, poly, 80, 70, 4);
  for (std::size_t i = 0; i < a.data().size(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]);
}

}  // namespace
}  // namespace sfoc
