// Synthetic pairs, noise models, tone maps, the noise sweep and the NCC
// benchmark.

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "sfoc/harness.hpp"
#include "test_util.hpp"

namespace sfoc {
namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

TEST(ToneMap, Curves) {
  EXPECT_EQ(ToneMap{}.apply(0.3), 0.3);
  EXPECT_DOUBLE_EQ((ToneMap{ToneKind::kGamma, 2.0, {}}).apply(0.5), 0.25);
  EXPECT_DOUBLE_EQ((ToneMap{ToneKind::kInversion, 1.0, {}}).apply(0.3), 0.7);
  const ToneMap pw{ToneKind::kPiecewise, 1.0, {{0.2, 0.1}, {0.6, 0.9}}};
  EXPECT_DOUBLE_EQ(pw.apply(0.4), 0.5);
  EXPECT_DOUBLE_EQ(pw.apply(0.0), 0.1);
  EXPECT_DOUBLE_EQ(pw.apply(1.0), 0.9);
  EXPECT_THROW((ToneMap{ToneKind::kPiecewise, 1.0, {{0.5, 0.1}, {0.5, 0.9}}}).validate(), std::invalid_argument);
  EXPECT_THROW((ToneMap{ToneKind::kGamma, 0.0, {}}).validate(), std::invalid_argument);
  EXPECT_EQ(parse_tone_kind(tone_name(ToneKind::kPiecewise)), ToneKind::kPiecewise);
  EXPECT_THROW(parse_tone_kind("sepia"), ConfigError);
}

TEST(Noise, GaussianVarianceAndMean) {
  const Raster flat(200, 200, 0.5);
  const Raster noisy = add_gaussian_noise(flat, 0.005, 9);
  std::vector<double> v(noisy.data().begin(), noisy.data().end());
  EXPECT_NEAR(mean_of(v), 0.5, 0.002);
  EXPECT_NEAR(variance_of(v), 0.005, 0.05 * 0.005);
  EXPECT_EQ(add_gaussian_noise(flat, 0.0, 9).data()[7], 0.5);
  EXPECT_THROW(add_gaussian_noise(flat, -1.0, 9), std::invalid_argument);
}

TEST(Noise, SpeckleIsMultiplicative) {
  const Raster flat(200, 200, 0.5);
  const double var = 0.04;
  const Raster noisy = add_speckle(flat, var, 10);
  std::vector<double> u;
  const double half_width = std::sqrt(3.0 * var);
  for (double x : noisy.data()) {
    u.push_back(x / 0.5 - 1.0);
    EXPECT_LE(std::abs(u.back()), half_width + 1e-12);
  }
  EXPECT_NEAR(mean_of(u), 0.0, 0.005);
  EXPECT_NEAR(variance_of(u), var, 0.05 * var);
  // Dark pixels stay dark.
  const Raster zeros(50, 50, 0.0);
  for (double x : add_speckle(zeros, 0.1, 11).data()) EXPECT_EQ(x, 0.0);
  const Raster tex = procedural_texture(64, 64, 1);
  const Raster same = add_speckle(tex, 0.0, 11);
  EXPECT_TRUE(std::equal(same.data().begin(), same.data().end(), tex.data().begin()));
}

TEST(Noise, OutputIsClamped) {
  const Raster bright(100, 100, 0.98);
  for (double x : add_gaussian_noise(bright, 0.01, 12).data()) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(ProceduralTexture, DeterministicAndInRange) {
  const Raster a = procedural_texture(120, 90, 5), b = procedural_texture(120, 90, 5);
  const Raster c = procedural_texture(120, 90, 6);
  EXPECT_EQ(a.width(), 120);
  EXPECT_EQ(a.height(), 90);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  EXPECT_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
  const auto [lo, hi] = std::minmax_element(a.data().begin(), a.data().end());
  EXPECT_NEAR(*lo, 0.05, 1e-12);
  EXPECT_NEAR(*hi, 0.95, 1e-12);
  EXPECT_THROW(procedural_texture(4, 100, 1), std::invalid_argument);
}

TEST(SynthPair, IdentityIsExact) {
  SynthSpec spec;
  spec.base = procedural_texture(80, 60, 2);
  const SynthPair pair = synth_pair(spec);
  EXPECT_TRUE(std::equal(pair.sensed.data().begin(), pair.sensed.data().end(), spec.base.data().begin()));
  EXPECT_TRUE(std::equal(pair.reference.data().begin(), pair.reference.data().end(), spec.base.data().begin()));
}

TEST(SynthPair, InversionFlipsIntensities) {
  SynthSpec spec;
  spec.base = procedural_texture(80, 60, 3);
  spec.transform = AffineTransform::translation(4, -2);
  spec.tone = {ToneKind::kInversion, 1.0, {}};
  const SynthPair pair = synth_pair(spec);
  const Raster warped = warp_resample(spec.base, spec.transform, 80, 60);
  for (int y = 0; y < 60; ++y) {
    for (int x = 0; x < 80; ++x) EXPECT_NEAR(pair.sensed.at(x, y), 1.0 - warped.at(x, y), 1e-12);
  }
}

TEST(SynthPair, SeedControlsNoise) {
  SynthSpec spec;
  spec.base = procedural_texture(64, 64, 4);
  spec.gaussian_var = 0.004;
  spec.speckle_var = 0.05;
  const SynthPair a = synth_pair(spec), b = synth_pair(spec);
  EXPECT_TRUE(std::equal(a.sensed.data().begin(), a.sensed.data().end(), b.sensed.data().begin()));
  spec.seed = 2;
  const SynthPair c = synth_pair(spec);
  EXPECT_FALSE(std::equal(a.sensed.data().begin(), a.sensed.data().end(), c.sensed.data().begin()));
}

TEST(SynthPair, TruthInvertsPlantedGeometry) {
  Eigen::Matrix3d h;
  h << 0.98, 0.04, 3.0, -0.03, 1.01, -2.0, 2e-5, 1e-5, 1.0;
  Poly2Transform poly;
  poly.cx = {2, 1.0, 0.02, 1e-4, -5e-5, 0};
  poly.cy = {-1, -0.01, 0.99, 0, 5e-5, 1e-4};
  struct Case {
    Transform t;
    double tol;
  };
  for (const auto& [t, tol] : {Case{AffineTransform{2, 1.01, 0.02, -3, -0.01, 0.99}, 1e-9},
                               Case{ProjectiveTransform::from_matrix(h), 1e-9}, Case{poly, 0.05}}) {
    SynthSpec spec;
    spec.base = procedural_texture(160, 120, 5);
    spec.transform = t;
    const SynthPair pair = synth_pair(spec);
    for (const Point2 p : {Point2{10, 10}, Point2{80, 60}, Point2{150, 110}, Point2{30, 100}}) {
      const Point2 back = apply(pair.truth, apply(pair.planted, p));
      EXPECT_NEAR(back.x, p.x, tol);
      EXPECT_NEAR(back.y, p.y, tol);
    }
  }
}

TEST(SynthPair, GeoErrorOffsetsPrediction) {
  SynthSpec spec;
  spec.base = procedural_texture(120, 120, 6);
  spec.transform = AffineTransform{5, 1.0, 0.01, -4, -0.01, 1.0};
  spec.geo_error = {7, -3};
  const SynthPair pair = synth_pair(spec);
  for (const Point2 s : {Point2{20, 20}, Point2{100, 50}}) {
    const Point2 predicted = predict_reference_location(pair.sensed_geo, pair.reference_geo, s);
    const Point2 truth = apply(pair.truth, s);
    EXPECT_NEAR(predicted.x - truth.x, 7, 1e-9);
    EXPECT_NEAR(predicted.y - truth.y, -3, 1e-9);
  }
}

TEST(SynthSpec, Validation) {
  SynthSpec spec;
  EXPECT_THROW(synth_pair(spec), std::invalid_argument);
  spec.base = Raster(32, 32, 0.5);
  EXPECT_THROW(synth_pair(spec), std::invalid_argument);
  spec.base = procedural_texture(32, 32, 1);
  spec.gaussian_var = 0.02;
  EXPECT_THROW(synth_pair(spec), std::invalid_argument);
  spec.gaussian_var = 0.0;
  spec.speckle_var = 0.2;
  EXPECT_THROW(synth_pair(spec), std::invalid_argument);
}

TEST(NoiseSweep, RowLayoutAndCsv) {
  SweepConfig c;
  c.bases = {procedural_texture(160, 160, 7)};
  c.gaussian_levels = {0.002};
  c.speckle_levels = {0.02, 0.04};
  c.match.template_size = 48;
  c.match.search_size = 96;
  c.match.ip_count = 12;
  const auto rows = noise_sweep(c);
  ASSERT_EQ(rows.size(), 6u);
  const char* methods[] = {"sfoc_fastncc", "sfoc_fastncc", "sfoc_fastncc", "raw_ncc", "raw_ncc", "raw_ncc"};
  const char* kinds[] = {"gaussian", "speckle", "speckle", "gaussian", "speckle", "speckle"};
  const double levels[] = {0.002, 0.02, 0.04, 0.002, 0.02, 0.04};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].method, methods[i]);
    EXPECT_EQ(rows[i].noise_kind, kinds[i]);
    EXPECT_EQ(rows[i].variance, levels[i]);
    EXPECT_GE(rows[i].cmr, 0.0);
    EXPECT_LE(rows[i].cmr, 1.0);
  }
  // Under inversion the descriptor keeps matching while raw intensities do not.
  EXPECT_GE(rows[0].cmr, 0.5);
  EXPECT_LT(rows[3].cmr, rows[0].cmr);

  const auto dir = testing::scratch_dir("harness_sweep");
  save_sweep_csv(rows, dir / "sweep.csv");
  std::ifstream in(dir / "sweep.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "method,noise_kind,variance,cmr,rmse_px,mt_seconds");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 6);
  c.bases.clear();
  EXPECT_THROW(noise_sweep(c), std::invalid_argument);
}

SweepConfig small_sweep() {
  SweepConfig c;
  c.bases = {procedural_texture(256, 256, 8)};
  c.match.template_size = 64;
  c.match.search_size = 128;
  c.match.ip_count = 30;
  return c;
}

TEST(NoiseSweep, CleanSelfMatchIsNearPerfect) {
  SweepConfig c = small_sweep();
  c.tone = {};
  c.gaussian_levels = {0.0};
  c.speckle_levels = {};
  const auto rows = noise_sweep(c);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_GE(rows[0].cmr, 0.95);
  EXPECT_GE(rows[1].cmr, 0.95);
}

TEST(NoiseSweep, SfocCmrDoesNotRiseWithSpeckle) {
  SweepConfig c = small_sweep();
  c.methods = {DescriptorKind::kSfoc};
  c.gaussian_levels = {};
  const auto rows = noise_sweep(c);
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].cmr, rows[i - 1].cmr + 0.05) << i;
}

TEST(BenchNcc, ReportsPredictionAndTimings) {
  const BenchReport r = bench_ncc(16, 16, 40, 40, 3, 1);
  EXPECT_EQ(r.predicted_ratio, complexity_estimate(16, 16, 40, 40, 3).ratio);
  EXPECT_GT(r.fast_seconds, 0.0);
  EXPECT_GT(r.naive_seconds, 0.0);
  EXPECT_NEAR(r.speedup * r.measured_ratio, 1.0, 1e-9);
  EXPECT_THROW(bench_ncc(16, 16, 40, 40, 3, 0), std::invalid_argument);
}

}  // namespace
}  // namespace sfoc
