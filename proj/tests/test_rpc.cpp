// Rational polynomial camera model, local affine approximation and bias
// compensation.

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <random>

#include "sfoc/rpc.hpp"
#include "test_util.hpp"

namespace sfoc {
namespace {

// Term indices in the documented order.
enum Term { k1, kL, kP, kH, kLP, kLH, kPH, kLL, kPP, kHH, kPLH, kLLL, kLPP, kLHH, kLLP, kPPP, kPHH, kLLH, kPPH, kHHH };

RpcModel identity_rpc() {
  RpcModel m;
  m.num_l[kP] = 1.0;
  m.den_l[k1] = 1.0;
  m.num_s[kL] = 1.0;
  m.den_s[k1] = 1.0;
  return m;
}

// A plausible scene: ~10 km footprint, 10000 x 10000 pixels, mildly cubic.
RpcModel scene_rpc(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> small(-1e-3, 1e-3);
  RpcModel m;
  m.line_off = 5000;
  m.samp_off = 5000;
  m.lat_off = 30.5;
  m.lon_off = 114.3;
  m.height_off = 50;
  m.line_scale = 5000;
  m.samp_scale = 5000;
  m.lat_scale = 0.05;
  m.lon_scale = 0.05;
  m.height_scale = 500;
  for (auto* arr : {&m.num_l, &m.den_l, &m.num_s, &m.den_s})
    for (double& c : *arr) c = small(rng);
  m.num_l[kP] = -1.0;
  m.num_l[kL] = 0.05;
  m.num_l[kH] = 0.02;
  m.num_s[kL] = 1.0;
  m.num_s[kP] = 0.04;
  m.num_s[kH] = -0.03;
  m.den_l[k1] = 1.0;
  m.den_s[k1] = 1.0;
  return m;
}

double poly(const std::array<double, 20>& c, double P, double L, double H) {
  return c[k1] + c[kL] * L + c[kP] * P + c[kH] * H + c[kLP] * L * P + c[kLH] * L * H + c[kPH] * P * H +
         c[kLL] * L * L + c[kPP] * P * P + c[kHH] * H * H + c[kPLH] * P * L * H + c[kLLL] * L * L * L +
         c[kLPP] * L * P * P + c[kLHH] * L * H * H + c[kLLP] * L * L * P + c[kPPP] * P * P * P +
         c[kPHH] * P * H * H + c[kLLH] * L * L * H + c[kPPH] * P * P * H + c[kHHH] * H * H * H;
}

TEST(RpcTerms, DocumentedOrder) {
  const auto t = rpc_terms(2.0, 3.0, 5.0);  // P, L, H
  const double expected[20] = {1, 3, 2, 5, 6, 15, 10, 9, 4, 25, 30, 27, 12, 75, 18, 8, 50, 45, 20, 125};
  for (int i = 0; i < 20; ++i) EXPECT_EQ(t[i], expected[i]) << i;
}

TEST(RfmForward, IdentityStyle) {
  const ImagePoint p = rfm_forward(identity_rpc(), 0.3, -0.2, 0.1);
  EXPECT_DOUBLE_EQ(p.line, 0.3);
  EXPECT_DOUBLE_EQ(p.sample, -0.2);
}

TEST(RfmForward, OffsetsOnly) {
  RpcModel m = identity_rpc();
  m.line_off = 1200;
  m.samp_off = 800;
  m.lat_off = 10;
  m.lon_off = 20;
  m.height_off = 30;
  const ImagePoint p = rfm_forward(m, 10, 20, 30);
  EXPECT_EQ(p.line, 1200);
  EXPECT_EQ(p.sample, 800);
}

TEST(RfmForward, TermByTermOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RpcModel m = scene_rpc(4);
  for (auto* arr : {&m.num_l, &m.num_s})
    for (double& c : *arr) c = u(rng);
  for (int trial = 0; trial < 50; ++trial) {
    const double P = u(rng), L = u(rng), H = u(rng);
    const double lat = P * m.lat_scale + m.lat_off, lon = L * m.lon_scale + m.lon_off;
    const double h = H * m.height_scale + m.height_off;
    const ImagePoint got = rfm_forward(m, lat, lon, h);
    // Re-derive normalized inputs exactly as a user would.
    const double p = (lat - m.lat_off) / m.lat_scale, l = (lon - m.lon_off) / m.lon_scale;
    const double hn = (h - m.height_off) / m.height_scale;
    const double line = poly(m.num_l, p, l, hn) / poly(m.den_l, p, l, hn) * m.line_scale + m.line_off;
    const double samp = poly(m.num_s, p, l, hn) / poly(m.den_s, p, l, hn) * m.samp_scale + m.samp_off;
    EXPECT_NEAR(got.line, line, 1e-9 * std::abs(line));
    EXPECT_NEAR(got.sample, samp, 1e-9 * std::abs(samp));
  }
}

TEST(RfmForward, RangeAndDenominatorErrors) {
  EXPECT_THROW(rfm_forward(identity_rpc(), 1.3, 0.0, 0.0), std::out_of_range);
  RpcModel m = identity_rpc();
  m.den_l[k1] = 0.0;
  EXPECT_THROW(rfm_forward(m, 0.3, 0.0, 0.0), DegenerateError);
}

TEST(RfmInverse, IdentityStyleIsDenormalization) {
  RpcModel m = identity_rpc();
  m.lat_scale = 2.0;
  m.lat_off = 1.0;
  m.line_scale = 100.0;
  m.line_off = 50.0;
  // line = ((lat - 1) / 2) * 100 + 50
  const RfmInverseResult r = rfm_inverse(m, 80.0, 0.4, 0.0);
  EXPECT_NEAR(r.lat, 1.0 + 2.0 * (80.0 - 50.0) / 100.0, 1e-9);
  EXPECT_NEAR(r.lon, 0.4, 1e-9);
}

TEST(RfmInverse, RoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pix(500.0, 9500.0), hu(-200.0, 300.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RpcModel m = scene_rpc(10 + seed);
    for (int trial = 0; trial < 40; ++trial) {
      const double line = pix(rng), samp = pix(rng), h = hu(rng);
      const RfmInverseResult g = rfm_inverse(m, line, samp, h);
      const ImagePoint back = rfm_forward(m, g.lat, g.lon, h);
      EXPECT_LE(std::abs(back.line - line) / m.line_scale, 1e-6);
      EXPECT_LE(std::abs(back.sample - samp) / m.samp_scale, 1e-6);
    }
  }
}

TEST(RfmInverse, SeedAtSolutionTakesOneIteration) {
  const RpcModel m = scene_rpc(20);
  const ImagePoint at_offsets = rfm_forward(m, m.lat_off, m.lon_off, 0.0);
  const RfmInverseResult r = rfm_inverse(m, at_offsets.line, at_offsets.sample, 0.0);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_NEAR(r.lat, m.lat_off, 1e-12);
}

TEST(RpcFile, RoundTripAndMissingKey) {
  const auto dir = testing::scratch_dir("rpc");
  const RpcModel m = scene_rpc(21);
  save_rpc(m, dir / "a.rpc");
  const RpcModel back = load_rpc(dir / "a.rpc");
  EXPECT_EQ(back.lat_off, m.lat_off);
  EXPECT_EQ(back.height_scale, m.height_scale);
  EXPECT_EQ(back.num_l, m.num_l);
  EXPECT_EQ(back.den_s, m.den_s);

  std::ifstream in(dir / "a.rpc");
  std::ofstream out(dir / "b.rpc");
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("SAMP_DEN_COEFF_7:", 0) != 0) out << line << '\n';
  out.close();
  EXPECT_THROW(load_rpc(dir / "b.rpc"), IoError);
  EXPECT_THROW(load_rpc(dir / "missing.rpc"), IoError);
}

// Affine ground model: line = r0 + A (lat, lon); GeoRef takes (lon, lat) to
// reference pixels. The composition sensed -> reference is affine.
TEST(LocalAffine, RecoversConstructedAffine) {
  RpcModel m;
  m.line_off = 1000;
  m.samp_off = 1000;
  m.lat_off = 30;
  m.lon_off = 114;
  m.line_scale = 1000;
  m.samp_scale = 1000;
  m.lat_scale = 0.01;
  m.lon_scale = 0.01;
  m.height_scale = 100;
  m.num_l[kP] = -0.98;
  m.num_l[kL] = 0.03;
  m.num_s[kL] = 1.01;
  m.num_s[kP] = 0.02;
  m.den_l[k1] = 1.0;
  m.den_s[k1] = 1.0;
  const GeoRef ref(1e-5, 0.0, 0.0, -1e-5, 113.995, 30.006);

  // Expected map, built independently with Eigen.
  Eigen::Matrix2d a;  // (p, l) -> (rn, cn)
  a << -0.98, 0.03, 0.02, 1.01;
  const Eigen::Matrix2d ainv = a.inverse();
  auto expected = [&](Point2 s) {
    const Eigen::Vector2d img((s.y - 1000) / 1000, (s.x - 1000) / 1000);
    const Eigen::Vector2d pl = ainv * img;
    const double lat = pl(0) * 0.01 + 30, lon = pl(1) * 0.01 + 114;
    return ref.geo_to_pixel({lon, lat});
  };

  const Point2 ip{1100, 950};
  const LocalAffine la = local_affine_from_rfm(m, ref, ip, 50, 0.0);
  EXPECT_LE(la.residual_rms, 1e-6);
  for (Point2 s : {ip, Point2{1060, 910}, Point2{1140, 990}, Point2{1080, 1000}}) {
    const Point2 got = la.transform.apply(s), want = expected(s);
    EXPECT_NEAR(got.x, want.x, 1e-6);
    EXPECT_NEAR(got.y, want.y, 1e-6);
  }
}

TEST(LocalAffine, PureTranslation) {
  RpcModel m;
  m.lat_off = 30;
  m.lon_off = 114;
  m.line_scale = m.samp_scale = 1000;
  m.lat_scale = m.lon_scale = 0.01;
  m.num_l[kP] = -1.0;
  m.num_s[kL] = 1.0;
  m.den_l[k1] = m.den_s[k1] = 1.0;
  // 1e-5 degrees per pixel, north up: matches the RPC's own scale.
  const GeoRef ref(1e-5, 0.0, 0.0, -1e-5, 114.0 - 0.0002, 30.0 + 0.0003);
  const LocalAffine la = local_affine_from_rfm(m, ref, {100, -50}, 40, 0.0);
  EXPECT_NEAR(la.transform.a1, 1.0, 1e-6);
  EXPECT_NEAR(la.transform.a2, 0.0, 1e-6);
  EXPECT_NEAR(la.transform.b1, 0.0, 1e-6);
  EXPECT_NEAR(la.transform.b2, 1.0, 1e-6);
  EXPECT_NEAR(la.transform.a0, 20.0, 1e-6);
  EXPECT_NEAR(la.transform.b0, 30.0, 1e-6);
}

TEST(LocalAffine, SmoothCubicResidualIsSmall) {
  const RpcModel m = scene_rpc(22);
  const GeoRef ref(1e-5, 0.0, 0.0, -1e-5, 114.25, 30.55);
  const LocalAffine la = local_affine_from_rfm(m, ref, {4000, 6000}, 50, 0.0);
  EXPECT_LE(la.residual_rms, 0.5);
}

struct BiasData {
  std::vector<GroundControlPoint> cps;
  std::vector<bool> outlier;
};

// Observed (line, sample) such that RFM(ground) - observed = planted bias.
BiasData bias_data(const RpcModel& m, const AffineBias& planted, int n, double outlier_fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pix(1000.0, 9000.0), gross(20.0, 80.0), coin(0.0, 1.0);
  BiasData d;
  for (int i = 0; i < n; ++i) {
    const double line = pix(rng), samp = pix(rng);
    const ImagePoint rfm = planted.correct(line, samp);
    const RfmInverseResult g = rfm_inverse(m, rfm.line, rfm.sample, 0.0);
    GroundControlPoint cp{line, samp, {g.lat, g.lon, 0.0}};
    const bool bad = i < static_cast<int>(n * outlier_fraction);
    if (bad) {
      cp.line += gross(rng) * (coin(rng) < 0.5 ? -1 : 1);
      cp.sample += gross(rng) * (coin(rng) < 0.5 ? -1 : 1);
    }
    d.cps.push_back(cp);
    d.outlier.push_back(bad);
  }
  return d;
}

TEST(AffineBiasFit, ZeroBias) {
  const RpcModel m = scene_rpc(23);
  const auto d = bias_data(m, AffineBias{}, 30, 0.0, 24);
  const AffineBias b = affine_bias_fit(d.cps, m, 1.0).bias;
  for (double c : {b.a0, b.b0}) EXPECT_LE(std::abs(c), 1e-6);
  for (double c : {b.a1, b.a2, b.b1, b.b2}) EXPECT_LE(std::abs(c), 1e-9);
}

TEST(AffineBiasFit, PlantedBiasExact) {
  const RpcModel m = scene_rpc(25);
  AffineBias planted;
  planted.a0 = 3.2;
  planted.b1 = 1e-4;
  const auto d = bias_data(m, planted, 30, 0.0, 26);
  const auto r = affine_bias_fit(d.cps, m, 1.0);
  EXPECT_NEAR(r.bias.a0, 3.2, 1e-6);
  EXPECT_NEAR(r.bias.b1, 1e-4, 1e-6);
  EXPECT_NEAR(r.bias.a1, 0.0, 1e-6);
  EXPECT_NEAR(r.bias.a2, 0.0, 1e-6);
  EXPECT_NEAR(r.bias.b0, 0.0, 1e-6);
  EXPECT_NEAR(r.bias.b2, 0.0, 1e-6);
  for (auto v : r.inliers) EXPECT_TRUE(v);
}

TEST(AffineBiasFit, RejectsGrossOutliers) {
  const RpcModel m = scene_rpc(27);
  AffineBias planted;
  planted.a0 = 3.2;
  planted.b0 = -1.7;
  planted.b1 = 1e-4;
  planted.a2 = -2e-4;
  const auto d = bias_data(m, planted, 50, 0.2, 28);
  const auto r = affine_bias_fit(d.cps, m, 1.0);
  EXPECT_NEAR(r.bias.a0, 3.2, 1e-3);
  EXPECT_NEAR(r.bias.b0, -1.7, 1e-3);
  EXPECT_NEAR(r.bias.b1, 1e-4, 1e-3);
  EXPECT_NEAR(r.bias.a2, -2e-4, 1e-3);
  for (std::size_t i = 0; i < d.cps.size(); ++i) EXPECT_EQ(r.inliers[i] != 0, !d.outlier[i]) << i;
}

TEST(AffineBiasFit, TooFewPoints) {
  const RpcModel m = scene_rpc(29);
  const auto d = bias_data(m, AffineBias{}, 3, 0.0, 30);
  EXPECT_THROW(affine_bias_fit(d.cps, m, 1.0), MatchError);
}

TEST(AffineBias, UncorrectInvertsCorrect) {
  AffineBias b;
  b.a0 = 2.0;
  b.a1 = 1e-3;
  b.a2 = -2e-3;
  b.b0 = -1.0;
  b.b1 = 5e-4;
  b.b2 = 3e-4;
  const ImagePoint c = b.correct(1234.5, 678.9);
  const ImagePoint back = b.uncorrect(c.line, c.sample);
  EXPECT_NEAR(back.line, 1234.5, 1e-9);
  EXPECT_NEAR(back.sample, 678.9, 1e-9);
}

TEST(RfmCorrection, ReferenceToSensedComposes) {
  const RpcModel m = scene_rpc(31);
  const GeoRef ref(1e-5, 0.0, 0.0, -1e-5, 114.26, 30.54);
  AffineBias bias;
  bias.a0 = 1.5;
  bias.b0 = -0.5;
  const RfmCorrection corr{m, ref, bias, 0.0};
  const Point2 refpx{500, 700};
  const auto sensed = corr.reference_to_sensed(refpx);
  ASSERT_TRUE(sensed.has_value());
  const Point2 world = ref.pixel_to_geo(refpx);
  const ImagePoint img = rfm_forward(m, world.y, world.x, 0.0);
  EXPECT_NEAR(sensed->y, img.line - 1.5, 1e-9);
  EXPECT_NEAR(sensed->x, img.sample + 0.5, 1e-9);
  // far outside the RPC's validity range
  EXPECT_FALSE(corr.reference_to_sensed({1e7, 1e7}).has_value());
}

}  // namespace
}  // namespace sfoc
