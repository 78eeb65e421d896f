#include "sfoc/rpc.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <Eigen/Dense>

namespace sfoc {
namespace {

constexpr double kMinDenominator = 1e-10;
constexpr double kInputMargin = 1.2;
constexpr double kInverseTolerance = 1e-6;
constexpr int kInverseIterations = 50;

double dot(const std::array<double, 20>& coeffs, const std::array<double, 20>& terms) {
  double acc = 0.0;
  for (std::size_t i = 0; i < 20; ++i) acc += coeffs[i] * terms[i];
  return acc;
}

// Normalized ground -> normalized image, no range checks.
bool eval_normalized(const RpcModel& rpc, double p, double l, double h, double& rn, double& cn) {
  const auto t = rpc_terms(p, l, h);
  const double dl = dot(rpc.den_l, t);
  const double ds = dot(rpc.den_s, t);
  if (!(std::abs(dl) >= kMinDenominator) || !(std::abs(ds) >= kMinDenominator)) return false;
  rn = dot(rpc.num_l, t) / dl;
  cn = dot(rpc.num_s, t) / ds;
  return std::isfinite(rn) && std::isfinite(cn);
}

const char* const kScalarKeys[10] = {"LINE_OFF",   "SAMP_OFF",   "LAT_OFF",   "LONG_OFF",   "HEIGHT_OFF",
                                     "LINE_SCALE", "SAMP_SCALE", "LAT_SCALE", "LONG_SCALE", "HEIGHT_SCALE"};

std::array<double*, 10> scalar_fields(RpcModel& m) {
  return {&m.line_off,   &m.samp_off,   &m.lat_off,   &m.lon_off,   &m.height_off,
          &m.line_scale, &m.samp_scale, &m.lat_scale, &m.lon_scale, &m.height_scale};
}

}  // namespace

void RpcModel::validate() const {
  for (double s : {line_scale, samp_scale, lat_scale, lon_scale, height_scale}) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("RPC: scales must be positive and finite");
  }
  for (double o : {line_off, samp_off, lat_off, lon_off, height_off}) {
    if (!std::isfinite(o)) throw std::invalid_argument("RPC: offsets must be finite");
  }
  for (const auto* arr : {&num_l, &den_l, &num_s, &den_s}) {
    for (double c : *arr) {
      if (!std::isfinite(c)) throw std::invalid_argument("RPC: coefficients must be finite");
    }
  }
}

std::array<double, 20> rpc_terms(double p, double l, double h) {
  return {1.0,       l,         p,         h,         l * p,     l * h,     p * h,
          l * l,     p * p,     h * h,     p * l * h, l * l * l, l * p * p, l * h * h,
          l * l * p, p * p * p, p * h * h, l * l * h, p * p * h, h * h * h};
}

ImagePoint rfm_forward(const RpcModel& rpc, double lat, double lon, double h) {
  const double p = (lat - rpc.lat_off) / rpc.lat_scale;
  const double l = (lon - rpc.lon_off) / rpc.lon_scale;
  const double hn = (h - rpc.height_off) / rpc.height_scale;
  for (double v : {p, l, hn}) {
    if (!(std::abs(v) < kInputMargin)) throw std::out_of_range("rfm_forward: normalized input outside (-1.2, 1.2)");
  }
  double rn = 0.0, cn = 0.0;
  if (!eval_normalized(rpc, p, l, hn, rn, cn)) throw DegenerateError("rfm_forward: denominator vanishes");
  return {rn * rpc.line_scale + rpc.line_off, cn * rpc.samp_scale + rpc.samp_off};
}

RfmInverseResult rfm_inverse(const RpcModel& rpc, double line, double sample, double h) {
  const double rt = (line - rpc.line_off) / rpc.line_scale;
  const double ct = (sample - rpc.samp_off) / rpc.samp_scale;
  const double hn = (h - rpc.height_off) / rpc.height_scale;

  auto residual = [&](double p, double l, Eigen::Vector2d& r) {
    double rn = 0.0, cn = 0.0;
    if (!eval_normalized(rpc, p, l, hn, rn, cn)) return false;
    r << rn - rt, cn - ct;
    return true;
  };
  auto newton_step = [&](double p, double l, const Eigen::Vector2d& r, Eigen::Vector2d& step) {
    constexpr double d = 1e-6;
    Eigen::Vector2d rp, rm;
    Eigen::Matrix2d jac;
    if (!residual(p + d, l, rp) || !residual(p - d, l, rm)) return false;
    jac.col(0) = (rp - rm) / (2.0 * d);
    if (!residual(p, l + d, rp) || !residual(p, l - d, rm)) return false;
    jac.col(1) = (rp - rm) / (2.0 * d);
    if (!(std::abs(jac.determinant()) > 1e-14)) return false;
    step = -jac.inverse() * r;
    return true;
  };

  double p = 0.0, l = 0.0;
  Eigen::Vector2d r;
  if (!residual(p, l, r)) throw DegenerateError("rfm_inverse: denominator vanishes at the seed");
  for (int it = 1; it <= kInverseIterations; ++it) {
    if (r.cwiseAbs().maxCoeff() < kInverseTolerance) {
      // One polishing step; kept only if it helps.
      Eigen::Vector2d step, r2;
      if (newton_step(p, l, r, step) && residual(p + step(0), l + step(1), r2) && r2.norm() < r.norm()) {
        p += step(0);
        l += step(1);
      }
      return {p * rpc.lat_scale + rpc.lat_off, l * rpc.lon_scale + rpc.lon_off, it};
    }
    Eigen::Vector2d step;
    if (!newton_step(p, l, r, step)) break;
    // Halve the step until the residual norm decreases.
    bool moved = false;
    for (double lambda = 1.0; lambda > 1e-6; lambda /= 2.0) {
      Eigen::Vector2d trial;
      if (residual(p + lambda * step(0), l + lambda * step(1), trial) && trial.norm() < r.norm()) {
        p += lambda * step(0);
        l += lambda * step(1);
        r = trial;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  throw DegenerateError("rfm_inverse: did not converge");
}

RpcModel load_rpc(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open RPC file: " + path.string());
  std::map<std::string, double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected KEY: value");
    }
    std::string key = line.substr(0, colon);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t\r") + 1);
    const std::string rest = line.substr(colon + 1);
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) continue;  // non-numeric entries (e.g. satellite id) are ignored
    values[key] = v;
  }
  auto take = [&](const std::string& key) {
    const auto it = values.find(key);
    if (it == values.end()) throw IoError("RPC file " + path.string() + " lacks " + key);
    return it->second;
  };

  RpcModel m;
  const auto fields = scalar_fields(m);
  for (std::size_t i = 0; i < fields.size(); ++i) *fields[i] = take(kScalarKeys[i]);
  const std::pair<const char*, std::array<double, 20>*> arrays[] = {
      {"LINE_NUM_COEFF_", &m.num_l}, {"LINE_DEN_COEFF_", &m.den_l},
      {"SAMP_NUM_COEFF_", &m.num_s}, {"SAMP_DEN_COEFF_", &m.den_s}};
  for (const auto& [prefix, arr] : arrays) {
    for (std::size_t i = 0; i < 20; ++i) (*arr)[i] = take(prefix + std::to_string(i + 1));
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return m;
}

void save_rpc(const RpcModel& rpc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write RPC file: " + path.string());
  out.precision(17);
  RpcModel copy = rpc;
  const auto fields = scalar_fields(copy);
  for (std::size_t i = 0; i < fields.size(); ++i) out << kScalarKeys[i] << ": " << *fields[i] << '\n';
  const std::pair<const char*, const std::array<double, 20>*> arrays[] = {
      {"LINE_NUM_COEFF_", &rpc.num_l}, {"LINE_DEN_COEFF_", &rpc.den_l},
      {"SAMP_NUM_COEFF_", &rpc.num_s}, {"SAMP_DEN_COEFF_", &rpc.den_s}};
  for (const auto& [prefix, arr] : arrays) {
    for (std::size_t i = 0; i < 20; ++i) out << prefix << i + 1 << ": " << (*arr)[i] << '\n';
  }
  if (!out) throw IoError("failed writing RPC file: " + path.string());
}

LocalAffine local_affine_from_rfm(const RpcModel& rpc, const GeoRef& reference, Point2 ip, int half_size,
                                  double h0) {
  if (half_size <= 0) throw std::invalid_argument("local_affine_from_rfm: half_size must be positive");
  const double hs = half_size;
  const Point2 sensed[5] = {{ip.x - hs, ip.y - hs}, {ip.x + hs, ip.y - hs}, {ip.x - hs, ip.y + hs},
                            {ip.x + hs, ip.y + hs}, ip};
  std::vector<PointPair> pairs;
  for (const Point2& s : sensed) {
    const RfmInverseResult g = rfm_inverse(rpc, s.y, s.x, h0);
    pairs.push_back({s, reference.geo_to_pixel({g.lon, g.lat})});
  }
  LocalAffine out;
  out.transform = estimate_affine(pairs);
  double sq = 0.0;
  for (const auto& pr : pairs) {
    const Point2 q = out.transform.apply(pr.src);
    sq += (q.x - pr.dst.x) * (q.x - pr.dst.x) + (q.y - pr.dst.y) * (q.y - pr.dst.y);
  }
  out.residual_rms = std::sqrt(sq / static_cast<double>(pairs.size()));
  return out;
}

ImagePoint AffineBias::uncorrect(double line, double sample) const {
  Eigen::Matrix2d m;
  m << 1.0 + a1, a2, b1, 1.0 + b2;
  const double det = m.determinant();
  if (!(std::abs(det) > 1e-12)) throw DegenerateError("affine bias is not invertible");
  const Eigen::Vector2d rc = m.inverse() * Eigen::Vector2d(line - a0, sample - b0);
  return {rc(0), rc(1)};
}

AffineBiasResult affine_bias_fit(const std::vector<GroundControlPoint>& cps, const RpcModel& rpc,
                                 double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("affine_bias_fit: threshold must be positive");
  const std::size_t n = cps.size();
  std::vector<double> dr(n, 0.0), dc(n, 0.0);
  AffineBiasResult result;
  result.inliers.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const ImagePoint pred = rfm_forward(rpc, cps[i].ground.lat, cps[i].ground.lon, cps[i].ground.h);
      dr[i] = pred.line - cps[i].line;
      dc[i] = pred.sample - cps[i].sample;
      result.inliers[i] = 1;
    } catch (const std::out_of_range&) {
    } catch (const DegenerateError&) {
    }
  }

  // Center and scale the image coordinates for conditioning.
  double mr = 0.0, mc = 0.0;
  for (const auto& cp : cps) {
    mr += cp.line;
    mc += cp.sample;
  }
  mr /= std::max<double>(1.0, static_cast<double>(n));
  mc /= std::max<double>(1.0, static_cast<double>(n));
  double spread = 0.0;
  for (const auto& cp : cps) spread = std::max({spread, std::abs(cp.line - mr), std::abs(cp.sample - mc)});
  if (!(spread > 0.0)) spread = 1.0;

  for (;;) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i) {
      if (result.inliers[i]) active.push_back(i);
    }
    if (active.size() < 4) {
      throw MatchError("affine_bias_fit: only " + std::to_string(active.size()) + " points survive");
    }
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd design(k, 3);
    Eigen::MatrixXd rhs(k, 2);
    for (Eigen::Index j = 0; j < k; ++j) {
      const std::size_t i = active[static_cast<std::size_t>(j)];
      design.row(j) << 1.0, (cps[i].line - mr) / spread, (cps[i].sample - mc) / spread;
      rhs.row(j) << dr[i], dc[i];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (!(svd.singularValues()(2) > 1e-10 * svd.singularValues()(0))) {
      throw DegenerateError("affine_bias_fit: control points are collinear");
    }
    const Eigen::MatrixXd sol = svd.solve(rhs);
    AffineBias& b = result.bias;
    b.a1 = sol(1, 0) / spread;
    b.a2 = sol(2, 0) / spread;
    b.a0 = sol(0, 0) - b.a1 * mr - b.a2 * mc;
    b.b1 = sol(1, 1) / spread;
    b.b2 = sol(2, 1) / spread;
    b.b0 = sol(0, 1) - b.b1 * mr - b.b2 * mc;

    double worst = -1.0, sq = 0.0;
    std::size_t worst_i = 0;
    for (std::size_t i : active) {
      const double er = dr[i] - (b.a0 + b.a1 * cps[i].line + b.a2 * cps[i].sample);
      const double ec = dc[i] - (b.b0 + b.b1 * cps[i].line + b.b2 * cps[i].sample);
      const double e = std::hypot(er, ec);
      sq += e * e;
      if (e > worst) {
        worst = e;
        worst_i = i;
      }
    }
    b.residual_rms = std::sqrt(sq / static_cast<double>(active.size()));
    if (worst <= threshold) break;
    result.inliers[worst_i] = 0;
  }
  return result;
}

std::optional<Point2> RfmCorrection::reference_to_sensed(Point2 ref) const {
  const Point2 world = reference.pixel_to_geo(ref);
  try {
    const ImagePoint corrected = rfm_forward(rpc, world.y, world.x, h0);
    const ImagePoint raw = bias.uncorrect(corrected.line, corrected.sample);
    return Point2{raw.sample, raw.line};
  } catch (const std::out_of_range&) {
    return std::nullopt;
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
}

}  // namespace sfoc
