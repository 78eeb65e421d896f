#include "sfoc/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace sfoc {
namespace {

constexpr std::int64_t kMaxPixels = std::int64_t{1} << 30;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& header,
                const std::vector<unsigned char>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// Reads whitespace-separated header tokens, skipping '#' comments.
class HeaderReader {
 public:
  HeaderReader(const std::vector<unsigned char>& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) out.push_back(static_cast<char>(bytes_[pos_++]));
    if (out.empty()) throw IoError("malformed header: unexpected end of file");
    return out;
  }

  std::int64_t integer() {
    const std::string t = token();
    std::int64_t v = 0;
    for (char ch : t) {
      if (ch < '0' || ch > '9') throw IoError("malformed header: expected integer, got '" + t + "'");
      v = v * 10 + (ch - '0');
      if (v > kMaxPixels) throw IoError("malformed header: value overflow");
    }
    return v;
  }

  // Consumes exactly one whitespace byte separating header and binary data.
  void end_of_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw IoError("malformed header: missing separator");
    ++pos_;
  }

  std::size_t position() const { return pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_;
};

void check_dimensions(std::int64_t w, std::int64_t h) {
  if (w <= 0 || h <= 0) throw IoError("malformed header: non-positive dimensions");
  if (w * h > kMaxPixels) throw IoError("dimension overflow");
}

Raster load_pgm(const std::vector<unsigned char>& bytes, bool binary) {
  HeaderReader header(bytes, 2);
  const std::int64_t w = header.integer();
  const std::int64_t h = header.integer();
  check_dimensions(w, h);
  const std::int64_t maxval = header.integer();
  if (maxval <= 0 || maxval > 65535) throw IoError("malformed header: maxval out of range");

  const auto count = static_cast<std::size_t>(w * h);
  Plane plane(static_cast<int>(w), static_cast<int>(h));
  const double scale = 1.0 / static_cast<double>(maxval);

  if (binary) {
    header.end_of_header();
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    const std::size_t start = header.position();
    if (bytes.size() < start + count * bytes_per) throw IoError("truncated PGM data");
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t v = bytes[start + i * bytes_per];
      if (bytes_per == 2) v = (v << 8) | bytes[start + i * bytes_per + 1];
      if (v > static_cast<std::uint32_t>(maxval)) throw IoError("PGM sample exceeds maxval");
      plane.data[i] = v * scale;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::int64_t v = header.integer();
      if (v > maxval) throw IoError("PGM sample exceeds maxval");
      plane.data[i] = static_cast<double>(v) * scale;
    }
  }
  return Raster::from_plane(std::move(plane), maxval > 255 ? BitDepth::k16 : BitDepth::k8);
}

float read_le_float(const unsigned char* p) {
  std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
                       (std::uint32_t{p[3]} << 24);
  return std::bit_cast<float>(bits);
}

void write_le_float(float v, unsigned char* p) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  p[0] = static_cast<unsigned char>(bits & 0xFF);
  p[1] = static_cast<unsigned char>((bits >> 8) & 0xFF);
  p[2] = static_cast<unsigned char>((bits >> 16) & 0xFF);
  p[3] = static_cast<unsigned char>((bits >> 24) & 0xFF);
}

Raster load_fras(const std::vector<unsigned char>& bytes) {
  HeaderReader header(bytes, 0);
  if (header.token() != "FRAS" || header.token() != "1") throw IoError("malformed float raster header");
  const std::int64_t w = header.integer();
  const std::int64_t h = header.integer();
  check_dimensions(w, h);
  header.end_of_header();
  const auto count = static_cast<std::size_t>(w * h);
  const std::size_t start = header.position();
  if (bytes.size() < start + count * 4) throw IoError("truncated float raster data");

  Plane plane(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < count; ++i) {
    const float v = read_le_float(&bytes[start + 4 * i]);
    if (!std::isfinite(v)) throw IoError("float raster contains non-finite values");
    plane.data[i] = std::clamp(static_cast<double>(v), 0.0, 1.0);
  }
  return Raster::from_plane(std::move(plane), BitDepth::kFloat);
}

}  // namespace

Raster::Raster(int width, int height, double fill) : plane_(width, height, fill) {
  if (!(fill >= 0.0 && fill <= 1.0)) throw std::invalid_argument("Raster: fill outside [0,1]");
}

Raster Raster::from_plane(Plane plane, BitDepth origin) {
  for (double v : plane.data) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw std::invalid_argument("Raster: intensity outside [0,1]");
  }
  Raster r;
  r.plane_ = std::move(plane);
  r.origin_ = origin;
  return r;
}

Raster Raster::from_plane_clamped(Plane plane, BitDepth origin) {
  for (double& v : plane.data) {
    if (!std::isfinite(v)) throw std::invalid_argument("Raster: non-finite intensity");
    v = std::clamp(v, 0.0, 1.0);
  }
  Raster r;
  r.plane_ = std::move(plane);
  r.origin_ = origin;
  return r;
}

GeoRef::GeoRef(double a, double d, double b, double e, double c, double f)
    : a_(a), d_(d), b_(b), e_(e), c_(c), f_(f) {
  const double det = a * e - b * d;
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(d), std::abs(e)});
  if (!std::isfinite(det) || scale == 0.0 || std::abs(det) <= 1e-12 * scale * scale) {
    throw std::invalid_argument("GeoRef: singular pixel-to-world matrix");
  }
}

Point2 GeoRef::pixel_to_geo(Point2 p) const { return {a_ * p.x + b_ * p.y + c_, d_ * p.x + e_ * p.y + f_}; }

Point2 GeoRef::geo_to_pixel(Point2 w) const {
  const double det = a_ * e_ - b_ * d_;
  const double dx = w.x - c_;
  const double dy = w.y - f_;
  return {(e_ * dx - b_ * dy) / det, (-d_ * dx + a_ * dy) / det};
}

double GeoRef::pixel_size() const { return std::sqrt(std::abs(a_ * e_ - b_ * d_)); }

Raster load_raster(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2')) {
    return load_pgm(bytes, bytes[1] == '5');
  }
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "FRAS", 4) == 0) return load_fras(bytes);
  throw IoError("unrecognized raster format: " + path.string());
}

void save_raster(const Raster& raster, const std::filesystem::path& path, RasterFormat format) {
  const auto count = raster.data().size();
  std::ostringstream header;
  std::vector<unsigned char> body;
  switch (format) {
    case RasterFormat::kPgm8:
      header << "P5\n" << raster.width() << ' ' << raster.height() << "\n255\n";
      body.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        body[i] = static_cast<unsigned char>(std::lround(raster.data()[i] * 255.0));
      }
      break;
    case RasterFormat::kPgm16:
      header << "P5\n" << raster.width() << ' ' << raster.height() << "\n65535\n";
      body.resize(count * 2);
      for (std::size_t i = 0; i < count; ++i) {
        const auto v = static_cast<std::uint16_t>(std::lround(raster.data()[i] * 65535.0));
        body[2 * i] = static_cast<unsigned char>(v >> 8);
        body[2 * i + 1] = static_cast<unsigned char>(v & 0xFF);
      }
      break;
    case RasterFormat::kFloat:
      header << "FRAS 1\n" << raster.width() << ' ' << raster.height() << "\n";
      body.resize(count * 4);
      for (std::size_t i = 0; i < count; ++i) {
        write_le_float(static_cast<float>(raster.data()[i]), &body[4 * i]);
      }
      break;
  }
  write_file(path, header.str(), body);
}

RasterFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".fras" || ext == ".raw") return RasterFormat::kFloat;
  return RasterFormat::kPgm8;
}

GeoRef load_world_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open world file " + path.string());
  double v[6];
  for (double& x : v) {
    if (!(in >> x)) throw IoError("malformed world file " + path.string());
  }
  try {
    return GeoRef(v[0], v[1], v[2], v[3], v[4], v[5]);
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("world file ") + path.string() + ": " + e.what());
  }
}

void save_world_file(const GeoRef& geo, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write world file " + path.string());
  out.precision(17);
  out << geo.a() << '\n' << geo.d() << '\n' << geo.b() << '\n' << geo.e() << '\n' << geo.c() << '\n' << geo.f() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Sample bilinear_sample(const Plane& plane, double x, double y) {
  if (!(x >= 0.0 && y >= 0.0 && x <= plane.width - 1 && y <= plane.height - 1)) return {0.0, false};
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = fx > 0.0 ? x0 + 1 : x0;
  const int y1 = fy > 0.0 ? y0 + 1 : y0;
  const double top = plane.at(x0, y0) + fx * (plane.at(x1, y0) - plane.at(x0, y0));
  const double bottom = plane.at(x0, y1) + fx * (plane.at(x1, y1) - plane.at(x0, y1));
  return {top + fy * (bottom - top), true};
}

Patch extract_patch(const Raster& raster, int center_x, int center_y, int half_w, int half_h) {
  if (half_w < 0 || half_h < 0) throw std::invalid_argument("extract_patch: negative half size");
  return crop(raster, center_x - half_w, center_y - half_h, 2 * half_w + 1, 2 * half_h + 1);
}

Patch crop(const Raster& raster, int x0, int y0, int width, int height) {
  if (width <= 0 || height <= 0 || x0 < 0 || y0 < 0 || x0 + width > raster.width() ||
      y0 + height > raster.height()) {
    throw std::out_of_range("crop: rectangle exceeds raster bounds");
  }
  Plane out(width, height);
  for (int y = 0; y < height; ++y) {
    const double* src = &raster.plane().data[raster.plane().index(x0, y0 + y)];
    std::copy(src, src + width, &out.data[out.index(0, y)]);
  }
  return {Raster::from_plane(std::move(out), raster.bit_depth_origin()), x0, y0};
}

}  // namespace sfoc
