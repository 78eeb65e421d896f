#include "sfoc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace sfoc {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": not a number: '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": not an integer: '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(key + ": out of range: '" + v + "'");
  }
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

std::string num(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct KeySpec {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<std::string> kPathKeys = {"sensed",    "reference", "sensed_world", "reference_world",
                                            "rpc",       "truth",     "truth_cps",    "out_dir"};

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    auto add = [&](std::string key, std::function<void(RunConfig&, const std::string&)> set,
                   std::function<std::string(const RunConfig&)> get) {
      t.push_back({std::move(key), std::move(set), std::move(get)});
    };
    // Matching
    add("template_size", [](RunConfig& c, const std::string& v) { c.match.template_size = to_int("template_size", v); },
        [](const RunConfig& c) { return std::to_string(c.match.template_size); });
    add("search_size", [](RunConfig& c, const std::string& v) { c.match.search_size = to_int("search_size", v); },
        [](const RunConfig& c) { return std::to_string(c.match.search_size); });
    add("ip_count", [](RunConfig& c, const std::string& v) { c.match.ip_count = to_int("ip_count", v); },
        [](const RunConfig& c) { return std::to_string(c.match.ip_count); });
    add("min_score", [](RunConfig& c, const std::string& v) { c.match.min_score = to_double("min_score", v); },
        [](const RunConfig& c) { return num(c.match.min_score); });
    add("correct_threshold",
        [](RunConfig& c, const std::string& v) { c.match.correct_threshold = to_double("correct_threshold", v); },
        [](const RunConfig& c) { return num(c.match.correct_threshold); });
    add("model", [](RunConfig& c, const std::string& v) { c.match.model = parse_registration_model(v); },
        [](const RunConfig& c) { return model_name(c.match.model); });
    add("h0", [](RunConfig& c, const std::string& v) { c.match.h0 = to_double("h0", v); },
        [](const RunConfig& c) { return num(c.match.h0); });
    add("descriptor", [](RunConfig& c, const std::string& v) { c.match.descriptor = parse_descriptor_kind(v); },
        [](const RunConfig& c) { return descriptor_name(c.match.descriptor); });
    add("fast_threshold",
        [](RunConfig& c, const std::string& v) { c.match.fast_threshold = to_double("fast_threshold", v); },
        [](const RunConfig& c) { return num(c.match.fast_threshold); });
    add("subpixel", [](RunConfig& c, const std::string& v) { c.match.subpixel = to_bool("subpixel", v); },
        [](const RunConfig& c) { return std::string(c.match.subpixel ? "true" : "false"); });
    add("workers", [](RunConfig& c, const std::string& v) { c.match.workers = to_int("workers", v); },
        [](const RunConfig& c) { return std::to_string(c.match.workers); });
    // Descriptor
    add("orientations", [](RunConfig& c, const std::string& v) { c.match.sfoc.orientations = to_int("orientations", v); },
        [](const RunConfig& c) { return std::to_string(c.match.sfoc.orientations); });
    add("sigmas_first",
        [](RunConfig& c, const std::string& v) {
          c.match.sfoc.sigmas_first.clear();
          for (const auto& s : split_list(v)) c.match.sfoc.sigmas_first.push_back(to_double("sigmas_first", s));
        },
        [](const RunConfig& c) { return join(c.match.sfoc.sigmas_first); });
    add("sigmas_second",
        [](RunConfig& c, const std::string& v) {
          c.match.sfoc.sigmas_second.clear();
          for (const auto& s : split_list(v)) c.match.sfoc.sigmas_second.push_back(to_double("sigmas_second", s));
        },
        [](const RunConfig& c) { return join(c.match.sfoc.sigmas_second); });
    add("dilation_rates",
        [](RunConfig& c, const std::string& v) {
          c.match.sfoc.dilation_rates.clear();
          for (const auto& s : split_list(v)) c.match.sfoc.dilation_rates.push_back(to_int("dilation_rates", s));
        },
        [](const RunConfig& c) { return join(c.match.sfoc.dilation_rates); });
    add("smooth_sigma_first",
        [](RunConfig& c, const std::string& v) {
          c.match.sfoc.smooth_sigma_first = to_double("smooth_sigma_first", v);
        },
        [](const RunConfig& c) { return num(c.match.sfoc.smooth_sigma_first); });
    add("smooth_sigma_second",
        [](RunConfig& c, const std::string& v) {
          c.match.sfoc.smooth_sigma_second = to_double("smooth_sigma_second", v);
        },
        [](const RunConfig& c) { return num(c.match.sfoc.smooth_sigma_second); });
    add("epsilon", [](RunConfig& c, const std::string& v) { c.match.sfoc.epsilon = to_double("epsilon", v); },
        [](const RunConfig& c) { return num(c.match.sfoc.epsilon); });
    add("first_order_only",
        [](RunConfig& c, const std::string& v) { c.match.sfoc.first_order_only = to_bool("first_order_only", v); },
        [](const RunConfig& c) { return std::string(c.match.sfoc.first_order_only ? "true" : "false"); });
    // Outlier rejection
    add("ransac_threshold",
        [](RunConfig& c, const std::string& v) { c.match.ransac.inlier_threshold = to_double("ransac_threshold", v); },
        [](const RunConfig& c) { return num(c.match.ransac.inlier_threshold); });
    add("ransac_max_iterations",
        [](RunConfig& c, const std::string& v) {
          c.match.ransac.max_iterations = to_int("ransac_max_iterations", v);
        },
        [](const RunConfig& c) { return std::to_string(c.match.ransac.max_iterations); });
    add("ransac_confidence",
        [](RunConfig& c, const std::string& v) { c.match.ransac.confidence = to_double("ransac_confidence", v); },
        [](const RunConfig& c) { return num(c.match.ransac.confidence); });
    add("ransac_min_inlier_fraction",
        [](RunConfig& c, const std::string& v) {
          c.match.ransac.min_inlier_fraction = to_double("ransac_min_inlier_fraction", v);
        },
        [](const RunConfig& c) { return num(c.match.ransac.min_inlier_fraction); });
    add("seed",
        [](RunConfig& c, const std::string& v) {
          const long long s = to_integer("seed", v);
          if (s < 0) throw ConfigError("seed must be non-negative");
          c.match.ransac.seed = static_cast<std::uint64_t>(s);
        },
        [](const RunConfig& c) { return std::to_string(c.match.ransac.seed); });
    for (const auto& key : kPathKeys) {
      add(key,
          [key](RunConfig& c, const std::string& v) {
            if (v.empty()) {
              c.paths.erase(key);
            } else {
              c.paths[key] = v;
            }
          },
          [key](const RunConfig& c) {
            const auto it = c.paths.find(key);
            return it == c.paths.end() ? std::string() : it->second;
          });
    }
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& spec : key_table()) k.push_back(spec.key);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& spec : key_table()) {
    if (spec.key == key) {
      spec.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void load_run_config(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string format_run_config(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& spec : key_table()) out << spec.key << " = " << spec.get(config) << '\n';
  return out.str();
}

}  // namespace sfoc
