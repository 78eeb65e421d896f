#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sfoc/pipeline.hpp"

namespace sfoc {

/// Flat run configuration: every MatchConfig, SfocParams and RansacConfig
/// field under one key, plus input/output paths.
///
/// File format: one `key = value` per line; `#` starts a comment. Lists are
/// comma separated. Unknown keys are rejected.
struct RunConfig {
  MatchConfig match;
  std::map<std::string, std::string> paths;
};

/// Every accepted key, in documentation order.
const std::vector<std::string>& config_keys();

/// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses "key=value" (the command-line override form).
void apply_override(RunConfig& config, const std::string& assignment);

/// Applies a config file on top of `config`. Throws IoError when unreadable.
void load_run_config(RunConfig& config, const std::filesystem::path& path);

/// Every key with its current value, in file format.
std::string format_run_config(const RunConfig& config);

}  // namespace sfoc
