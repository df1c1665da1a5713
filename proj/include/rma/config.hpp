#pragma once
// Run configuration shared by the command-line tools.
//
// File format: one `key = value` per line; blank lines and lines starting
// with '#' are ignored. Unknown keys are rejected. Later settings override
// earlier ones, so flags are applied after the file.

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rma/dataset.hpp"
#include "rma/evaluation.hpp"
#include "rma/trainer.hpp"

namespace rma {

struct RunConfig {
  TrainConfig train;
  GeneratorConfig data;
  std::size_t test_samples = 200;
  std::size_t top_k = 3;
  double threshold = 0.5;
  /// "single" or "ten".
  std::string views = "single";
  /// Feature-map crop side for ten-view evaluation; 0 picks map size - 1.
  std::size_t crop = 0;

  /// Full validation; throws ConfigError naming the offending setting.
  void validate() const;
};

/// Every accepted key, in the order `format_config` writes them.
const std::vector<std::string>& config_keys();

/// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

using Settings = std::vector<std::pair<std::string, std::string>>;

Settings parse_config_text(const std::string& text, const std::string& origin = "config");
Settings read_config_file(const std::filesystem::path& path);

void apply_settings(RunConfig& config, const Settings& settings);

/// `key = value` lines for every key; parses back to the same configuration.
std::string format_config(const RunConfig& config);

/// Writes `<dir>/config.txt`.
void write_effective_config(const std::filesystem::path& dir, const RunConfig& config);

}  // namespace rma
