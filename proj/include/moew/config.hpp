#pragma once

#include "moew/driver.hpp"

#include <filesystem>
#include <string>

namespace moew {

inline constexpr int kConfigVersion = 1;

/// Parses a JSON experiment description. Relative paths resolve against `base_dir`.
/// Unknown keys, missing required keys, and type errors raise ConfigError with the
/// dotted key path.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

} // namespace moew
