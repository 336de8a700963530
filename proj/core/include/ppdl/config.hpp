#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ppdl/sim.hpp"

namespace ppdl {

struct ParsedConfig {
  SimConfig config;
  // One "key = value" line per field that was not given and took a default.
  std::vector<std::string> defaults_applied;
};

// Parses a JSON experiment config. Required keys: method, nodes, group_size,
// rounds, layout. Unknown keys are rejected; the result is validated.
// `method_override` replaces the file's method before defaults are resolved.
ParsedConfig parse_config_text(std::string_view text,
                               std::optional<Method> method_override = std::nullopt);
ParsedConfig parse_config(const std::filesystem::path& path,
                          std::optional<Method> method_override = std::nullopt);

// Fully resolved config as canonical JSON (sorted keys, every field present).
std::string serialize_config(const SimConfig& config);

// Stable digest of every field that affects results, excluding the seed and
// thread count. Independent of key order in the source file.
std::string config_digest(const SimConfig& config);

}  // namespace ppdl
