#pragma once

// Run configuration: a small TOML reader, the typed run config, and the
// resolved-config writer.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "uq/inference.hpp"
#include "uq/problems.hpp"

namespace uq {

// Parses tables, dotted table headers, key = value pairs with strings,
// integers, floats, booleans and (possibly multi-line) arrays. Integers are
// stored as signed or unsigned JSON numbers, floats as doubles.
nlohmann::json parse_toml(std::string_view text);

struct RunConfig {
  std::uint64_t seed = 0;
  std::string problem;
  std::optional<std::uint64_t> data_seed;  // default: seed
  ModelOptions model;
  InferenceConfig inference;
  bool calibration = false;
  double split_fraction = 0.0;
  std::filesystem::path output_dir = "uq_out";
  std::size_t grid_size = 0;  // 0: whole reference grid

  std::uint64_t resolved_data_seed() const { return data_seed.value_or(seed); }
  // Propagates the run seed and the method's family into the sub-configs.
  void resolve();
};

// Unknown tables or keys are errors.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig parse_run_config_text(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

// Every field written explicitly; parse_run_config_text(to_toml(c)) == c.
std::string to_toml(const RunConfig& config);

// Default surrogate kind for a problem and family.
std::string default_surrogate(std::string_view problem, Family family);

}  // namespace uq
