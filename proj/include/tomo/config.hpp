#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "tomo/planner.hpp"
#include "tomo/simplify.hpp"
#include "tomo/trajectory.hpp"
#include "tomo/traversability.hpp"

namespace tomo {

/// Every tunable of the pipeline. The INI form has three sections:
///
///   [map]            d_s r_g eps_e threads
///   [traversability] TravParams fields (d_min, d_ref, c_barrier are shared
///                    with the trajectory stage)
///   [trajectory]     remaining OptConfig fields
struct PipelineConfig {
  double d_s = 0.50;
  double r_g = 0.10;
  double eps_e = 1e-6;
  unsigned threads = 0;  // 0 = hardware concurrency
  TravParams traversability;
  OptConfig trajectory;

  /// Throws InvalidArgument.
  void validate() const;

  SimplifyOptions simplify_options() const;
  PlannerOptions planner_options() const;
  /// Trajectory options with the shared robot fields copied in.
  OptConfig trajectory_options() const;
};

/// Parses INI text; unknown sections or keys and malformed values throw
/// FormatError naming `source`. The result is validated.
PipelineConfig parse_config(std::string_view text, std::string_view source = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);

/// Sets one "section.key" to a textual value (used for command-line overrides).
void set_config_value(PipelineConfig& config, std::string_view dotted_key, std::string_view value);

/// INI text that parses back to the same configuration.
std::string format_config(const PipelineConfig& config);

}  // namespace tomo
