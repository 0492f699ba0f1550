#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "perspective/run_config.hpp"

namespace perspective {

/// Content hash of the sources this binary was built from.
std::string code_hash();

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "PERSPECTIVE_OUT";
/// $PERSPECTIVE_OUT, or "runs" when unset.
std::string default_output_root();

/// Creates <out>/<UTC timestamp>-<kind>-<vision>-<action>/, adding a numeric
/// suffix if the name is taken.
std::filesystem::path make_run_dir(const RunConfig& config);

struct RunOutcome {
  std::filesystem::path dir;
  nlohmann::json manifest;
};

/// Executes a resolved config and writes manifest.json, logs, checkpoints and
/// reports under a fresh run directory. Progress lines go to `console`.
RunOutcome execute_run(const RunConfig& config, const std::vector<std::string>& argv, std::ostream& console);

/// Re-executes the config recorded in a manifest, optionally under a different output root.
RunOutcome rerun_manifest(const std::filesystem::path& manifest, const std::string& out_override,
                          const std::vector<std::string>& argv, std::ostream& console);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace perspective
