#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "perspective/probe.hpp"
#include "perspective/train.hpp"

namespace perspective {

enum class RunKind { Rl, Supervised, Eval, Probe, Enumerate, Render };
std::string to_string(RunKind k);
RunKind parse_run_kind(const std::string& s);

/// Which controller an eval run drives.
enum class EvalAgent { Network, Oracle, Random };
std::string to_string(EvalAgent a);
EvalAgent parse_eval_agent(const std::string& s);

/// Everything a run needs. The resolved form (profile defaults, then the
/// config file, then flags) is what a manifest records, so a manifest alone
/// reproduces the run.
struct RunConfig {
  RunKind kind = RunKind::Rl;
  Profile profile = Profile::Desk;
  VisualMode vision = VisualMode::Egocentric;
  ActionMode action = ActionMode::Egocentric;
  std::vector<std::uint64_t> seeds;
  std::string out;
  RlConfig rl;
  SupervisedConfig supervised;
  ProbeOptions probe;
  /// eval/probe: trained RL checkpoint; rl: checkpoint to resume from.
  std::string checkpoint;
  /// render: JSON-lines trace file.
  std::string trace;
  EvalAgent agent = EvalAgent::Network;
  /// Seeds trained concurrently.
  int jobs = 1;

  /// The full-size world of the vision mode for supervised and enumerate
  /// runs, the profile's RL world otherwise.
  const WorldConfig& world() const;
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Rebuilds a resolved config, e.g. from a manifest. Strict about keys.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Command-line values that override the config file.
struct FlagOverrides {
  std::optional<std::string> profile;
  std::optional<std::string> vision;
  std::optional<std::string> action;
  /// Either a count N (seeds 0..N-1) or a comma-separated list.
  std::optional<std::string> seeds;
  std::optional<std::int64_t> steps;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint;
  std::optional<std::string> trace;
  std::optional<std::string> agent;
  std::optional<int> jobs;
};

/// Parses "--seeds" text.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Resolves a config file (may be empty/null) plus flags into a RunConfig.
///
/// File keys: profile, vision, action, seeds, steps, out, checkpoint, trace,
/// agent, jobs, world, schedule, rl, supervised, probe. Unknown keys throw
/// ConfigError.
RunConfig resolve_run_config(RunKind kind, const nlohmann::json& file, const FlagOverrides& flags,
                             const std::string& default_out);

/// Reads a JSON config file; parse errors become ConfigError.
nlohmann::json read_config_file(const std::string& path);

}  // namespace perspective
