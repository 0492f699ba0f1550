#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "perspective/checkpoint.hpp"
#include "perspective/probe.hpp"
#include "perspective/render.hpp"
#include "perspective/report.hpp"
#include "perspective/run_config.hpp"
#include "perspective/runner.hpp"

using namespace perspective;

namespace {

int fail(const std::string& type, const std::string& message, int code = 2) {
  std::cerr << nlohmann::json{{"error", type}, {"message", message}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Perspective-taking grid world: training, evaluation and analysis"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Execute a run and write its artifacts");
  std::string kind_text;
  std::string config_path;
  std::string manifest_path;
  FlagOverrides flags;
  std::string profile, vision, action, seeds, out, checkpoint, trace, agent;
  std::int64_t steps = 0;
  int jobs = 0;
  run->add_option("kind", kind_text, "rl | supervised | eval | probe | enumerate | render");
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--manifest", manifest_path, "Re-execute the config recorded in a run manifest");
  run->add_option("--profile", profile, "desk | paper");
  run->add_option("--vision", vision, "allocentric | egocentric");
  run->add_option("--action", action, "allocentric | egocentric");
  run->add_option("--seeds", seeds, "Seed count N (0..N-1) or a comma-separated list");
  run->add_option("--steps", steps, "Total environment steps per seed (rl)");
  run->add_option("--out", out, "Output root (default $PERSPECTIVE_OUT or ./runs)");
  auto* resume = run->add_option("--resume", checkpoint, "Checkpoint to resume an rl seed from");
  run->add_option("--checkpoint", checkpoint, "Trained checkpoint (eval, probe)")->excludes(resume);
  run->add_option("--trace", trace, "JSON-lines trace file (render)");
  run->add_option("--agent", agent, "network | oracle | random (eval)");
  run->add_option("--jobs", jobs, "Seeds trained concurrently");

  auto* report = app.add_subcommand("report", "Aggregate a completed run directory");
  std::string report_dir;
  report->add_option("run_dir", report_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*report) {
      const nlohmann::json summary = report_run(report_dir);
      std::cout << summary.dump(2) << '\n';
      return 0;
    }

    if (!manifest_path.empty()) {
      if (!kind_text.empty() || !config_path.empty())
        return fail("usage", "--manifest cannot be combined with a kind or --config");
      const RunOutcome r = rerun_manifest(manifest_path, out, args, std::cout);
      std::cout << r.dir.string() << '\n';
      return 0;
    }
    if (kind_text.empty()) return fail("usage", "run needs a kind or --manifest");

    if (!profile.empty()) flags.profile = profile;
    if (!vision.empty()) flags.vision = vision;
    if (!action.empty()) flags.action = action;
    if (!seeds.empty()) flags.seeds = seeds;
    if (run->count("--steps")) flags.steps = steps;
    if (!out.empty()) flags.out = out;
    if (!checkpoint.empty()) flags.checkpoint = checkpoint;
    if (!trace.empty()) flags.trace = trace;
    if (!agent.empty()) flags.agent = agent;
    if (run->count("--jobs")) flags.jobs = jobs;

    const RunKind kind = parse_run_kind(kind_text);
    const nlohmann::json file = config_path.empty() ? nlohmann::json() : read_config_file(config_path);
    const RunConfig config = resolve_run_config(kind, file, flags, default_output_root());
    const RunOutcome r = execute_run(config, args, std::cout);
    std::cout << r.dir.string() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    return fail("config", e.what());
  } catch (const CheckpointError& e) {
    return fail("checkpoint", e.what());
  } catch (const IncompleteRunError& e) {
    return fail("incomplete_run", e.what());
  } catch (const ProbeError& e) {
    return fail("probe", e.what());
  } catch (const RenderError& e) {
    return fail("render", e.what());
  } catch (const std::invalid_argument& e) {
    return fail("config", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 1);
  }
}
