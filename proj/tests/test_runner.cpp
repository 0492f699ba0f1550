#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "perspective/report.hpp"
#include "perspective/runner.hpp"

using namespace perspective;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("perspective-test-" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

const nlohmann::json kTinyRl = {{"steps", 500},
                                {"seeds", nlohmann::json::array({0, 3})},
                                {"schedule", {{"eval_every", 5}, {"eval_episodes", 3}}},
                                {"rl", {{"learn_start", 4}, {"batch", 4}}}};

}  // namespace

TEST_CASE("config precedence: profile, then file, then flags") {
  const RunConfig d = resolve_run_config(RunKind::Rl, nullptr, {}, "runs");
  CHECK(d.profile == Profile::Desk);
  CHECK(d.rl == RlConfig::desk(VisualMode::Egocentric, ActionMode::Egocentric));
  CHECK(d.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(d.out == "runs");

  const nlohmann::json file = {{"vision", "allo"}, {"steps", 1234}, {"seeds", 2}, {"world", {{"max_steps", 40}}}};
  const RunConfig f = resolve_run_config(RunKind::Rl, file, {}, "runs");
  CHECK(f.vision == VisualMode::Allocentric);
  CHECK(f.rl.vision == VisualMode::Allocentric);
  CHECK(f.rl.network.input == observation_shape(VisualMode::Allocentric, 7));
  CHECK(f.rl.schedule.total_steps == 1234);
  CHECK(f.rl.world.max_steps == 40);
  CHECK(f.seeds == std::vector<std::uint64_t>{0, 1});

  FlagOverrides flags;
  flags.steps = 99;
  flags.seeds = "4,7";
  flags.vision = "ego";
  flags.out = "elsewhere";
  const RunConfig g = resolve_run_config(RunKind::Rl, file, flags, "runs");
  CHECK(g.rl.schedule.total_steps == 99);
  CHECK(g.seeds == std::vector<std::uint64_t>{4, 7});
  CHECK(g.rl.schedule.seeds == g.seeds);
  CHECK(g.vision == VisualMode::Egocentric);
  CHECK(g.rl.network.input == observation_shape(VisualMode::Egocentric, 7));
  CHECK(g.out == "elsewhere");

  const RunConfig s = resolve_run_config(RunKind::Supervised, nlohmann::json{{"vision", "allo"}}, {}, "runs");
  CHECK(s.world() == WorldConfig::allocentric());
  CHECK(s.seeds.size() == 20);

  const RunConfig paper = resolve_run_config(RunKind::Rl, nlohmann::json{{"profile", "paper"}}, {}, "runs");
  CHECK(paper.rl.world == WorldConfig::egocentric());
  CHECK(paper.rl.schedule.total_steps == 20'000'000);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(resolve_run_config(RunKind::Rl, nlohmann::json{{"colour", "red"}}, {}, "runs"), ConfigError);
  CHECK_THROWS_AS(resolve_run_config(RunKind::Rl, nlohmann::json{{"rl", {{"discount", 0.9}}}}, {}, "runs"), ConfigError);
  CHECK_THROWS_AS(resolve_run_config(RunKind::Rl, nlohmann::json{{"steps", "many"}}, {}, "runs"), ConfigError);
  CHECK_THROWS_AS(resolve_run_config(RunKind::Rl, nlohmann::json::array(), {}, "runs"), ConfigError);
  FlagOverrides bad;
  bad.vision = "sideways";
  CHECK_THROWS(resolve_run_config(RunKind::Rl, nullptr, bad, "runs"));
  CHECK_THROWS_AS(parse_seed_list("0"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("x"), ConfigError);
  CHECK(parse_seed_list("3") == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(parse_seed_list("5,1") == std::vector<std::uint64_t>{5, 1});
  CHECK_THROWS_AS(read_config_file("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("resolved configs survive a JSON round trip") {
  FlagOverrides flags;
  flags.action = "allo";
  const RunConfig c = resolve_run_config(RunKind::Rl, kTinyRl, flags, "runs");
  const RunConfig back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.rl == c.rl);
  CHECK(back.seeds == c.seeds);
}

TEST_CASE("an RL run reproduces bit-exactly from its manifest") {
  TempDir tmp;
  FlagOverrides flags;
  flags.out = tmp.path.string();
  const RunConfig c = resolve_run_config(RunKind::Rl, kTinyRl, flags, "runs");
  std::ostringstream console;
  const RunOutcome first = execute_run(c, {"perspective", "run", "rl"}, console);
  CHECK(first.manifest.at("status") == "complete");
  CHECK(first.manifest.at("format") == "perspective-run");
  CHECK(fs::exists(first.dir / "report" / "summary.json"));
  CHECK(console.str().find("[rl seed 3]") != std::string::npos);

  const RunOutcome second = rerun_manifest(first.dir / "manifest.json", "", {"perspective", "run"}, console);
  CHECK(second.dir != first.dir);
  for (const char* seed : {"seed-0", "seed-3"})
    for (const char* file : {"log.csv", "checkpoint.bin", "behavior.json", "outcomes.csv"}) {
      INFO(seed << "/" << file);
      REQUIRE(fs::exists(first.dir / seed / file));
      CHECK(read_text(first.dir / seed / file) == read_text(second.dir / seed / file));
    }

  SUBCASE("evaluating the checkpoint matches the training-time evaluation") {
    FlagOverrides ev;
    ev.out = tmp.path.string();
    ev.checkpoint = (first.dir / "seed-0" / "checkpoint.bin").string();
    const RunOutcome e = execute_run(resolve_run_config(RunKind::Eval, nullptr, ev, "runs"), {}, console);
    CHECK(read_text(e.dir / "report" / "behavior.json") == read_text(first.dir / "seed-0" / "behavior.json"));
  }
  SUBCASE("resuming a finished checkpoint keeps the results") {
    FlagOverrides rs = flags;
    rs.checkpoint = (first.dir / "seed-0" / "checkpoint.bin").string();
    rs.seeds = "1";
    const RunOutcome r = execute_run(resolve_run_config(RunKind::Rl, kTinyRl, rs, "runs"), {}, console);
    CHECK(read_text(r.dir / "seed-0" / "log.csv") == read_text(first.dir / "seed-0" / "log.csv"));
  }
}

TEST_CASE("report refuses incomplete runs") {
  TempDir tmp;
  CHECK_THROWS_AS(report_run(tmp.path), IncompleteRunError);
  write_text(tmp.path / "manifest.json", R"({"status": "running", "config": {"kind": "rl"}})");
  CHECK_THROWS_AS(report_run(tmp.path), IncompleteRunError);
  write_text(tmp.path / "manifest.json",
             R"({"status": "complete", "config": {"kind": "rl"}, "artifacts": {"seeds": [{"seed": 0, "log": "seed-0/log.csv", "behavior": "seed-0/behavior.json"}]}})");
  CHECK_THROWS_AS(report_run(tmp.path), IncompleteRunError);
  write_text(tmp.path / "manifest.json", "{not json");
  CHECK_THROWS_AS(report_run(tmp.path), IncompleteRunError);
}

TEST_CASE("oracle evaluation and enumeration runs") {
  TempDir tmp;
  std::ostringstream console;
  FlagOverrides flags;
  flags.out = tmp.path.string();
  flags.agent = "oracle";
  const RunOutcome e = execute_run(resolve_run_config(RunKind::Eval, nullptr, flags, "runs"), {}, console);
  const auto behavior = nlohmann::json::parse(read_text(e.dir / "report" / "behavior.json"));
  CHECK(behavior.at("pct_correct_when_should_eat") == 100.0);
  CHECK(behavior.at("pct_correct_when_should_avoid") == 100.0);
  CHECK(fs::exists(e.dir / "report" / "renders"));

  FlagOverrides en;
  en.out = tmp.path.string();
  en.vision = "allo";
  const RunOutcome n = execute_run(resolve_run_config(RunKind::Enumerate, nullptr, en, "runs"), {}, console);
  const auto summary = nlohmann::json::parse(read_text(n.dir / "report" / "summary.json"));
  CHECK(summary.at("count") == 31200);
  CHECK(summary.at("published_count") == 32100);
  CHECK(summary.at("note").get<std::string>().find("900") != std::string::npos);
}
