#include "perspective/runner.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "perspective/render.hpp"
#include "perspective/report.hpp"

#ifndef PERSPECTIVE_CODE_HASH
#define PERSPECTIVE_CODE_HASH "unknown"
#endif

namespace perspective {

namespace fs = std::filesystem;

std::string code_hash() { return PERSPECTIVE_CODE_HASH; }

std::string default_output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? env : "runs";
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

namespace {

std::string utc_stamp(const char* format) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

class Console {
 public:
  explicit Console(std::ostream& os) : os_(os) {}
  void line(const std::string& s) {
    std::lock_guard<std::mutex> lock(mu_);
    os_ << s << '\n' << std::flush;
  }

 private:
  std::ostream& os_;
  std::mutex mu_;
};

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

void write_manifest(const fs::path& dir, const nlohmann::json& manifest) {
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

void write_behavior(const fs::path& dir, const BehaviorReport& report) {
  write_text(dir / "behavior.json", to_json(report).dump(2) + "\n");
  write_text(dir / "outcomes.csv", outcomes_csv(report));
}

nlohmann::json run_rl_seed(const RunConfig& c, std::uint64_t seed, const fs::path& run_dir, Console& console) {
  const std::string rel = "seed-" + std::to_string(seed);
  const fs::path dir = run_dir / rel;
  fs::create_directories(dir);
  nlohmann::json entry = {{"seed", seed}, {"dir", rel}};

  std::optional<RlTrainer> trainer;
  if (!c.checkpoint.empty()) {
    RlTrainer loaded = RlTrainer::load(c.checkpoint);
    if (loaded.seed() == seed) {
      trainer.emplace(std::move(loaded));
      entry["resumed_from"] = c.checkpoint;
      entry["resumed_at_step"] = trainer->env_steps();
    }
  }
  if (!trainer) trainer.emplace(c.rl, seed);

  const fs::path checkpoint = dir / "checkpoint.bin";
  const int every = trainer->config().checkpoint_every;
  std::size_t rows_seen = trainer->log().rl.size();
  trainer->run([&](const RlTrainer& t) {
    if (every > 0 && t.episodes() % every == 0) t.save(checkpoint);
    if (t.log().rl.size() != rows_seen) {
      rows_seen = t.log().rl.size();
      const RlRow& r = t.log().rl.back();
      console.line("[rl seed " + std::to_string(seed) + "] step " + std::to_string(r.step) + " episodes " +
                   std::to_string(r.episodes) + " eps " + fixed(r.epsilon) + " eval " + fixed(r.mean_reward, 1) +
                   " / max " + fixed(r.max_possible_reward, 1) + " loss " + fixed(r.mean_loss, 5));
    }
    return true;
  });
  trainer->save(checkpoint);
  trainer->log().write(dir / "log.csv");
  if (trainer->halted()) console.line("[rl seed " + std::to_string(seed) + "] halted: " + trainer->log().halt_reason);

  const RlConfig& rc = trainer->config();
  const BehaviorReport behavior = evaluate_behavior(rc.network, trainer->params(), rc.world, rc.vision, rc.action);
  write_behavior(dir, behavior);
  console.line("[rl seed " + std::to_string(seed) + "] correct when food unseen " +
               fixed(behavior.pct_correct_when_should_eat(), 2) + "%, when seen " +
               fixed(behavior.pct_correct_when_should_avoid(), 2) + "%");
  entry["log"] = rel + "/log.csv";
  entry["checkpoint"] = rel + "/checkpoint.bin";
  entry["behavior"] = rel + "/behavior.json";
  entry["outcomes"] = rel + "/outcomes.csv";
  entry["env_steps"] = trainer->env_steps();
  entry["episodes"] = trainer->episodes();
  if (trainer->halted()) entry["halt"] = trainer->log().halt_reason;
  return entry;
}

nlohmann::json run_rl(const RunConfig& c, const fs::path& dir, Console& console) {
  std::vector<nlohmann::json> entries(c.seeds.size());
  std::vector<std::exception_ptr> errors(c.seeds.size());
  std::mutex next_mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(next_mu);
        if (next >= c.seeds.size()) return;
        i = next++;
      }
      try {
        entries[i] = run_rl_seed(c, c.seeds[i], dir, console);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int jobs = std::min<int>(c.jobs, static_cast<int>(c.seeds.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return {{"seeds", entries}};
}

nlohmann::json run_supervised(const RunConfig& c, const fs::path& dir, Console& console) {
  const SupervisedConfig& sc = c.supervised;
  const LabeledDataset data = LabeledDataset::build(sc.vision, sc.world, enumerate_initial_configs(sc.world));
  const Split split = split_indices(data.size(), sc.train_fraction, sc.split_seed);
  RunLog log;
  log.kind = RunLog::Kind::Supervised;
  log.header = mode_fingerprint(sc.vision, ActionMode::Allocentric, sc.world, sc.network);
  std::erase_if(log.header, [](const auto& kv) { return kv.first.rfind("action", 0) == 0; });
  log.header.emplace_back("samples", std::to_string(data.size()));
  log.header.emplace_back("split_seed", std::to_string(sc.split_seed));
  for (std::uint64_t seed : sc.weight_seeds) {
    const SupervisedResult r = train_supervised(sc, data, split, seed);
    for (const SupervisedRow& row : r.rows)
      console.line("[supervised " + to_string(sc.vision) + " seed " + std::to_string(seed) + "] epoch " +
                   std::to_string(row.epoch) + " loss " + fixed(row.train_loss, 4) + " train " +
                   fixed(row.train_acc, 4) + " val " + fixed(row.val_acc, 4));
    log.supervised.insert(log.supervised.end(), r.rows.begin(), r.rows.end());
  }
  log.write(dir / "log.csv");
  return {{"log", "log.csv"}, {"samples", data.size()}};
}

nlohmann::json run_eval(const RunConfig& c, const fs::path& dir, Console& console) {
  const fs::path report = dir / "report";
  fs::create_directories(report / "renders");
  std::optional<RlTrainer> trained;
  WorldConfig world = c.rl.world;
  VisualMode vision = c.vision;
  ActionMode action = c.action;
  if (c.agent == EvalAgent::Network) {
    trained.emplace(RlTrainer::load(c.checkpoint));
    world = trained->config().world;
    vision = trained->config().vision;
    action = trained->config().action;
  }
  auto make_agent = [&]() -> std::unique_ptr<Agent> {
    switch (c.agent) {
      case EvalAgent::Network: return std::make_unique<GreedyNetworkAgent>(trained->config().network, trained->params());
      case EvalAgent::Oracle: return std::make_unique<OracleAgent>(world, action);
      case EvalAgent::Random: return std::make_unique<RandomAgent>(Rng(c.seeds.front()));
    }
    return nullptr;
  };
  const std::vector<InitialConfig> configs = enumerate_initial_configs(world);
  auto agent = make_agent();
  const BehaviorReport behavior = evaluate_behavior(*agent, world, vision, action, configs);
  write_behavior(report, behavior);
  console.line("[eval " + to_string(c.agent) + "] correct when food unseen " +
               fixed(behavior.pct_correct_when_should_eat(), 2) + "% (" + std::to_string(behavior.eat_trials) +
               " trials), when seen " + fixed(behavior.pct_correct_when_should_avoid(), 2) + "% (" +
               std::to_string(behavior.avoid_trials) + " trials)");
  nlohmann::json renders = nlohmann::json::array();
  for (const auto& [name, id] : select_quartet(behavior)) {
    auto fresh = make_agent();
    const EpisodeRecord rec = rollout(*fresh, world, vision, action, configs[id].state(), true, id);
    const std::string stem = "renders/" + name + "-" + std::to_string(id);
    write_text(report / (stem + ".svg"), render_svg(rec, name + " (config " + std::to_string(id) + ")"));
    write_text(report / (stem + ".jsonl"), trace_to_jsonl(rec.trace));
    renders.push_back({{"case", name}, {"config_id", id}, {"svg", "report/" + stem + ".svg"},
                       {"trace", "report/" + stem + ".jsonl"}});
  }
  return {{"behavior", "report/behavior.json"}, {"outcomes", "report/outcomes.csv"}, {"renders", renders},
          {"vision", to_string(vision)},          {"action", to_string(action)},          {"world", world}};
}

nlohmann::json run_probe(const RunConfig& c, const fs::path& dir, Console& console) {
  const fs::path report = dir / "report";
  fs::create_directories(report);
  const RlTrainer trained = RlTrainer::load(c.checkpoint);
  const RlConfig& rc = trained.config();
  const std::vector<InitialConfig> configs = enumerate_initial_configs(rc.world);
  std::vector<int> labels;
  for (const InitialConfig& ic : configs) labels.push_back(ic.label ? 1 : 0);
  const auto activations = layer_activations(rc.network, trained.params(), rc.vision, rc.world, configs);
  ProbeOptions true_opts = c.probe, shuffled_opts = c.probe;
  true_opts.shuffle_labels = false;
  shuffled_opts.shuffle_labels = true;
  const ProbeReport truth = probe_layers(activations, labels, true_opts);
  const ProbeReport shuffled = probe_layers(activations, labels, shuffled_opts);
  for (std::size_t i = 0; i < truth.layers.size(); ++i)
    console.line("[probe] " + truth.layers[i].layer + " true " + fixed(truth.layers[i].accuracy, 4) + " shuffled " +
                 fixed(shuffled.layers[i].accuracy, 4));
  write_text(report / "probe.json",
             nlohmann::json{{"true_labels", to_json(truth)}, {"shuffled_labels", to_json(shuffled)}}.dump(2) + "\n");
  write_text(report / "probe.csv", to_csv(truth) + to_csv(shuffled).substr(to_csv(shuffled).find('\n') + 1));
  return {{"probe", "report/probe.json"}, {"table", "report/probe.csv"}};
}

nlohmann::json run_enumerate(const RunConfig& c, const fs::path& dir, Console& console) {
  const fs::path report = dir / "report";
  fs::create_directories(report);
  const WorldConfig& world = c.world();
  const std::vector<InitialConfig> configs = enumerate_initial_configs(world);
  std::ostringstream csv;
  csv << "id,subordinate_row,dominant_row,dominant_col,dominant_orientation,food_row,food_col,label\n";
  std::size_t seen = 0;
  for (const InitialConfig& ic : configs) {
    csv << ic.id << ',' << ic.subordinate_row << ',' << ic.dominant.row << ',' << ic.dominant.col << ','
        << to_string(ic.dominant.orientation) << ',' << ic.food.row << ',' << ic.food.col << ',' << int(ic.label)
        << '\n';
    seen += ic.label;
  }
  write_text(dir / "configs.csv", csv.str());
  nlohmann::json summary = {{"vision", to_string(c.vision)},
                            {"world_side", world.side},
                            {"count", configs.size()},
                            {"closed_form", initial_config_count(world)},
                            {"label_seen", seen},
                            {"label_unseen", configs.size() - seen}};
  const std::size_t published =
      c.vision == VisualMode::Allocentric ? kPublishedAllocentricCount : kPublishedEgocentricCount;
  summary["published_count"] = published;
  if (configs.size() != published)
    summary["note"] = "enumeration gives " + std::to_string(configs.size()) + " configurations; the published count is " +
                      std::to_string(published) + " (a difference of " +
                      std::to_string(published > configs.size() ? published - configs.size() : configs.size() - published) +
                      "). The spawn geometry that would produce the published count is not recoverable, so the "
                      "closed-form enumeration is used.";
  write_text(report / "summary.json", summary.dump(2) + "\n");
  console.line("[enumerate " + to_string(c.vision) + "] " + std::to_string(configs.size()) + " configurations (" +
               std::to_string(seen) + " seen)");
  if (summary.contains("note")) console.line("[enumerate] note: " + summary["note"].get<std::string>());
  return {{"configs", "configs.csv"}, {"summary", "report/summary.json"}};
}

nlohmann::json run_render(const RunConfig& c, const fs::path& dir, Console& console) {
  const fs::path report = dir / "report";
  fs::create_directories(report);
  const auto trace = parse_trace(read_text(c.trace));
  const std::string stem = fs::path(c.trace).stem().string();
  write_text(report / (stem + ".svg"), render_svg(trace, c.rl.world, stem));
  console.line("[render] wrote report/" + stem + ".svg");
  return {{"svg", "report/" + stem + ".svg"}};
}

}  // namespace

fs::path make_run_dir(const RunConfig& c) {
  const std::string base = utc_stamp("%Y%m%dT%H%M%SZ") + "-" + to_string(c.kind) + "-" + to_string(c.vision) + "-" +
                           to_string(c.action);
  fs::path dir = fs::path(c.out) / base;
  for (int i = 2; fs::exists(dir); ++i) dir = fs::path(c.out) / (base + "-" + std::to_string(i));
  fs::create_directories(dir);
  return dir;
}

RunOutcome execute_run(const RunConfig& config, const std::vector<std::string>& argv, std::ostream& out) {
  config.validate();
  Console console(out);
  RunOutcome outcome;
  outcome.dir = make_run_dir(config);
  nlohmann::json& m = outcome.manifest;
  m = {{"format", "perspective-run"},
       {"version", 1},
       {"code_hash", code_hash()},
       {"created", utc_stamp("%Y-%m-%dT%H:%M:%SZ")},
       {"argv", argv},
       {"config", to_json(config)},
       {"status", "running"}};
  write_manifest(outcome.dir, m);
  console.line("[run] " + outcome.dir.string());
  try {
    switch (config.kind) {
      case RunKind::Rl: m["artifacts"] = run_rl(config, outcome.dir, console); break;
      case RunKind::Supervised: m["artifacts"] = run_supervised(config, outcome.dir, console); break;
      case RunKind::Eval: m["artifacts"] = run_eval(config, outcome.dir, console); break;
      case RunKind::Probe: m["artifacts"] = run_probe(config, outcome.dir, console); break;
      case RunKind::Enumerate: m["artifacts"] = run_enumerate(config, outcome.dir, console); break;
      case RunKind::Render: m["artifacts"] = run_render(config, outcome.dir, console); break;
    }
  } catch (const std::exception& e) {
    m["status"] = "failed";
    m["error"] = e.what();
    write_manifest(outcome.dir, m);
    throw;
  }
  m["status"] = "complete";
  write_manifest(outcome.dir, m);
  if (config.kind == RunKind::Rl || config.kind == RunKind::Supervised) {
    const nlohmann::json summary = report_run(outcome.dir);
    console.line("[report] " + (outcome.dir / "report" / "summary.json").string());
    (void)summary;
  }
  return outcome;
}

RunOutcome rerun_manifest(const fs::path& manifest, const std::string& out_override,
                          const std::vector<std::string>& argv, std::ostream& console) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + manifest.string() + ": " + e.what());
  }
  if (m.value("format", "") != "perspective-run") throw ConfigError(manifest.string() + " is not a run manifest");
  RunConfig config = run_config_from_json(m.at("config"));
  if (!out_override.empty()) config.out = out_override;
  return execute_run(config, argv, console);
}

}  // namespace perspective
