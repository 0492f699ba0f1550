#include "perspective/run_config.hpp"

#include <fstream>
#include <sstream>

namespace perspective {

namespace {

constexpr const char* kKindNames[] = {"rl", "supervised", "eval", "probe", "enumerate", "render"};

template <typename F>
void config_key(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::vector<std::uint64_t> seeds_from_json(const nlohmann::json& v) {
  if (v.is_number_unsigned() || v.is_number_integer()) {
    const auto n = v.get<std::int64_t>();
    if (n <= 0) throw ConfigError("seeds: a seed count must be positive");
    std::vector<std::uint64_t> out;
    for (std::int64_t i = 0; i < n; ++i) out.push_back(static_cast<std::uint64_t>(i));
    return out;
  }
  return v.get<std::vector<std::uint64_t>>();
}

void rederive_inputs(RunConfig& c) {
  c.rl.vision = c.vision;
  c.rl.action = c.action;
  c.rl.network.input = observation_shape(c.vision, c.rl.world.side);
  c.supervised.vision = c.vision;
  c.supervised.network.input = observation_shape(c.vision, c.supervised.world.side);
}

void apply_seeds(RunConfig& c) {
  if (c.seeds.empty()) c.seeds = c.kind == RunKind::Supervised ? c.supervised.weight_seeds : c.rl.schedule.seeds;
  c.rl.schedule.seeds = c.seeds;
  c.supervised.weight_seeds = c.seeds;
}

}  // namespace

std::string to_string(RunKind k) { return kKindNames[static_cast<int>(k)]; }

RunKind parse_run_kind(const std::string& s) {
  for (int i = 0; i < 6; ++i)
    if (s == kKindNames[i]) return static_cast<RunKind>(i);
  throw std::invalid_argument("unknown run kind '" + s + "' (expected rl, supervised, eval, probe, enumerate or render)");
}

std::string to_string(EvalAgent a) {
  switch (a) {
    case EvalAgent::Network: return "network";
    case EvalAgent::Oracle: return "oracle";
    case EvalAgent::Random: return "random";
  }
  return "?";
}

EvalAgent parse_eval_agent(const std::string& s) {
  if (s == "network") return EvalAgent::Network;
  if (s == "oracle") return EvalAgent::Oracle;
  if (s == "random") return EvalAgent::Random;
  throw std::invalid_argument("unknown agent '" + s + "' (expected network, oracle or random)");
}

const WorldConfig& RunConfig::world() const {
  return kind == RunKind::Supervised || kind == RunKind::Enumerate ? supervised.world : rl.world;
}

void RunConfig::validate() const {
  if (seeds.empty()) throw ConfigError("no seeds");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  switch (kind) {
    case RunKind::Rl: rl.validate(); break;
    case RunKind::Supervised: supervised.validate(); break;
    case RunKind::Eval:
      rl.world.validate();
      if (agent == EvalAgent::Network && checkpoint.empty())
        throw ConfigError("eval with the network agent needs --checkpoint");
      break;
    case RunKind::Probe:
      if (checkpoint.empty()) throw ConfigError("probe needs --checkpoint");
      break;
    case RunKind::Enumerate: world().validate(); break;
    case RunKind::Render:
      world().validate();
      if (trace.empty()) throw ConfigError("render needs --trace");
      break;
  }
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json probe;
  to_json(probe, c.probe);
  return {{"kind", to_string(c.kind)},
          {"profile", to_string(c.profile)},
          {"vision", to_string(c.vision)},
          {"action", to_string(c.action)},
          {"seeds", c.seeds},
          {"out", c.out},
          {"rl", c.rl},
          {"supervised", c.supervised},
          {"probe", probe},
          {"checkpoint", c.checkpoint},
          {"trace", c.trace},
          {"agent", to_string(c.agent)},
          {"jobs", c.jobs}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config: expected an object");
  RunConfig c;
  config_key("kind", [&] { c.kind = parse_run_kind(j.at("kind").get<std::string>()); });
  config_key("profile", [&] { c.profile = parse_profile(j.value("profile", std::string("desk"))); });
  config_key("vision", [&] { c.vision = parse_visual_mode(j.value("vision", std::string("ego"))); });
  config_key("action", [&] { c.action = parse_action_mode(j.value("action", std::string("ego"))); });
  c.rl = RlConfig::for_profile(c.profile, c.vision, c.action);
  c.supervised = SupervisedConfig::for_vision(c.vision);
  for (const auto& [key, v] : j.items())
    config_key(key, [&] {
      if (key == "kind" || key == "profile" || key == "vision" || key == "action") return;
      if (key == "seeds") c.seeds = seeds_from_json(v);
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "rl") update_from_json(v, c.rl);
      else if (key == "supervised") update_from_json(v, c.supervised);
      else if (key == "probe") update_from_json(v, c.probe);
      else if (key == "checkpoint") c.checkpoint = v.get<std::string>();
      else if (key == "trace") c.trace = v.get<std::string>();
      else if (key == "agent") c.agent = parse_eval_agent(v.get<std::string>());
      else if (key == "jobs") c.jobs = v.get<int>();
      else throw ConfigError("unknown key " + key);
    });
  rederive_inputs(c);
  apply_seeds(c);
  c.validate();
  return c;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  if (text.empty()) throw ConfigError("--seeds: empty");
  if (text.find(',') == std::string::npos) {
    std::size_t used = 0;
    long long n = 0;
    try {
      n = std::stoll(text, &used);
    } catch (const std::exception&) {
      throw ConfigError("--seeds: expected a count or a comma-separated list, got '" + text + "'");
    }
    if (used != text.size() || n <= 0) throw ConfigError("--seeds: expected a positive count, got '" + text + "'");
    std::vector<std::uint64_t> out;
    for (long long i = 0; i < n; ++i) out.push_back(static_cast<std::uint64_t>(i));
    return out;
  }
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("--seeds: bad seed '" + item + "'");
    }
    if (used != item.size()) throw ConfigError("--seeds: bad seed '" + item + "'");
    out.push_back(v);
  }
  return out;
}

RunConfig resolve_run_config(RunKind kind, const nlohmann::json& file, const FlagOverrides& flags,
                             const std::string& default_out) {
  const nlohmann::json f = file.is_null() ? nlohmann::json::object() : file;
  if (!f.is_object()) throw ConfigError("config file: expected a JSON object");
  static const char* kKeys[] = {"profile", "vision", "action", "seeds",      "steps", "out",  "checkpoint", "trace",
                                "agent",   "jobs",   "world",  "schedule", "rl",    "supervised", "probe"};
  for (const auto& [key, v] : f.items()) {
    bool known = false;
    for (const char* k : kKeys) known = known || key == k;
    if (!known) throw ConfigError("unknown key " + key);
  }

  RunConfig c;
  c.kind = kind;
  auto pick = [&](const std::optional<std::string>& flag, const char* key, const std::string& fallback) {
    if (flag) return *flag;
    if (f.contains(key)) {
      std::string v;
      config_key(key, [&] { v = f.at(key).get<std::string>(); });
      return v;
    }
    return fallback;
  };
  config_key("profile", [&] { c.profile = parse_profile(pick(flags.profile, "profile", "desk")); });
  config_key("vision", [&] { c.vision = parse_visual_mode(pick(flags.vision, "vision", "ego")); });
  config_key("action", [&] { c.action = parse_action_mode(pick(flags.action, "action", "ego")); });
  c.rl = RlConfig::for_profile(c.profile, c.vision, c.action);
  c.supervised = SupervisedConfig::for_vision(c.vision);

  config_key("rl", [&] {
    if (f.contains("rl")) update_from_json(f.at("rl"), c.rl);
  });
  config_key("supervised", [&] {
    if (f.contains("supervised")) update_from_json(f.at("supervised"), c.supervised);
  });
  config_key("world", [&] {
    if (f.contains("world"))
      update_from_json(f.at("world"),
                       kind == RunKind::Supervised || kind == RunKind::Enumerate ? c.supervised.world : c.rl.world);
  });
  config_key("schedule", [&] {
    if (f.contains("schedule")) update_from_json(f.at("schedule"), c.rl.schedule);
  });
  config_key("probe", [&] {
    if (f.contains("probe")) update_from_json(f.at("probe"), c.probe);
  });
  config_key("steps", [&] {
    if (f.contains("steps")) c.rl.schedule.total_steps = f.at("steps").get<std::int64_t>();
  });
  if (flags.steps) c.rl.schedule.total_steps = *flags.steps;
  config_key("seeds", [&] {
    if (f.contains("seeds")) c.seeds = seeds_from_json(f.at("seeds"));
  });
  if (flags.seeds) c.seeds = parse_seed_list(*flags.seeds);
  c.out = pick(flags.out, "out", default_out);
  c.checkpoint = pick(flags.checkpoint, "checkpoint", "");
  c.trace = pick(flags.trace, "trace", "");
  config_key("agent", [&] { c.agent = parse_eval_agent(pick(flags.agent, "agent", "network")); });
  config_key("jobs", [&] {
    if (f.contains("jobs")) c.jobs = f.at("jobs").get<int>();
  });
  if (flags.jobs) c.jobs = *flags.jobs;

  rederive_inputs(c);
  apply_seeds(c);
  c.validate();
  return c;
}

nlohmann::json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

}  // namespace perspective
