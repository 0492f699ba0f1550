#include "perspective/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "perspective/checkpoint.hpp"

namespace perspective {

namespace {

// Generator streams derived from a run seed.
enum Stream : std::uint64_t { kInit = 1, kEnv = 2, kPolicy = 3, kSample = 4, kEval = 5, kShuffle = 6 };

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename F>
void with_key(const std::string& where, const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + key + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + key + ": " + e.what());
  }
}

void to_json(nlohmann::json& j, const AdamConfig& a) {
  j = {{"learning_rate", a.learning_rate}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon}};
}

void update_from_json(const nlohmann::json& j, AdamConfig& a, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, v] : j.items())
    with_key(where + ".", key, [&] {
      if (key == "learning_rate") a.learning_rate = v.get<double>();
      else if (key == "beta1") a.beta1 = v.get<double>();
      else if (key == "beta2") a.beta2 = v.get<double>();
      else if (key == "epsilon") a.epsilon = v.get<double>();
      else throw ConfigError("unknown key " + where + "." + key);
    });
}

}  // namespace

std::string to_string(Profile p) { return p == Profile::Desk ? "desk" : "paper"; }

Profile parse_profile(const std::string& s) {
  if (s == "desk") return Profile::Desk;
  if (s == "paper") return Profile::Paper;
  throw std::invalid_argument("unknown profile '" + s + "' (expected desk or paper)");
}

void RlSchedule::validate() const {
  if (total_steps <= 0) throw ConfigError("schedule.total_steps must be positive");
  if (!(anneal_fraction > 0.0 && anneal_fraction <= 1.0)) throw ConfigError("schedule.anneal_fraction must lie in (0, 1]");
  if (!(epsilon_end <= epsilon_start)) throw ConfigError("schedule.epsilon_end must not exceed epsilon_start");
  if (epsilon_end < 0.0 || epsilon_start > 1.0) throw ConfigError("schedule epsilons must lie in [0, 1]");
  if (eval_every <= 0 || eval_episodes <= 0) throw ConfigError("schedule.eval_every and eval_episodes must be positive");
  if (seeds.empty()) throw ConfigError("schedule.seeds is empty");
}

double anneal_epsilon(std::int64_t step, const RlSchedule& s) {
  const double end = s.anneal_fraction * static_cast<double>(s.total_steps);
  const double x = static_cast<double>(std::max<std::int64_t>(step, 0));
  if (x >= end) return s.epsilon_end;
  return s.epsilon_start + (s.epsilon_end - s.epsilon_start) * (x / end);
}

RlConfig RlConfig::paper(VisualMode vision, ActionMode action) {
  RlConfig c;
  c.vision = vision;
  c.action = action;
  c.world = vision == VisualMode::Allocentric ? WorldConfig::allocentric() : WorldConfig::egocentric();
  c.network = NetworkSpec::q_network(vision, c.world.side);
  return c;
}

RlConfig RlConfig::desk(VisualMode vision, ActionMode action) {
  RlConfig c;
  c.vision = vision;
  c.action = action;
  c.world = WorldConfig::desk();
  c.world.max_steps = 30;
  c.network = NetworkSpec::q_network(vision, c.world.side);
  c.schedule.total_steps = 500'000;
  c.schedule.eval_every = 250;
  c.schedule.seeds = {0, 1, 2};
  c.td.reward_scale = 1e-3;
  c.target_every = 10;
  c.train_every = 4;
  return c;
}

RlConfig RlConfig::for_profile(Profile p, VisualMode vision, ActionMode action) {
  return p == Profile::Desk ? desk(vision, action) : paper(vision, action);
}

void RlConfig::validate() const {
  world.validate();
  network.validate();
  schedule.validate();
  if (network.input != observation_shape(vision, world.side))
    throw ConfigError("network.input does not match " + to_string(vision) + " vision on a side-" +
                      std::to_string(world.side) + " world");
  if (network.head != HeadKind::Dueling || network.outputs != kActionCount)
    throw ConfigError("the Q-network needs a dueling head with one output per action");
  if (!(clip > 0.0)) throw ConfigError("clip must be positive");
  if (!(td.gamma >= 0.0 && td.gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (target_every <= 0 || train_every <= 0) throw ConfigError("target_every and train_every must be positive");
  if (batch <= 0 || replay_capacity == 0) throw ConfigError("batch and replay_capacity must be positive");
  if (learn_start == 0) throw ConfigError("learn_start must be at least 1");
  if (world.max_steps > 100) throw ConfigError("episodes longer than 100 steps do not fit the replay buffer");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
}

void to_json(nlohmann::json& j, const RlSchedule& s) {
  j = {{"total_steps", s.total_steps},   {"epsilon_start", s.epsilon_start}, {"epsilon_end", s.epsilon_end},
       {"anneal_fraction", s.anneal_fraction}, {"eval_every", s.eval_every},     {"eval_episodes", s.eval_episodes},
       {"seeds", s.seeds}};
}

void update_from_json(const nlohmann::json& j, RlSchedule& s) {
  if (!j.is_object()) throw ConfigError("schedule: expected an object");
  for (const auto& [key, v] : j.items())
    with_key("schedule.", key, [&] {
      if (key == "total_steps") s.total_steps = v.get<std::int64_t>();
      else if (key == "epsilon_start") s.epsilon_start = v.get<double>();
      else if (key == "epsilon_end") s.epsilon_end = v.get<double>();
      else if (key == "anneal_fraction") s.anneal_fraction = v.get<double>();
      else if (key == "eval_every") s.eval_every = v.get<int>();
      else if (key == "eval_episodes") s.eval_episodes = v.get<int>();
      else if (key == "seeds") s.seeds = v.get<std::vector<std::uint64_t>>();
      else throw ConfigError("unknown key schedule." + key);
    });
}

void to_json(nlohmann::json& j, const RlConfig& c) {
  nlohmann::json adam;
  to_json(adam, c.adam);
  j = {{"vision", to_string(c.vision)},
       {"action", to_string(c.action)},
       {"world", c.world},
       {"network", c.network},
       {"schedule", c.schedule},
       {"adam", adam},
       {"clip", c.clip},
       {"clip_mode", to_string(c.clip_mode)},
       {"gamma", c.td.gamma},
       {"reward_scale", c.td.reward_scale},
       {"tau", c.tau},
       {"target_every", c.target_every},
       {"batch", c.batch},
       {"replay_capacity", c.replay_capacity},
       {"learn_start", c.learn_start},
       {"train_every", c.train_every},
       {"checkpoint_every", c.checkpoint_every}};
}

void update_from_json(const nlohmann::json& j, RlConfig& c) {
  if (!j.is_object()) throw ConfigError("rl config: expected an object");
  bool explicit_input = false;
  for (const auto& [key, v] : j.items())
    with_key("", key, [&] {
      if (key == "vision") c.vision = parse_visual_mode(v.get<std::string>());
      else if (key == "action") c.action = parse_action_mode(v.get<std::string>());
      else if (key == "world") update_from_json(v, c.world);
      else if (key == "network") {
        explicit_input = explicit_input || (v.is_object() && v.contains("input"));
        update_from_json(v, c.network);
      } else if (key == "schedule") update_from_json(v, c.schedule);
      else if (key == "adam") update_from_json(v, c.adam, "adam");
      else if (key == "clip") c.clip = v.get<double>();
      else if (key == "clip_mode") c.clip_mode = parse_clip_mode(v.get<std::string>());
      else if (key == "gamma") c.td.gamma = v.get<double>();
      else if (key == "reward_scale") c.td.reward_scale = v.get<double>();
      else if (key == "tau") c.tau = v.get<double>();
      else if (key == "target_every") c.target_every = v.get<int>();
      else if (key == "batch") c.batch = v.get<int>();
      else if (key == "replay_capacity") c.replay_capacity = v.get<std::size_t>();
      else if (key == "learn_start") c.learn_start = v.get<std::size_t>();
      else if (key == "train_every") c.train_every = v.get<int>();
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<int>();
      else throw ConfigError("unknown key " + key);
    });
  if (!explicit_input) c.network.input = observation_shape(c.vision, c.world.side);
}

std::string RunLog::header_value(const std::string& key) const {
  for (const auto& [k, v] : header)
    if (k == key) return v;
  return {};
}

std::string RunLog::to_csv() const {
  std::ostringstream os;
  os << "# kind=" << (kind == Kind::Rl ? "rl" : "supervised") << '\n';
  for (const auto& [k, v] : header) os << "# " << k << '=' << v << '\n';
  if (!halt_reason.empty()) os << "# halt=" << halt_reason << '\n';
  if (kind == Kind::Rl) {
    os << kRlColumns << '\n';
    for (const RlRow& r : rl)
      os << r.seed << ',' << r.step << ',' << r.episodes << ',' << format_double(r.epsilon) << ','
         << format_double(r.mean_reward) << ',' << format_double(r.max_possible_reward) << ','
         << format_double(r.train_mean_reward) << ',' << format_double(r.mean_loss) << ',' << r.optimizer_steps
         << '\n';
  } else {
    os << kSupervisedColumns << '\n';
    for (const SupervisedRow& r : supervised)
      os << r.seed << ',' << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.train_acc)
         << ',' << format_double(r.val_acc) << '\n';
  }
  return os.str();
}

RunLog RunLog::from_csv(const std::string& text) {
  RunLog log;
  std::istringstream is(text);
  std::string line;
  bool columns_seen = false;
  bool kind_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw std::runtime_error("malformed log header line: " + line);
      std::string key = line.substr(2, eq - 2), value = line.substr(eq + 1);
      if (key == "kind") {
        if (value == "rl") log.kind = Kind::Rl;
        else if (value == "supervised") log.kind = Kind::Supervised;
        else throw std::runtime_error("unknown log kind '" + value + "'");
        kind_seen = true;
      } else if (key == "halt") {
        log.halt_reason = value;
      } else {
        log.header.emplace_back(std::move(key), std::move(value));
      }
      continue;
    }
    if (!columns_seen) {
      const std::string expected = log.kind == Kind::Rl ? kRlColumns : kSupervisedColumns;
      if (!kind_seen || line != expected) throw std::runtime_error("unexpected log columns: " + line);
      columns_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    try {
      if (log.kind == Kind::Rl) {
        if (f.size() != 9) throw std::runtime_error("expected 9 fields");
        log.rl.push_back({std::stoull(f[0]), std::stoll(f[1]), std::stoll(f[2]), std::stod(f[3]), std::stod(f[4]),
                          std::stod(f[5]), std::stod(f[6]), std::stod(f[7]), std::stoll(f[8])});
      } else {
        if (f.size() != 5) throw std::runtime_error("expected 5 fields");
        log.supervised.push_back({std::stoull(f[0]), std::stoi(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("malformed log row '" + line + "': " + e.what());
    }
  }
  if (!columns_seen) throw std::runtime_error("log has no column header");
  return log;
}

void RunLog::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_csv();
}

RunLog RunLog::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_csv(ss.str());
}

std::vector<std::pair<std::string, std::string>> mode_fingerprint(VisualMode vision, ActionMode action,
                                                                  const WorldConfig& world,
                                                                  const NetworkSpec& network) {
  const ObservationShape s = observation_shape(vision, world.side);
  std::string actions;
  for (int a = 0; a < kActionCount; ++a) {
    // Displacement of each action for a subordinate facing North.
    const Move m = decode_action(a, action, Orientation::North);
    if (a) actions += ' ';
    actions += std::to_string(m.displacement.row) + ':' + std::to_string(m.displacement.col);
  }
  return {{"vision", to_string(vision)},
          {"action", to_string(action)},
          {"world_side", std::to_string(world.side)},
          {"observation", std::to_string(s.channels) + "x" + std::to_string(s.rows) + "x" + std::to_string(s.cols) +
                              "+" + std::to_string(s.orientation_dim)},
          {"action_codec_facing_north", actions},
          {"network_input", std::to_string(network.input.channels) + "x" + std::to_string(network.input.rows) + "x" +
                                std::to_string(network.input.cols) + "+" +
                                std::to_string(network.input.orientation_dim)},
          {"parameters", std::to_string(network.parameter_count())}};
}

namespace {

ParamSet<float> initial_params(const RlConfig& c, std::uint64_t seed) {
  c.validate();
  Rng rng = Rng(seed).split(c.world.rng_seed).split(kInit);
  return init_params<float>(c.network, rng);
}

Rng stream(const RlConfig& c, std::uint64_t seed, Stream s) { return Rng(seed).split(c.world.rng_seed).split(s); }

}  // namespace

RlTrainer::RlTrainer(RlConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      seed_(seed),
      params_(initial_params(config_, seed)),
      target_(params_),
      adam_(config_.adam, params_),
      replay_(config_.replay_capacity, 100),
      env_rng_(stream(config_, seed, kEnv)),
      policy_rng_(stream(config_, seed, kPolicy)),
      sample_rng_(stream(config_, seed, kSample)) {
  log_.kind = RunLog::Kind::Rl;
  log_.header = mode_fingerprint(config_.vision, config_.action, config_.world, config_.network);
  log_.header.emplace_back("seed", std::to_string(seed_));
}

bool RlTrainer::done() const { return halted() || env_steps_ >= config_.schedule.total_steps; }

void RlTrainer::run_episode() {
  if (done()) return;
  const RlConfig& c = config_;
  WorldState s = spawn(c.world, env_rng_);
  LstmState<float> state = LstmState<float>::zeros(c.network.lstm_cells);
  Trajectory trajectory;
  double episode_return = 0.0;
  while (!s.terminal) {
    Observation obs = encode(c.vision, c.world, s);
    QOutput<float> q = q_values(c.network, params_, obs, state);
    state = std::move(q.state);
    const Policy policy{anneal_epsilon(env_steps_, c.schedule)};
    const int a = policy.act(std::span<const float>(q.q), policy_rng_);
    const StepResult r = step(c.world, s, decode_action(a, c.action, s.subordinate.orientation));
    trajectory.push_back({std::move(obs), a, r.reward, r.state.terminal});
    episode_return += r.reward;
    s = r.state;
    env_steps_ += 1;
    if (!halted() && replay_.size() >= c.learn_start && env_steps_ % c.train_every == 0) learn();
  }
  replay_.push(std::move(trajectory));
  episodes_ += 1;
  block_reward_ += episode_return;
  block_episodes_ += 1;
  if (episodes_ % c.schedule.eval_every == 0 || done()) log_block();
}

void RlTrainer::run(const std::function<bool(const RlTrainer&)>& on_episode) {
  while (!done()) {
    run_episode();
    if (on_episode && !on_episode(*this)) break;
  }
}

void RlTrainer::learn() {
  const PaddedBatch batch = replay_.sample_batch(static_cast<std::size_t>(config_.batch), sample_rng_);
  LossResult<float> r = q_learning_loss(batch, config_.network, params_, target_, config_.td);
  const double norm = clip_gradients(r.grads, config_.clip, config_.clip_mode);
  if (!std::isfinite(r.loss) || !std::isfinite(norm)) {
    log_.halt_reason = "non-finite loss at step " + std::to_string(env_steps_);
    return;
  }
  adam_.step(params_, r.grads);
  if (adam_.steps() % config_.target_every == 0) soft_update(target_, params_, config_.tau);
  block_loss_ += r.loss;
  block_updates_ += 1;
}

std::pair<double, double> RlTrainer::evaluate(int episodes, std::uint64_t block) const {
  Rng rng = stream(config_, seed_, kEval).split(block);
  GreedyNetworkAgent agent(config_.network, params_);
  double total = 0.0, best = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const WorldState s = spawn(config_.world, rng);
    best += max_episode_reward(config_.world, s);
    total += rollout(agent, config_.world, config_.vision, config_.action, s, false).total_reward;
  }
  return {total / episodes, best / episodes};
}

void RlTrainer::log_block() {
  RlRow row;
  row.seed = seed_;
  row.step = env_steps_;
  row.episodes = episodes_;
  row.epsilon = anneal_epsilon(env_steps_, config_.schedule);
  std::tie(row.mean_reward, row.max_possible_reward) =
      evaluate(config_.schedule.eval_episodes, static_cast<std::uint64_t>(log_.rl.size()));
  row.train_mean_reward = block_episodes_ ? block_reward_ / static_cast<double>(block_episodes_) : 0.0;
  row.mean_loss = block_updates_ ? block_loss_ / static_cast<double>(block_updates_) : 0.0;
  row.optimizer_steps = adam_.steps();
  log_.rl.push_back(row);
  block_reward_ = 0.0;
  block_episodes_ = 0;
  block_loss_ = 0.0;
  block_updates_ = 0;
}

std::vector<std::uint8_t> RlTrainer::checkpoint_bytes() const {
  nlohmann::json meta;
  meta["kind"] = "rl_trainer";
  meta["config"] = config_;
  meta["seed"] = seed_;
  meta["env_steps"] = env_steps_;
  meta["episodes"] = episodes_;
  meta["optimizer_steps"] = adam_.steps();
  CheckpointWriter w(meta);
  w.add_params("online.", params_);
  w.add_params("target.", target_);
  w.add_params("adam.m.", adam_.first_moment());
  w.add_params("adam.v.", adam_.second_moment());
  ByteWriter state;
  for (const Rng* r : {&env_rng_, &policy_rng_, &sample_rng_}) {
    state.put<std::uint64_t>(r->state().key);
    state.put<std::uint64_t>(r->state().counter);
  }
  state.put<std::int64_t>(env_steps_);
  state.put<std::int64_t>(episodes_);
  state.put<std::int64_t>(adam_.steps());
  state.put<double>(block_reward_);
  state.put<std::int64_t>(block_episodes_);
  state.put<double>(block_loss_);
  state.put<std::int64_t>(block_updates_);
  w.add_blob("trainer_state", state.take());
  w.add_blob("replay", replay_.serialize());
  const std::string csv = log_.to_csv();
  w.add_blob("log", std::vector<std::uint8_t>(csv.begin(), csv.end()));
  return w.bytes();
}

void RlTrainer::save(const std::filesystem::path& path) const {
  const std::vector<std::uint8_t> bytes = checkpoint_bytes();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

RlTrainer RlTrainer::from_checkpoint_bytes(const std::vector<std::uint8_t>& bytes) {
  CheckpointReader r(bytes);
  const nlohmann::json& meta = r.meta();
  if (meta.value("kind", "") != "rl_trainer") throw CheckpointError("not an RL trainer checkpoint");
  RlConfig config = RlConfig::desk(VisualMode::Egocentric, ActionMode::Egocentric);
  try {
    update_from_json(meta.at("config"), config);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  RlTrainer t(config, meta.at("seed").get<std::uint64_t>());
  r.load_params("online.", t.params_);
  r.load_params("target.", t.target_);
  ParamSet<float> m = t.params_.zeros_like(), v = t.params_.zeros_like();
  r.load_params("adam.m.", m);
  r.load_params("adam.v.", v);
  const std::vector<std::uint8_t> blob = r.blob("trainer_state");
  ByteReader state(blob);
  for (Rng* g : {&t.env_rng_, &t.policy_rng_, &t.sample_rng_}) {
    Rng::State s;
    s.key = state.get<std::uint64_t>();
    s.counter = state.get<std::uint64_t>();
    *g = Rng(s);
  }
  t.env_steps_ = state.get<std::int64_t>();
  t.episodes_ = state.get<std::int64_t>();
  const auto steps = state.get<std::int64_t>();
  t.adam_.restore(std::move(m), std::move(v), steps);
  t.block_reward_ = state.get<double>();
  t.block_episodes_ = state.get<std::int64_t>();
  t.block_loss_ = state.get<double>();
  t.block_updates_ = state.get<std::int64_t>();
  if (!state.done()) throw CheckpointError("trailing bytes in trainer state");
  t.replay_ = ReplayBuffer::deserialize(r.blob("replay"));
  const std::vector<std::uint8_t> csv = r.blob("log");
  t.log_ = RunLog::from_csv(std::string(csv.begin(), csv.end()));
  return t;
}

RlTrainer RlTrainer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_checkpoint_bytes(bytes);
}

SupervisedConfig SupervisedConfig::for_vision(VisualMode vision) {
  SupervisedConfig c;
  c.vision = vision;
  c.world = vision == VisualMode::Allocentric ? WorldConfig::allocentric() : WorldConfig::egocentric();
  c.network = NetworkSpec::classifier(vision, c.world.side);
  return c;
}

void SupervisedConfig::validate() const {
  world.validate();
  network.validate();
  if (network.input != observation_shape(vision, world.side))
    throw ConfigError("network.input does not match " + to_string(vision) + " vision on a side-" +
                      std::to_string(world.side) + " world");
  if (network.head != HeadKind::Logits || network.outputs != 2 || network.lstm_cells != 0)
    throw ConfigError("the visibility classifier needs a two-class logits head and no LSTM");
  if (batch <= 0 || epochs <= 0) throw ConfigError("batch and epochs must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (weight_seeds.empty()) throw ConfigError("weight_seeds is empty");
}

void to_json(nlohmann::json& j, const SupervisedConfig& c) {
  nlohmann::json adam;
  to_json(adam, c.adam);
  j = {{"vision", to_string(c.vision)}, {"world", c.world},   {"network", c.network},
       {"adam", adam},                  {"batch", c.batch},   {"epochs", c.epochs},
       {"train_fraction", c.train_fraction}, {"split_seed", c.split_seed}, {"weight_seeds", c.weight_seeds}};
}

void update_from_json(const nlohmann::json& j, SupervisedConfig& c) {
  if (!j.is_object()) throw ConfigError("supervised config: expected an object");
  bool explicit_input = false;
  for (const auto& [key, v] : j.items())
    with_key("", key, [&] {
      if (key == "vision") c.vision = parse_visual_mode(v.get<std::string>());
      else if (key == "world") update_from_json(v, c.world);
      else if (key == "network") {
        explicit_input = explicit_input || (v.is_object() && v.contains("input"));
        update_from_json(v, c.network);
      } else if (key == "adam") update_from_json(v, c.adam, "adam");
      else if (key == "batch") c.batch = v.get<int>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "train_fraction") c.train_fraction = v.get<double>();
      else if (key == "split_seed") c.split_seed = v.get<std::uint64_t>();
      else if (key == "weight_seeds") c.weight_seeds = v.get<std::vector<std::uint64_t>>();
      else throw ConfigError("unknown key " + key);
    });
  if (!explicit_input) c.network.input = observation_shape(c.vision, c.world.side);
}

LabeledDataset LabeledDataset::build(VisualMode vision, const WorldConfig& world,
                                     const std::vector<InitialConfig>& configs) {
  LabeledDataset d;
  d.shape = observation_shape(vision, world.side);
  d.maps.reserve(configs.size() * d.shape.map_size());
  d.orientations.reserve(configs.size() * static_cast<std::size_t>(d.shape.orientation_dim));
  for (const InitialConfig& c : configs) {
    const Observation obs = encode(vision, world, c.state());
    d.maps.insert(d.maps.end(), obs.maps.begin(), obs.maps.end());
    d.orientations.insert(d.orientations.end(), obs.orientations.begin(), obs.orientations.end());
    d.labels.push_back(c.label ? 1 : 0);
  }
  return d;
}

Split split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
  return s;
}

namespace {

void gather_rows(const LabeledDataset& d, std::span<const std::size_t> rows, Tensor<float>& maps,
                 Tensor<float>& orientations) {
  const std::size_t ms = d.shape.map_size();
  const auto od = static_cast<std::size_t>(d.shape.orientation_dim);
  const int n = static_cast<int>(rows.size());
  maps = Tensor<float>({n, d.shape.channels, d.shape.rows, d.shape.cols});
  orientations = Tensor<float>({n, d.shape.orientation_dim});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::uint8_t* m = d.maps.data() + rows[i] * ms;
    for (std::size_t k = 0; k < ms; ++k) maps[i * ms + k] = m[k];
    const std::uint8_t* o = d.orientations.data() + rows[i] * od;
    for (std::size_t k = 0; k < od; ++k) orientations[i * od + k] = o[k];
  }
}

}  // namespace

double classifier_accuracy(const NetworkSpec& spec, const ParamSet<float>& params, const LabeledDataset& data,
                           std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  std::size_t correct = 0;
  constexpr std::size_t kChunk = 512;
  for (std::size_t begin = 0; begin < rows.size(); begin += kChunk) {
    const auto chunk = rows.subspan(begin, std::min(kChunk, rows.size() - begin));
    Tensor<float> maps, orientations;
    gather_rows(data, chunk, maps, orientations);
    ad::Tape<float> tape(false);
    BoundNetwork<float> net(spec, params, tape);
    const StepVars<float> s =
        net.step(tape.constant(std::move(maps)), tape.constant(std::move(orientations)),
                 net.zero_state(static_cast<int>(chunk.size())));
    const Tensor<float>& logits = s.output.value();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const int predicted = logits.at(static_cast<int>(i), 1) > logits.at(static_cast<int>(i), 0) ? 1 : 0;
      correct += predicted == data.labels[chunk[i]];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

SupervisedResult train_supervised(const SupervisedConfig& config, const LabeledDataset& data, const Split& split,
                                  std::uint64_t weight_seed) {
  config.validate();
  if (data.shape != config.network.input) throw ShapeError("dataset does not match the classifier input");
  if (split.train.empty()) throw ConfigError("empty training split");
  Rng root(weight_seed);
  Rng init_rng = root.split(kInit);
  Rng shuffle_rng = root.split(kShuffle);
  SupervisedResult result;
  result.params = init_params<float>(config.network, init_rng);
  Adam<float> adam(config.adam, result.params);
  std::vector<std::size_t> order = split.train;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch)) {
      const std::span<const std::size_t> rows(order.data() + begin,
                                              std::min<std::size_t>(static_cast<std::size_t>(config.batch),
                                                                    order.size() - begin));
      Tensor<float> maps, orientations;
      gather_rows(data, rows, maps, orientations);
      std::vector<int> labels(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = data.labels[rows[i]];
      ad::Tape<float> tape(true);
      BoundNetwork<float> net(config.network, result.params, tape);
      const StepVars<float> s = net.step(tape.constant(std::move(maps)), tape.constant(std::move(orientations)),
                                         net.zero_state(static_cast<int>(rows.size())));
      const ad::Var<float> loss = ad::softmax_cross_entropy(s.output, std::span<const int>(labels));
      tape.backward(loss);
      ParamSet<float> grads = result.params.zeros_like();
      net.accumulate_gradients(grads);
      adam.step(result.params, grads);
      loss_sum += static_cast<double>(loss.value()[0]);
      batches += 1;
    }
    SupervisedRow row;
    row.seed = weight_seed;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(batches);
    row.train_acc = classifier_accuracy(config.network, result.params, data, split.train);
    row.val_acc = classifier_accuracy(config.network, result.params, data, split.validation);
    result.rows.push_back(row);
  }
  return result;
}

RunLog train_supervised(const SupervisedConfig& config) {
  config.validate();
  const LabeledDataset data =
      LabeledDataset::build(config.vision, config.world, enumerate_initial_configs(config.world));
  const Split split = split_indices(data.size(), config.train_fraction, config.split_seed);
  RunLog log;
  log.kind = RunLog::Kind::Supervised;
  log.header = mode_fingerprint(config.vision, ActionMode::Allocentric, config.world, config.network);
  // The classifier has no action output.
  std::erase_if(log.header, [](const auto& kv) { return kv.first.rfind("action", 0) == 0; });
  log.header.emplace_back("samples", std::to_string(data.size()));
  log.header.emplace_back("split_seed", std::to_string(config.split_seed));
  for (std::uint64_t seed : config.weight_seeds) {
    SupervisedResult r = train_supervised(config, data, split, seed);
    log.supervised.insert(log.supervised.end(), r.rows.begin(), r.rows.end());
  }
  return log;
}

MeanSem mean_sem(std::span<const double> values) {
  MeanSem out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

}  // namespace perspective
