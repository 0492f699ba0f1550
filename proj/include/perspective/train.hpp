#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "perspective/analysis.hpp"
#include "perspective/gridworld.hpp"
#include "perspective/network.hpp"
#include "perspective/optim.hpp"
#include "perspective/percept.hpp"
#include "perspective/qagent.hpp"
#include "perspective/replay.hpp"

namespace perspective {

enum class Profile { Desk, Paper };
std::string to_string(Profile p);
Profile parse_profile(const std::string& s);

struct RlSchedule {
  std::int64_t total_steps = 20'000'000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  double anneal_fraction = 0.75;
  /// Training episodes between greedy evaluation blocks.
  int eval_every = 1000;
  int eval_episodes = 100;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6};

  void validate() const;
  bool operator==(const RlSchedule&) const = default;
};

/// Linear from epsilon_start at step 0 to epsilon_end at anneal_fraction * total_steps, flat afterwards.
double anneal_epsilon(std::int64_t step, const RlSchedule& schedule);

struct RlConfig {
  VisualMode vision = VisualMode::Egocentric;
  ActionMode action = ActionMode::Egocentric;
  WorldConfig world = WorldConfig::egocentric();
  NetworkSpec network = NetworkSpec::q_network(VisualMode::Egocentric, 11);
  RlSchedule schedule;
  AdamConfig adam;
  double clip = 2.0;
  ClipMode clip_mode = ClipMode::GlobalNorm;
  TdConfig td;
  double tau = 0.01;
  /// Optimizer steps between soft target updates.
  int target_every = 100;
  int batch = 16;
  std::size_t replay_capacity = 1000;
  /// Learning starts once the buffer holds this many episodes.
  std::size_t learn_start = 16;
  /// Environment steps per optimizer step.
  int train_every = 1;
  /// Episodes between checkpoints; 0 writes one only at the end.
  int checkpoint_every = 0;

  /// Full-size world for the vision mode, 2e7 steps, 7 seeds.
  static RlConfig paper(VisualMode vision, ActionMode action);
  /// 7x7 world with a 3x3 spawn region and a budget that fits on one core.
  static RlConfig desk(VisualMode vision, ActionMode action);
  static RlConfig for_profile(Profile p, VisualMode vision, ActionMode action);

  void validate() const;
  bool operator==(const RlConfig&) const = default;
};

void to_json(nlohmann::json& j, const RlSchedule& s);
void update_from_json(const nlohmann::json& j, RlSchedule& s);
void to_json(nlohmann::json& j, const RlConfig& c);
/// Strict; unknown keys throw ConfigError. Changing vision or world size
/// re-derives the network input shape.
void update_from_json(const nlohmann::json& j, RlConfig& c);

struct RlRow {
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::int64_t episodes = 0;
  double epsilon = 0.0;
  /// Greedy evaluation block.
  double mean_reward = 0.0;
  double max_possible_reward = 0.0;
  /// Training episodes since the previous row.
  double train_mean_reward = 0.0;
  double mean_loss = 0.0;
  std::int64_t optimizer_steps = 0;
  bool operator==(const RlRow&) const = default;
};

struct SupervisedRow {
  std::uint64_t seed = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  bool operator==(const SupervisedRow&) const = default;
};

/// CSV with '#'-prefixed header lines (key=value fingerprints) followed by a
/// column header and one row per evaluation block or epoch.
struct RunLog {
  enum class Kind { Rl, Supervised };
  Kind kind = Kind::Rl;
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<RlRow> rl;
  std::vector<SupervisedRow> supervised;
  /// Set when training stopped early, e.g. on a non-finite loss.
  std::string halt_reason;

  std::string header_value(const std::string& key) const;
  std::string to_csv() const;
  static RunLog from_csv(const std::string& text);
  void write(const std::filesystem::path& path) const;
  static RunLog read(const std::filesystem::path& path);
  bool operator==(const RunLog&) const = default;
};

inline constexpr const char* kRlColumns =
    "seed,step,episodes,epsilon,mean_reward_100ep,max_possible_reward_100ep,train_mean_reward,mean_loss,"
    "optimizer_steps";
inline constexpr const char* kSupervisedColumns = "seed,epoch,train_loss,train_acc,val_acc";

/// Key/value fingerprints of the encoder and action codec a run is wired to.
std::vector<std::pair<std::string, std::string>> mode_fingerprint(VisualMode vision, ActionMode action,
                                                                  const WorldConfig& world,
                                                                  const NetworkSpec& network);

/// One (mode pair, seed) training run. Advances one episode at a time so it
/// can be checkpointed at any episode boundary and resumed bit-exactly.
class RlTrainer {
 public:
  RlTrainer(RlConfig config, std::uint64_t seed);

  bool done() const;
  /// Runs one training episode, learning as it goes, then an evaluation
  /// block if one is due.
  void run_episode();
  /// Runs until done. `on_episode` may return false to stop early.
  void run(const std::function<bool(const RlTrainer&)>& on_episode = {});

  void save(const std::filesystem::path& path) const;
  std::vector<std::uint8_t> checkpoint_bytes() const;
  static RlTrainer load(const std::filesystem::path& path);
  static RlTrainer from_checkpoint_bytes(const std::vector<std::uint8_t>& bytes);

  const RlConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const ParamSet<float>& params() const { return params_; }
  const ParamSet<float>& target() const { return target_; }
  const RunLog& log() const { return log_; }
  const ReplayBuffer& replay() const { return replay_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t episodes() const { return episodes_; }
  std::int64_t optimizer_steps() const { return adam_.steps(); }
  bool halted() const { return !log_.halt_reason.empty(); }

  /// Greedy evaluation block: mean return and mean best-possible return over
  /// `episodes` spawns drawn from a generator fixed by (seed, block).
  std::pair<double, double> evaluate(int episodes, std::uint64_t block) const;

 private:
  void learn();
  void log_block();

  RlConfig config_;
  std::uint64_t seed_;
  ParamSet<float> params_;
  ParamSet<float> target_;
  Adam<float> adam_;
  ReplayBuffer replay_;
  Rng env_rng_;
  Rng policy_rng_;
  Rng sample_rng_;
  std::int64_t env_steps_ = 0;
  std::int64_t episodes_ = 0;
  RunLog log_;
  // Accumulators since the last logged row.
  double block_reward_ = 0.0;
  std::int64_t block_episodes_ = 0;
  double block_loss_ = 0.0;
  std::int64_t block_updates_ = 0;
};

struct SupervisedConfig {
  VisualMode vision = VisualMode::Allocentric;
  WorldConfig world = WorldConfig::allocentric();
  NetworkSpec network = NetworkSpec::classifier(VisualMode::Allocentric, 13);
  AdamConfig adam;
  int batch = 64;
  int epochs = 20;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  std::vector<std::uint64_t> weight_seeds = std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9,
                                                                       10, 11, 12, 13, 14, 15, 16, 17, 18, 19};

  /// Full-size world for the vision mode with the classifier network.
  static SupervisedConfig for_vision(VisualMode vision);
  void validate() const;
  bool operator==(const SupervisedConfig&) const = default;
};

void to_json(nlohmann::json& j, const SupervisedConfig& c);
void update_from_json(const nlohmann::json& j, SupervisedConfig& c);

/// Initial observations and visibility labels for every enumerated config.
struct LabeledDataset {
  ObservationShape shape;
  std::vector<std::uint8_t> maps;
  std::vector<std::uint8_t> orientations;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  static LabeledDataset build(VisualMode vision, const WorldConfig& world, const std::vector<InitialConfig>& configs);
};

/// Random train/validation partition fixed by the seed.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
Split split_indices(std::size_t n, double train_fraction, std::uint64_t seed);

struct SupervisedResult {
  ParamSet<float> params;
  std::vector<SupervisedRow> rows;
};

/// Trains one weight seed; one row per epoch (1-based).
SupervisedResult train_supervised(const SupervisedConfig& config, const LabeledDataset& data, const Split& split,
                                  std::uint64_t weight_seed);
/// Trains every weight seed in the config on a shared split.
RunLog train_supervised(const SupervisedConfig& config);

/// Fraction of rows whose argmax logit equals the label.
double classifier_accuracy(const NetworkSpec& spec, const ParamSet<float>& params, const LabeledDataset& data,
                           std::span<const std::size_t> rows);

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
};
/// Sample standard deviation over sqrt(n); zero for a single value.
MeanSem mean_sem(std::span<const double> values);

}  // namespace perspective
