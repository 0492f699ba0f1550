#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "perspective/gridworld.hpp"
#include "perspective/percept.hpp"
#include "perspective/qagent.hpp"

namespace perspective {

/// One allowed starting arrangement. The subordinate always starts in
/// column 0 facing East.
struct InitialConfig {
  std::size_t id = 0;
  int subordinate_row = 0;
  AgentPose dominant;
  Cell food;
  /// Whether the dominant sees the food.
  bool label = false;

  WorldState state() const;
  bool operator==(const InitialConfig&) const = default;
};

/// Every subordinate row x dominant cell x dominant heading x food cell, in
/// that nesting order. Ids are positions in the returned list.
std::vector<InitialConfig> enumerate_initial_configs(const WorldConfig& world);

/// subordinate rows * |region| * 4 * (|region| - 1).
std::size_t initial_config_count(const WorldConfig& world);

/// Count reported alongside the allocentric dataset in the published results;
/// differs from the closed-form enumeration by 900.
inline constexpr std::size_t kPublishedAllocentricCount = 32100;
inline constexpr std::size_t kPublishedEgocentricCount = 26400;

/// Controller interface used by rollouts. `act` sees the encoded observation
/// and, for privileged baselines, the true state. `episode` identifies the
/// episode (the config id during evaluation) so stochastic agents can draw
/// from a stream that does not depend on evaluation order.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual void begin_episode(std::uint64_t episode) { (void)episode; }
  virtual int act(const Observation& obs, const WorldState& state) = 0;
};

/// Greedy (epsilon = 0) recurrent Q-network.
class GreedyNetworkAgent : public Agent {
 public:
  GreedyNetworkAgent(NetworkSpec spec, const ParamSet<float>& params);
  void begin_episode(std::uint64_t episode) override;
  int act(const Observation& obs, const WorldState& state) override;

 private:
  NetworkSpec spec_;
  const ParamSet<float>& params_;
  LstmState<float> state_;
};

/// Walks a shortest path to the food when the dominant cannot see it and
/// stays put otherwise. Reads the true state.
class OracleAgent : public Agent {
 public:
  OracleAgent(WorldConfig world, ActionMode action) : world_(std::move(world)), action_(action) {}
  int act(const Observation& obs, const WorldState& state) override;

 private:
  WorldConfig world_;
  ActionMode action_;
};

/// Uniform over the five actions.
class RandomAgent : public Agent {
 public:
  explicit RandomAgent(Rng rng) : base_(rng), rng_(rng) {}
  void begin_episode(std::uint64_t episode) override { rng_ = base_.split(episode); }
  int act(const Observation& obs, const WorldState& state) override;

 private:
  Rng base_;
  Rng rng_;
};

/// First move of a shortest path from the subordinate to the food that avoids
/// the dominant's cell, as a world displacement. Nullopt when unreachable or
/// already there.
std::optional<Cell> shortest_path_step(const WorldConfig& world, const WorldState& state);

struct EpisodeRecord {
  std::size_t config_id = 0;
  VisualMode vision = VisualMode::Allocentric;
  ActionMode action = ActionMode::Allocentric;
  WorldConfig world;
  /// One trace line per state, starting with the spawn line.
  std::vector<nlohmann::json> trace;
  double total_reward = 0.0;
  bool ate = false;
  int steps = 0;
};

/// Runs one episode from `initial` to termination.
EpisodeRecord rollout(Agent& agent, const WorldConfig& world, VisualMode vision, ActionMode action,
                      const WorldState& initial, bool keep_trace = true, std::uint64_t episode = 0);

struct TrialOutcome {
  std::size_t config_id = 0;
  bool label = false;
  bool ate = false;
  int steps = 0;
  double reward = 0.0;
  bool correct = false;
  bool operator==(const TrialOutcome&) const = default;
};

/// "Should eat" trials are those where the dominant cannot see the food.
struct BehaviorReport {
  std::size_t eat_trials = 0;
  std::size_t eat_correct = 0;
  std::size_t avoid_trials = 0;
  std::size_t avoid_correct = 0;
  std::vector<TrialOutcome> outcomes;

  double pct_correct_when_should_eat() const;
  double pct_correct_when_should_avoid() const;
  bool operator==(const BehaviorReport&) const = default;
};

/// Correct means eating within the step limit when the food is unseen, and
/// never eating when it is seen.
BehaviorReport evaluate_behavior(Agent& agent, const WorldConfig& world, VisualMode vision, ActionMode action,
                                 const std::vector<InitialConfig>& configs);

/// Greedy network evaluation; throws ShapeError when params do not fit the vision mode.
BehaviorReport evaluate_behavior(const NetworkSpec& spec, const ParamSet<float>& params, const WorldConfig& world,
                                 VisualMode vision, ActionMode action);

nlohmann::json to_json(const BehaviorReport& r);
std::string outcomes_csv(const BehaviorReport& r);

/// Picks one config id per (label, correct) quadrant where available, in the
/// order eat-correct, eat-wrong, avoid-correct, avoid-wrong.
std::vector<std::pair<std::string, std::size_t>> select_quartet(const BehaviorReport& r);

}  // namespace perspective
