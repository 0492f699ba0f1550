#pragma once

#include "perspective/network.hpp"
#include "perspective/percept.hpp"
#include "perspective/replay.hpp"

namespace fixture {

using namespace perspective;

/// The Q-network layout shrunk so finite differences stay cheap.
inline NetworkSpec small_spec(VisualMode vision, int side, HeadKind head = HeadKind::Dueling) {
  NetworkSpec s = head == HeadKind::Dueling ? NetworkSpec::q_network(vision, side) : NetworkSpec::classifier(vision, side);
  s.conv_filters = 2;
  s.dense1 = 5;
  s.dense2 = 4;
  if (head == HeadKind::Dueling) s.lstm_cells = 3;
  return s;
}

/// Every entry uniform in [-scale, scale], so no ReLU sits exactly at its kink
/// the way zero-initialised biases on sparse inputs do.
template <typename T>
ParamSet<T> generic_params(const NetworkSpec& spec, Rng& rng, double scale = 0.5) {
  ParamSet<T> p = init_params<T>(spec, rng);
  for (auto& [name, t] : p)
    for (T& v : t.values()) v = static_cast<T>(rng.uniform(-scale, scale));
  return p;
}

/// A uniformly random episode, cut off after `max_len` steps.
inline Trajectory random_trajectory(const WorldConfig& world, VisualMode vision, ActionMode action, Rng& rng,
                                    int max_len) {
  GridWorld env(world, rng.split(rng.next_u64()));
  env.reset();
  Trajectory traj;
  while (!env.state().terminal && static_cast<int>(traj.size()) < max_len) {
    TrajectoryStep step;
    step.observation = encode(vision, world, env.state());
    step.action = static_cast<int>(rng.uniform_index(kActionCount));
    const StepResult r = env.step(decode_action(step.action, action, env.state().subordinate.orientation));
    step.reward = r.reward;
    step.terminal = r.state.terminal;
    traj.push_back(std::move(step));
  }
  return traj;
}

}  // namespace fixture
