#pragma once

#include <span>
#include <vector>

#include "perspective/network.hpp"
#include "perspective/replay.hpp"
#include "perspective/rng.hpp"

namespace perspective {

/// LSTM hidden and cell vectors for a single episode; zeros at episode start.
template <typename T>
struct LstmState {
  std::vector<T> hidden;
  std::vector<T> cell;

  static LstmState zeros(int cells) {
    return {std::vector<T>(static_cast<std::size_t>(cells)), std::vector<T>(static_cast<std::size_t>(cells))};
  }
  bool operator==(const LstmState&) const = default;
};

template <typename T>
struct QOutput {
  std::vector<T> q;
  std::vector<T> advantage;
  T value{};
  LstmState<T> state;
};

/// Q(s, a) = V(s) + A(s, a) - max_a' A(s, a').
template <typename T>
std::vector<T> dueling_q(T value, std::span<const T> advantage);

/// Lowest index among the maxima.
template <typename T>
int greedy_action(std::span<const T> q);

/// One forward step of the recurrent Q-network for a single observation.
template <typename T>
QOutput<T> q_values(const NetworkSpec& spec, const ParamSet<T>& params, const Observation& obs,
                    const LstmState<T>& state);

/// Draws u ~ U(0,1); acts uniformly at random when u < epsilon, greedily otherwise.
struct Policy {
  double epsilon = 0.0;

  template <typename T>
  int act(std::span<const T> q, Rng& rng) const {
    if (rng.uniform() < epsilon) return static_cast<int>(rng.uniform_index(q.size()));
    return greedy_action(q);
  }
};

/// target = source * tau + target * (1 - tau), elementwise.
template <typename T>
void soft_update(ParamSet<T>& target, const ParamSet<T>& source, double tau);

struct TdConfig {
  double gamma = 0.99;
  /// Rewards are multiplied by this before forming targets.
  double reward_scale = 1.0;
  bool operator==(const TdConfig&) const = default;
};

template <typename T>
struct LossResult {
  double loss = 0.0;
  ParamSet<T> grads;
  std::size_t steps = 0;  // unmasked steps averaged over
};

/// Mean squared TD error over the unmasked steps of a padded batch, with
/// y = r + gamma * max_a Q_target(s', a) and y = r on terminal steps. Both
/// networks are unrolled from a zero LSTM state over the whole trajectory.
/// Steps past the longest trajectory are skipped; they are masked anyway and
/// cannot influence earlier steps.
template <typename T>
LossResult<T> q_learning_loss(const PaddedBatch& batch, const NetworkSpec& spec, const ParamSet<T>& online,
                              const ParamSet<T>& target, const TdConfig& td);

/// Tensors for step t of a padded batch.
template <typename T>
Tensor<T> batch_maps(const PaddedBatch& batch, int t);
template <typename T>
Tensor<T> batch_orientations(const PaddedBatch& batch, int t);

}  // namespace perspective
