#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "perspective/percept.hpp"
#include "perspective/rng.hpp"

namespace perspective {

struct TrajectoryStep {
  Observation observation;
  int action = 0;
  double reward = 0.0;
  bool terminal = false;
  bool operator==(const TrajectoryStep&) const = default;
};

using Trajectory = std::vector<TrajectoryStep>;

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trajectories padded with zeros to a common length, stored time-major:
/// element (t, b) of a per-step field lives at index t * batch + b.
struct PaddedBatch {
  int batch = 0;
  int length = 0;
  ObservationShape shape;
  std::vector<std::uint8_t> maps;          // [length][batch][map_size]
  std::vector<std::uint8_t> orientations;  // [length][batch][orientation_dim]
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminals;
  std::vector<std::uint8_t> mask;
  std::vector<int> lengths;
  /// Buffer slot of each sampled trajectory (sample_batch only).
  std::vector<std::size_t> slots;

  std::size_t at(int t, int b) const { return static_cast<std::size_t>(t * batch + b); }
  /// Longest real trajectory; steps beyond it are padding for every row.
  int max_length() const;
  /// Observation views for step t, with nullptr for padded rows.
  std::vector<Observation> step_observations(int t) const;
};

/// Zero-pads trajectories to `length`. Every trajectory must fit.
PaddedBatch pad_trajectories(const std::vector<const Trajectory*>& trajectories, int length);

/// FIFO ring of complete episodes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1000, int max_length = 100);

  /// Rejects empty and over-length trajectories. Evicts the oldest when full.
  void push(Trajectory trajectory);

  std::size_t size() const { return count_; }
  std::size_t capacity() const { return capacity_; }
  int max_length() const { return max_length_; }
  /// Logical index 0 is the oldest stored trajectory.
  const Trajectory& at(std::size_t i) const;
  std::uint64_t total_pushed() const { return pushed_; }

  /// Uniform with replacement; padded to max_length().
  PaddedBatch sample_batch(std::size_t batch, Rng& rng) const;

  std::vector<std::uint8_t> serialize() const;
  static ReplayBuffer deserialize(const std::vector<std::uint8_t>& bytes);

  bool operator==(const ReplayBuffer& other) const;

 private:
  std::size_t slot(std::size_t logical) const { return (head_ + capacity_ - count_ + logical) % capacity_; }

  std::size_t capacity_;
  int max_length_;
  std::vector<Trajectory> ring_;
  std::size_t head_ = 0;  // next write position
  std::size_t count_ = 0;
  std::uint64_t pushed_ = 0;
};

}  // namespace perspective
