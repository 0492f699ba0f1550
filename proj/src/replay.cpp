#include "perspective/replay.hpp"

#include <algorithm>

#include "perspective/checkpoint.hpp"

namespace perspective {

int PaddedBatch::max_length() const {
  return lengths.empty() ? 0 : *std::max_element(lengths.begin(), lengths.end());
}

std::vector<Observation> PaddedBatch::step_observations(int t) const {
  std::vector<Observation> out(static_cast<std::size_t>(batch));
  const std::size_t ms = shape.map_size(), od = static_cast<std::size_t>(shape.orientation_dim);
  for (int b = 0; b < batch; ++b) {
    Observation& o = out[static_cast<std::size_t>(b)];
    o.shape = shape;
    const std::size_t i = at(t, b);
    o.maps.assign(maps.begin() + static_cast<std::ptrdiff_t>(i * ms), maps.begin() + static_cast<std::ptrdiff_t>((i + 1) * ms));
    o.orientations.assign(orientations.begin() + static_cast<std::ptrdiff_t>(i * od),
                          orientations.begin() + static_cast<std::ptrdiff_t>((i + 1) * od));
  }
  return out;
}

PaddedBatch pad_trajectories(const std::vector<const Trajectory*>& trajectories, int length) {
  if (trajectories.empty()) throw ReplayError("cannot pad an empty batch");
  PaddedBatch p;
  p.batch = static_cast<int>(trajectories.size());
  p.length = length;
  p.shape = trajectories.front()->front().observation.shape;
  const std::size_t cells = static_cast<std::size_t>(length) * trajectories.size();
  const std::size_t ms = p.shape.map_size(), od = static_cast<std::size_t>(p.shape.orientation_dim);
  p.maps.assign(cells * ms, 0);
  p.orientations.assign(cells * od, 0);
  p.actions.assign(cells, 0);
  p.rewards.assign(cells, 0.0);
  p.terminals.assign(cells, 0);
  p.mask.assign(cells, 0);
  for (int b = 0; b < p.batch; ++b) {
    const Trajectory& tr = *trajectories[static_cast<std::size_t>(b)];
    if (tr.empty() || static_cast<int>(tr.size()) > length) throw ReplayError("trajectory does not fit the padded length");
    p.lengths.push_back(static_cast<int>(tr.size()));
    for (int t = 0; t < static_cast<int>(tr.size()); ++t) {
      const TrajectoryStep& s = tr[static_cast<std::size_t>(t)];
      if (s.observation.shape != p.shape) throw ReplayError("mixed observation shapes in one batch");
      const std::size_t i = p.at(t, b);
      std::copy(s.observation.maps.begin(), s.observation.maps.end(), p.maps.begin() + static_cast<std::ptrdiff_t>(i * ms));
      std::copy(s.observation.orientations.begin(), s.observation.orientations.end(),
                p.orientations.begin() + static_cast<std::ptrdiff_t>(i * od));
      p.actions[i] = s.action;
      p.rewards[i] = s.reward;
      p.terminals[i] = s.terminal ? 1 : 0;
      p.mask[i] = 1;
    }
  }
  return p;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int max_length)
    : capacity_(capacity), max_length_(max_length), ring_(capacity) {
  if (capacity == 0 || max_length < 1) throw ReplayError("replay capacity and length must be positive");
}

void ReplayBuffer::push(Trajectory trajectory) {
  if (trajectory.empty()) throw ReplayError("cannot store an empty trajectory");
  if (static_cast<int>(trajectory.size()) > max_length_)
    throw ReplayError("trajectory of length " + std::to_string(trajectory.size()) + " exceeds the maximum " +
                      std::to_string(max_length_));
  ring_[head_] = std::move(trajectory);
  head_ = (head_ + 1) % capacity_;
  count_ = std::min(count_ + 1, capacity_);
  ++pushed_;
}

const Trajectory& ReplayBuffer::at(std::size_t i) const {
  if (i >= count_) throw std::out_of_range("replay index out of range");
  return ring_[slot(i)];
}

PaddedBatch ReplayBuffer::sample_batch(std::size_t batch, Rng& rng) const {
  if (count_ == 0) throw ReplayError("cannot sample from an empty replay buffer");
  std::vector<const Trajectory*> picks;
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t logical = rng.uniform_index(count_);
    slots.push_back(logical);
    picks.push_back(&ring_[slot(logical)]);
  }
  PaddedBatch p = pad_trajectories(picks, max_length_);
  p.slots = std::move(slots);
  return p;
}

std::vector<std::uint8_t> ReplayBuffer::serialize() const {
  ByteWriter w;
  w.put<std::uint64_t>(capacity_);
  w.put<std::int32_t>(max_length_);
  w.put<std::uint64_t>(pushed_);
  w.put<std::uint64_t>(count_);
  for (std::size_t i = 0; i < count_; ++i) {
    const Trajectory& tr = at(i);
    w.put<std::uint64_t>(tr.size());
    for (const TrajectoryStep& s : tr) {
      const ObservationShape& sh = s.observation.shape;
      w.put<std::uint8_t>(static_cast<std::uint8_t>(s.observation.mode));
      w.put<std::int32_t>(sh.channels);
      w.put<std::int32_t>(sh.rows);
      w.put<std::int32_t>(sh.cols);
      w.put<std::int32_t>(sh.orientation_dim);
      w.put_bytes(s.observation.maps);
      w.put_bytes(s.observation.orientations);
      w.put<std::int32_t>(s.action);
      w.put<double>(s.reward);
      w.put<std::uint8_t>(s.terminal ? 1 : 0);
    }
  }
  return w.take();
}

ReplayBuffer ReplayBuffer::deserialize(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  const auto capacity = r.get<std::uint64_t>();
  const auto max_length = r.get<std::int32_t>();
  const auto pushed = r.get<std::uint64_t>();
  const auto count = r.get<std::uint64_t>();
  ReplayBuffer buf(capacity, max_length);
  for (std::uint64_t i = 0; i < count; ++i) {
    Trajectory tr(r.get<std::uint64_t>());
    for (TrajectoryStep& s : tr) {
      s.observation.mode = static_cast<VisualMode>(r.get<std::uint8_t>());
      s.observation.shape.channels = r.get<std::int32_t>();
      s.observation.shape.rows = r.get<std::int32_t>();
      s.observation.shape.cols = r.get<std::int32_t>();
      s.observation.shape.orientation_dim = r.get<std::int32_t>();
      s.observation.maps = r.get_bytes();
      s.observation.orientations = r.get_bytes();
      s.action = r.get<std::int32_t>();
      s.reward = r.get<double>();
      s.terminal = r.get<std::uint8_t>() != 0;
    }
    buf.push(std::move(tr));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after replay buffer");
  buf.pushed_ = pushed;
  return buf;
}

bool ReplayBuffer::operator==(const ReplayBuffer& other) const {
  if (capacity_ != other.capacity_ || max_length_ != other.max_length_ || count_ != other.count_ ||
      pushed_ != other.pushed_)
    return false;
  for (std::size_t i = 0; i < count_; ++i)
    if (at(i) != other.at(i)) return false;
  return true;
}

}  // namespace perspective
