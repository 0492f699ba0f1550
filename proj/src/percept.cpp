#include "perspective/percept.hpp"

#include <stdexcept>

namespace perspective {

std::string to_string(VisualMode m) { return m == VisualMode::Allocentric ? "allo" : "ego"; }
std::string to_string(ActionMode m) { return m == ActionMode::Allocentric ? "allo" : "ego"; }

VisualMode parse_visual_mode(const std::string& s) {
  if (s == "allo" || s == "allocentric") return VisualMode::Allocentric;
  if (s == "ego" || s == "egocentric") return VisualMode::Egocentric;
  throw ConfigError("unknown vision mode '" + s + "'");
}

ActionMode parse_action_mode(const std::string& s) {
  if (s == "allo" || s == "allocentric") return ActionMode::Allocentric;
  if (s == "ego" || s == "egocentric") return ActionMode::Egocentric;
  throw ConfigError("unknown action mode '" + s + "'");
}

RelativeOrientation relative_orientation(Orientation sub, Orientation dom) {
  if (dom == sub) return RelativeOrientation::SameDirection;
  if (dom == opposite(sub)) return RelativeOrientation::TowardAgent;
  if (dom == turn_right(sub)) return RelativeOrientation::ToItsRight;
  return RelativeOrientation::ToItsLeft;
}

int allocentric_orientation_slot(Orientation o) {
  switch (o) {
    case Orientation::North: return 0;
    case Orientation::South: return 1;
    case Orientation::East: return 2;
    case Orientation::West: return 3;
  }
  return 0;
}

ObservationShape observation_shape(VisualMode mode, int side) {
  if (mode == VisualMode::Allocentric) return {4, side, side, 8};
  return {3, side, 2 * side - 1, 4};
}

Observation encode_allocentric(const WorldConfig& config, const WorldState& state) {
  Observation obs;
  obs.mode = VisualMode::Allocentric;
  obs.shape = observation_shape(VisualMode::Allocentric, config.side);
  obs.maps.assign(obs.shape.map_size(), 0);
  obs.orientations.assign(8, 0);

  const VisibilityMask mask = field_of_view(state.subordinate, config.side, config.closed_fov);
  for (int r = 0; r < config.side; ++r)
    for (int c = 0; c < config.side; ++c) obs.at(channel::kAlloObservable, r, c) = mask.visible({r, c});

  obs.at(channel::kAlloSubordinate, state.subordinate.row, state.subordinate.col) = 1;
  obs.orientations[static_cast<std::size_t>(allocentric_orientation_slot(state.subordinate.orientation))] = 1;

  if (mask.visible(state.dominant.cell())) {
    obs.at(channel::kAlloDominant, state.dominant.row, state.dominant.col) = 1;
    obs.orientations[static_cast<std::size_t>(4 + allocentric_orientation_slot(state.dominant.orientation))] = 1;
  }
  if (state.food && mask.visible(*state.food)) obs.at(channel::kAlloFood, state.food->row, state.food->col) = 1;
  return obs;
}

Cell egocentric_cell(const AgentPose& viewer, Cell target, int side) {
  const Cell h = heading(viewer.orientation);
  const Cell right{h.col, -h.row};
  const Cell d = target - viewer.cell();
  const int forward = d.row * h.row + d.col * h.col;
  const int lateral = d.row * right.row + d.col * right.col;
  return {side - 1 - forward, side - 1 + lateral};
}

Observation encode_egocentric(const WorldConfig& config, const WorldState& state) {
  Observation obs;
  obs.mode = VisualMode::Egocentric;
  obs.shape = observation_shape(VisualMode::Egocentric, config.side);
  obs.maps.assign(obs.shape.map_size(), 0);
  obs.orientations.assign(4, 0);

  const AgentPose& sub = state.subordinate;
  auto place = [&](Cell world) -> std::optional<Cell> {
    if (!in_field_of_view(sub, world, config.closed_fov)) return std::nullopt;
    Cell m = egocentric_cell(sub, world, config.side);
    if (m.row < 0 || m.row >= obs.shape.rows || m.col < 0 || m.col >= obs.shape.cols) return std::nullopt;
    return m;
  };

  for (int r = 0; r < config.side; ++r)
    for (int c = 0; c < config.side; ++c)
      if (auto m = place({r, c})) obs.at(channel::kEgoObservable, m->row, m->col) = 1;

  if (auto m = place(state.dominant.cell())) {
    obs.at(channel::kEgoDominant, m->row, m->col) = 1;
    obs.orientations[static_cast<std::size_t>(relative_orientation(sub.orientation, state.dominant.orientation))] = 1;
  }
  if (state.food)
    if (auto m = place(*state.food)) obs.at(channel::kEgoFood, m->row, m->col) = 1;
  return obs;
}

Observation encode(VisualMode mode, const WorldConfig& config, const WorldState& state) {
  return mode == VisualMode::Allocentric ? encode_allocentric(config, state) : encode_egocentric(config, state);
}

template <typename T>
void flatten_into(const Observation& obs, T* maps_out, T* orientations_out) {
  for (std::size_t i = 0; i < obs.maps.size(); ++i) maps_out[i] = static_cast<T>(obs.maps[i]);
  for (std::size_t i = 0; i < obs.orientations.size(); ++i) orientations_out[i] = static_cast<T>(obs.orientations[i]);
}

template void flatten_into<float>(const Observation&, float*, float*);
template void flatten_into<double>(const Observation&, double*, double*);

Move decode_action(int index, ActionMode mode, Orientation subordinate) {
  if (index < 0 || index >= kActionCount) throw std::out_of_range("action index out of range");
  if (index == 4) return {{0, 0}, subordinate};
  Orientation facing;
  if (mode == ActionMode::Allocentric) {
    static constexpr Orientation kAllo[4] = {Orientation::North, Orientation::South, Orientation::East,
                                             Orientation::West};
    facing = kAllo[index];
  } else {
    switch (index) {
      case 0: facing = subordinate; break;
      case 1: facing = opposite(subordinate); break;
      case 2: facing = turn_right(subordinate); break;
      default: facing = turn_left(subordinate); break;
    }
  }
  return {heading(facing), facing};
}

std::optional<int> encode_displacement(Cell displacement, ActionMode mode, Orientation subordinate) {
  for (int a = 0; a < 4; ++a)
    if (decode_action(a, mode, subordinate).displacement == displacement) return a;
  return std::nullopt;
}

}  // namespace perspective
