#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perspective/gridworld.hpp"

namespace perspective {

enum class VisualMode : std::uint8_t { Allocentric = 0, Egocentric = 1 };
enum class ActionMode : std::uint8_t { Allocentric = 0, Egocentric = 1 };

inline constexpr int kActionCount = 5;

std::string to_string(VisualMode m);
std::string to_string(ActionMode m);
/// Accepts "allo"/"allocentric" and "ego"/"egocentric".
VisualMode parse_visual_mode(const std::string& s);
ActionMode parse_action_mode(const std::string& s);

enum class RelativeOrientation : std::uint8_t {
  TowardAgent = 0,
  SameDirection = 1,
  ToItsLeft = 2,
  ToItsRight = 3,
};

RelativeOrientation relative_orientation(Orientation sub, Orientation dom);

/// Index of an absolute orientation in the allocentric one-hot, ordered
/// (North, South, East, West).
int allocentric_orientation_slot(Orientation o);

struct ObservationShape {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  int orientation_dim = 0;

  std::size_t map_size() const { return static_cast<std::size_t>(channels * rows * cols); }
  std::size_t flat_size() const { return map_size() + static_cast<std::size_t>(orientation_dim); }
  bool operator==(const ObservationShape&) const = default;
};

/// Allocentric: 4 maps of side x side (subordinate, dominant, food,
/// observability) plus two orientation one-hots (subordinate, dominant).
/// Egocentric: 3 maps of side x (2 side - 1) (dominant, food, observability)
/// plus the dominant's relative orientation.
ObservationShape observation_shape(VisualMode mode, int side);

/// Binary maps stored channel-major, then row, then column.
struct Observation {
  VisualMode mode = VisualMode::Allocentric;
  ObservationShape shape;
  std::vector<std::uint8_t> maps;
  std::vector<std::uint8_t> orientations;

  std::uint8_t at(int channel, int row, int col) const {
    return maps[static_cast<std::size_t>((channel * shape.rows + row) * shape.cols + col)];
  }
  std::uint8_t& at(int channel, int row, int col) {
    return maps[static_cast<std::size_t>((channel * shape.rows + row) * shape.cols + col)];
  }
  bool operator==(const Observation&) const = default;
};

namespace channel {
inline constexpr int kAlloSubordinate = 0;
inline constexpr int kAlloDominant = 1;
inline constexpr int kAlloFood = 2;
inline constexpr int kAlloObservable = 3;
inline constexpr int kEgoDominant = 0;
inline constexpr int kEgoFood = 1;
inline constexpr int kEgoObservable = 2;
}  // namespace channel

Observation encode_allocentric(const WorldConfig& config, const WorldState& state);
Observation encode_egocentric(const WorldConfig& config, const WorldState& state);
Observation encode(VisualMode mode, const WorldConfig& config, const WorldState& state);

/// Map cell of `target` in the egocentric frame of `viewer`, for a world of
/// the given side. The viewer sits at (side-1, side-1) facing decreasing rows.
Cell egocentric_cell(const AgentPose& viewer, Cell target, int side);

/// Writes the observation as flat values (maps, then orientations).
template <typename T>
void flatten_into(const Observation& obs, T* maps_out, T* orientations_out);

/// Action index to a world move.
/// Allocentric: 0 North, 1 South, 2 East, 3 West, 4 stay.
/// Egocentric: 0 forward, 1 backward, 2 right, 3 left, 4 stay.
Move decode_action(int index, ActionMode mode, Orientation subordinate);

/// Inverse of decode_action for moving actions; nullopt for a zero displacement.
std::optional<int> encode_displacement(Cell displacement, ActionMode mode, Orientation subordinate);

}  // namespace perspective
