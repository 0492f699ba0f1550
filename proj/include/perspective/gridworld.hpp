#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "perspective/rng.hpp"

namespace perspective {

/// Compass headings, in clockwise order.
enum class Orientation : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };

inline constexpr std::array<Orientation, 4> kOrientations = {
    Orientation::North, Orientation::East, Orientation::South, Orientation::West};

constexpr Orientation turn_right(Orientation o) {
  return static_cast<Orientation>((static_cast<int>(o) + 1) % 4);
}
constexpr Orientation turn_left(Orientation o) {
  return static_cast<Orientation>((static_cast<int>(o) + 3) % 4);
}
constexpr Orientation opposite(Orientation o) {
  return static_cast<Orientation>((static_cast<int>(o) + 2) % 4);
}

const char* to_string(Orientation o);

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
  Cell operator+(Cell other) const { return {row + other.row, col + other.col}; }
  Cell operator-(Cell other) const { return {row - other.row, col - other.col}; }
};

/// Unit displacement of one step along the heading. North is decreasing row.
constexpr Cell heading(Orientation o) {
  switch (o) {
    case Orientation::North: return {-1, 0};
    case Orientation::East: return {0, 1};
    case Orientation::South: return {1, 0};
    case Orientation::West: return {0, -1};
  }
  return {0, 0};
}

/// Inverse of heading() for unit displacements.
std::optional<Orientation> orientation_of(Cell displacement);

struct AgentPose {
  int row = 0;
  int col = 0;
  Orientation orientation = Orientation::North;

  Cell cell() const { return {row, col}; }
  bool operator==(const AgentPose&) const = default;
};

struct Rect {
  int row = 0;
  int col = 0;
  int rows = 0;
  int cols = 0;

  bool contains(Cell c) const {
    return c.row >= row && c.row < row + rows && c.col >= col && c.col < col + cols;
  }
  int area() const { return rows * cols; }
  bool operator==(const Rect&) const = default;
};

struct Rewards {
  double eat_observed = -1000.0;
  double eat_unobserved = 1000.0;
  double step = -0.1;
  bool operator==(const Rewards&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WorldConfig {
  int side = 13;
  Rect spawn_region{4, 3, 5, 5};
  /// Rows of column 0 the subordinate may spawn in; empty means every row.
  std::vector<int> subordinate_rows;
  int max_steps = 100;
  Rewards rewards;
  /// Cells exactly 90 degrees off the heading count as visible.
  bool closed_fov = true;
  std::uint64_t rng_seed = 0;

  /// 13x13 world used with allocentric vision.
  static WorldConfig allocentric();
  /// 11x11 world used with egocentric vision.
  static WorldConfig egocentric();
  /// 7x7 world with a 3x3 spawn region, for runs that fit on a workstation.
  static WorldConfig desk();

  std::vector<int> spawn_rows() const;
  bool in_bounds(Cell c) const { return c.row >= 0 && c.row < side && c.col >= 0 && c.col < side; }

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;

  bool operator==(const WorldConfig&) const = default;
};

void to_json(nlohmann::json& j, const WorldConfig& c);
/// Strict: unknown keys throw ConfigError. Missing keys keep the values already in `c`.
void update_from_json(const nlohmann::json& j, WorldConfig& c);

/// Binary map of the cells inside a viewer's field of vision, row-major.
class VisibilityMask {
 public:
  VisibilityMask(int side) : side_(side), cells_(static_cast<std::size_t>(side * side), 0) {}

  int side() const { return side_; }
  bool visible(Cell c) const { return cells_[index(c)] != 0; }
  void set(Cell c, bool v) { cells_[index(c)] = v ? 1 : 0; }
  std::size_t count() const;
  const std::vector<std::uint8_t>& cells() const { return cells_; }

 private:
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row * side_ + c.col); }
  int side_;
  std::vector<std::uint8_t> cells_;
};

/// Half-plane test: the displacement to `target` has a non-negative (closed)
/// or positive (open) component along the viewer's heading. Range is unlimited.
bool in_field_of_view(const AgentPose& viewer, Cell target, bool closed = true);

VisibilityMask field_of_view(const AgentPose& viewer, int side, bool closed = true);

struct WorldState {
  AgentPose subordinate;
  AgentPose dominant;
  std::optional<Cell> food;
  int t = 0;
  bool terminal = false;

  bool operator==(const WorldState&) const = default;
};

/// Requires food to be present.
bool dominant_sees_food(const WorldConfig& config, const WorldState& state);

/// Draws an initial state: subordinate in column 0 facing East, dominant and
/// food on distinct cells of the spawn region, dominant heading uniform.
WorldState spawn(const WorldConfig& config, Rng& rng);

struct Move {
  Cell displacement;
  Orientation orientation = Orientation::North;
  bool operator==(const Move&) const = default;
};

struct StepEvents {
  bool ate = false;
  bool observed = false;  // dominant saw the food when it was eaten
  bool blocked = false;
  bool timed_out = false;
};

struct StepResult {
  WorldState state;
  double reward = 0.0;
  StepEvents events;
};

class StepError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Advances the subordinate. Blocked moves (off-grid or onto the dominant)
/// keep the position but still apply the rotation and the step cost.
StepResult step(const WorldConfig& config, const WorldState& state, Move move);

/// Fewest moves from the subordinate to the food, routing around the dominant.
int shortest_path_length(const WorldConfig& config, const WorldState& state);

/// Best achievable episode return from a freshly spawned state.
double max_episode_reward(const WorldConfig& config, const WorldState& state);

/// Stateful wrapper owning the generator, used by rollouts.
class GridWorld {
 public:
  explicit GridWorld(WorldConfig config, Rng rng);

  const WorldState& reset();
  /// Starts from a given initial state instead of sampling one.
  const WorldState& reset(const WorldState& initial);
  StepResult step(Move move);

  const WorldState& state() const { return state_; }
  const WorldConfig& config() const { return config_; }
  Rng& rng() { return rng_; }

 private:
  WorldConfig config_;
  Rng rng_;
  WorldState state_;
};

/// One line of an episode trace: {t, sub, dom, food, action, reward, terminal}.
/// Orientations are encoded as 0=N, 1=E, 2=S, 3=W. `action` is null on the
/// spawn line.
nlohmann::json trace_line(const WorldState& state, std::optional<int> action, double reward);
WorldState state_from_trace_line(const nlohmann::json& line);

}  // namespace perspective
