#include "perspective/gridworld.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace perspective {

const char* to_string(Orientation o) {
  switch (o) {
    case Orientation::North: return "N";
    case Orientation::East: return "E";
    case Orientation::South: return "S";
    case Orientation::West: return "W";
  }
  return "?";
}

std::optional<Orientation> orientation_of(Cell d) {
  for (Orientation o : kOrientations)
    if (heading(o) == d) return o;
  return std::nullopt;
}

WorldConfig WorldConfig::allocentric() {
  WorldConfig c;
  c.side = 13;
  c.spawn_region = {4, 3, 5, 5};
  return c;
}

WorldConfig WorldConfig::egocentric() {
  WorldConfig c;
  c.side = 11;
  c.spawn_region = {3, 3, 5, 5};
  return c;
}

WorldConfig WorldConfig::desk() {
  WorldConfig c;
  c.side = 7;
  c.spawn_region = {2, 2, 3, 3};
  return c;
}

std::vector<int> WorldConfig::spawn_rows() const {
  if (!subordinate_rows.empty()) return subordinate_rows;
  std::vector<int> rows(static_cast<std::size_t>(side));
  for (int r = 0; r < side; ++r) rows[static_cast<std::size_t>(r)] = r;
  return rows;
}

void WorldConfig::validate() const {
  if (side < 3) throw ConfigError("world side must be at least 3");
  const Rect& s = spawn_region;
  if (s.rows < 1 || s.cols < 1 || s.area() < 2)
    throw ConfigError("spawn region must hold at least two cells");
  if (s.row < 0 || s.col < 1 || s.row + s.rows > side || s.col + s.cols > side)
    throw ConfigError("spawn region must fit inside the grid and avoid column 0");
  std::set<int> seen;
  for (int r : subordinate_rows) {
    if (r < 0 || r >= side) throw ConfigError("subordinate spawn row outside the grid");
    if (!seen.insert(r).second) throw ConfigError("duplicate subordinate spawn row");
  }
  if (max_steps < 1) throw ConfigError("max_steps must be positive");
}

void to_json(nlohmann::json& j, const WorldConfig& c) {
  j = nlohmann::json{
      {"side", c.side},
      {"spawn_region", {c.spawn_region.row, c.spawn_region.col, c.spawn_region.rows, c.spawn_region.cols}},
      {"subordinate_rows", c.subordinate_rows},
      {"max_steps", c.max_steps},
      {"rewards",
       {{"eat_observed", c.rewards.eat_observed},
        {"eat_unobserved", c.rewards.eat_unobserved},
        {"step", c.rewards.step}}},
      {"closed_fov", c.closed_fov},
      {"rng_seed", c.rng_seed}};
}

void update_from_json(const nlohmann::json& j, WorldConfig& c) {
  if (!j.is_object()) throw ConfigError("world: expected an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "side") {
        c.side = value.get<int>();
      } else if (key == "spawn_region") {
        auto v = value.get<std::vector<int>>();
        if (v.size() != 4) throw ConfigError("world.spawn_region: expected [row, col, rows, cols]");
        c.spawn_region = {v[0], v[1], v[2], v[3]};
      } else if (key == "subordinate_rows") {
        c.subordinate_rows = value.get<std::vector<int>>();
      } else if (key == "max_steps") {
        c.max_steps = value.get<int>();
      } else if (key == "rewards") {
        if (!value.is_object()) throw ConfigError("world.rewards: expected an object");
        for (const auto& [rk, rv] : value.items()) {
          if (rk == "eat_observed") c.rewards.eat_observed = rv.get<double>();
          else if (rk == "eat_unobserved") c.rewards.eat_unobserved = rv.get<double>();
          else if (rk == "step") c.rewards.step = rv.get<double>();
          else throw ConfigError("unknown key world.rewards." + rk);
        }
      } else if (key == "closed_fov") {
        c.closed_fov = value.get<bool>();
      } else if (key == "rng_seed") {
        c.rng_seed = value.get<std::uint64_t>();
      } else {
        throw ConfigError("unknown key world." + key);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("world." + key + ": " + e.what());
    }
  }
}

std::size_t VisibilityMask::count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

bool in_field_of_view(const AgentPose& viewer, Cell target, bool closed) {
  const Cell h = heading(viewer.orientation);
  const int along = (target.row - viewer.row) * h.row + (target.col - viewer.col) * h.col;
  return closed ? along >= 0 : (along > 0 || target == viewer.cell());
}

VisibilityMask field_of_view(const AgentPose& viewer, int side, bool closed) {
  VisibilityMask mask(side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) mask.set({r, c}, in_field_of_view(viewer, {r, c}, closed));
  return mask;
}

bool dominant_sees_food(const WorldConfig& config, const WorldState& state) {
  if (!state.food) throw StepError("dominant_sees_food: food already eaten");
  return in_field_of_view(state.dominant, *state.food, config.closed_fov);
}

WorldState spawn(const WorldConfig& config, Rng& rng) {
  const std::vector<int> rows = config.spawn_rows();
  const Rect& region = config.spawn_region;
  WorldState s;
  s.subordinate = {rows[rng.uniform_index(rows.size())], 0, Orientation::East};

  const auto area = static_cast<std::size_t>(region.area());
  const std::size_t dom = rng.uniform_index(area);
  std::size_t food = rng.uniform_index(area - 1);
  if (food >= dom) ++food;
  const int cols = region.cols;
  s.dominant = {region.row + static_cast<int>(dom) / cols, region.col + static_cast<int>(dom) % cols,
                kOrientations[rng.uniform_index(4)]};
  s.food = Cell{region.row + static_cast<int>(food) / cols, region.col + static_cast<int>(food) % cols};
  return s;
}

StepResult step(const WorldConfig& config, const WorldState& state, Move move) {
  if (state.terminal) throw StepError("step called on a terminal state");
  const Cell d = move.displacement;
  if (std::abs(d.row) + std::abs(d.col) > 1) throw StepError("displacement must be a single axis-aligned cell");
  if (d != Cell{0, 0} && orientation_of(d) != move.orientation)
    throw StepError("moving actions must face the direction of travel");

  StepResult out;
  out.state = state;
  WorldState& s = out.state;
  if (d != Cell{0, 0}) {
    s.subordinate.orientation = move.orientation;
    const Cell target = s.subordinate.cell() + d;
    if (!config.in_bounds(target) || target == s.dominant.cell()) {
      out.events.blocked = true;
    } else {
      s.subordinate.row = target.row;
      s.subordinate.col = target.col;
    }
  }

  out.reward = config.rewards.step;
  if (s.food && s.subordinate.cell() == *s.food) {
    out.events.ate = true;
    out.events.observed = dominant_sees_food(config, s);
    out.reward += out.events.observed ? config.rewards.eat_observed : config.rewards.eat_unobserved;
    s.food.reset();
    s.terminal = true;
  }
  s.t += 1;
  if (s.t >= config.max_steps && !s.terminal) {
    out.events.timed_out = true;
    s.terminal = true;
  }
  return out;
}

int shortest_path_length(const WorldConfig& /*config*/, const WorldState& state) {
  if (!state.food) throw StepError("shortest_path_length: no food");
  const Cell from = state.subordinate.cell();
  const Cell to = *state.food;
  const Cell block = state.dominant.cell();
  int distance = std::abs(to.row - from.row) + std::abs(to.col - from.col);
  // A single blocked cell only lengthens the path when it sits strictly
  // between two aligned endpoints; the detour costs two extra moves.
  const bool same_row = from.row == to.row && block.row == from.row &&
                        block.col > std::min(from.col, to.col) && block.col < std::max(from.col, to.col);
  const bool same_col = from.col == to.col && block.col == from.col &&
                        block.row > std::min(from.row, to.row) && block.row < std::max(from.row, to.row);
  if (same_row || same_col) distance += 2;
  return distance;
}

double max_episode_reward(const WorldConfig& config, const WorldState& state) {
  // Accumulated step by step, in the same order as an episode return, so an
  // optimal episode matches this value bit for bit.
  double timeout = 0.0;
  for (int i = 0; i < config.max_steps; ++i) timeout += config.rewards.step;
  if (dominant_sees_food(config, state)) return timeout;
  const int k = shortest_path_length(config, state);
  if (k > config.max_steps) return timeout;
  double eat = 0.0;
  for (int i = 1; i < k; ++i) eat += config.rewards.step;
  eat += config.rewards.step + config.rewards.eat_unobserved;
  return std::max(eat, timeout);
}

GridWorld::GridWorld(WorldConfig config, Rng rng) : config_(std::move(config)), rng_(rng) {
  config_.validate();
}

const WorldState& GridWorld::reset() {
  state_ = spawn(config_, rng_);
  return state_;
}

const WorldState& GridWorld::reset(const WorldState& initial) {
  state_ = initial;
  return state_;
}

StepResult GridWorld::step(Move move) {
  StepResult r = perspective::step(config_, state_, move);
  state_ = r.state;
  return r;
}

namespace {
nlohmann::json pose_json(const AgentPose& p) {
  return nlohmann::json::array({p.row, p.col, static_cast<int>(p.orientation)});
}
AgentPose pose_from(const nlohmann::json& j) {
  const int o = j.at(2).get<int>();
  if (o < 0 || o > 3) throw std::invalid_argument("trace: orientation out of range");
  return {j.at(0).get<int>(), j.at(1).get<int>(), static_cast<Orientation>(o)};
}
}  // namespace

nlohmann::json trace_line(const WorldState& state, std::optional<int> action, double reward) {
  nlohmann::json j;
  j["t"] = state.t;
  j["sub"] = pose_json(state.subordinate);
  j["dom"] = pose_json(state.dominant);
  j["food"] = state.food ? nlohmann::json::array({state.food->row, state.food->col}) : nlohmann::json(nullptr);
  j["action"] = action ? nlohmann::json(*action) : nlohmann::json(nullptr);
  j["reward"] = reward;
  j["terminal"] = state.terminal;
  return j;
}

WorldState state_from_trace_line(const nlohmann::json& line) {
  WorldState s;
  s.t = line.at("t").get<int>();
  s.subordinate = pose_from(line.at("sub"));
  s.dominant = pose_from(line.at("dom"));
  const auto& food = line.at("food");
  if (!food.is_null()) s.food = Cell{food.at(0).get<int>(), food.at(1).get<int>()};
  s.terminal = line.at("terminal").get<bool>();
  return s;
}

}  // namespace perspective
