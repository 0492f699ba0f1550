#include "perspective/analysis.hpp"

#include <array>
#include <deque>
#include <sstream>

namespace perspective {

WorldState InitialConfig::state() const {
  WorldState s;
  s.subordinate = {subordinate_row, 0, Orientation::East};
  s.dominant = dominant;
  s.food = food;
  return s;
}

std::vector<InitialConfig> enumerate_initial_configs(const WorldConfig& world) {
  world.validate();
  const Rect& r = world.spawn_region;
  std::vector<InitialConfig> out;
  out.reserve(initial_config_count(world));
  for (int row : world.spawn_rows())
    for (int dr = r.row; dr < r.row + r.rows; ++dr)
      for (int dc = r.col; dc < r.col + r.cols; ++dc)
        for (Orientation o : kOrientations)
          for (int fr = r.row; fr < r.row + r.rows; ++fr)
            for (int fc = r.col; fc < r.col + r.cols; ++fc) {
              if (fr == dr && fc == dc) continue;
              InitialConfig c;
              c.id = out.size();
              c.subordinate_row = row;
              c.dominant = {dr, dc, o};
              c.food = {fr, fc};
              c.label = dominant_sees_food(world, c.state());
              out.push_back(c);
            }
  return out;
}

std::size_t initial_config_count(const WorldConfig& world) {
  const auto area = static_cast<std::size_t>(world.spawn_region.area());
  return world.spawn_rows().size() * area * 4 * (area - 1);
}

GreedyNetworkAgent::GreedyNetworkAgent(NetworkSpec spec, const ParamSet<float>& params)
    : spec_(std::move(spec)), params_(params), state_(LstmState<float>::zeros(spec_.lstm_cells)) {
  std::vector<std::pair<std::string, std::vector<int>>> shapes;
  for (const auto& [name, t] : params_) shapes.emplace_back(name, t.shape());
  check_param_layout(spec_, shapes);
}

void GreedyNetworkAgent::begin_episode(std::uint64_t) { state_ = LstmState<float>::zeros(spec_.lstm_cells); }

int GreedyNetworkAgent::act(const Observation& obs, const WorldState&) {
  QOutput<float> q = q_values(spec_, params_, obs, state_);
  state_ = std::move(q.state);
  return greedy_action(std::span<const float>(q.q));
}

std::optional<Cell> shortest_path_step(const WorldConfig& world, const WorldState& state) {
  if (!state.food) return std::nullopt;
  const Cell start = state.subordinate.cell();
  const Cell goal = *state.food;
  if (start == goal) return std::nullopt;
  const int n = world.side;
  auto idx = [n](Cell c) { return static_cast<std::size_t>(c.row * n + c.col); };
  // Search backwards from the goal so the first move can be read off directly.
  std::vector<int> dist(static_cast<std::size_t>(n * n), -1);
  std::deque<Cell> queue{goal};
  dist[idx(goal)] = 0;
  const Cell block = state.dominant.cell();
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (Orientation o : kOrientations) {
      const Cell next = c + heading(o);
      if (!world.in_bounds(next) || next == block || dist[idx(next)] >= 0) continue;
      dist[idx(next)] = dist[idx(c)] + 1;
      queue.push_back(next);
    }
  }
  if (dist[idx(start)] < 0) return std::nullopt;
  // Fixed N, E, S, W preference among equally short first moves.
  for (Orientation o : kOrientations) {
    const Cell next = start + heading(o);
    if (world.in_bounds(next) && next != block && dist[idx(next)] == dist[idx(start)] - 1) return heading(o);
  }
  return std::nullopt;
}

int OracleAgent::act(const Observation&, const WorldState& state) {
  if (!state.food || dominant_sees_food(world_, state)) return 4;
  const std::optional<Cell> move = shortest_path_step(world_, state);
  if (!move) return 4;
  return encode_displacement(*move, action_, state.subordinate.orientation).value();
}

int RandomAgent::act(const Observation&, const WorldState&) {
  return static_cast<int>(rng_.uniform_index(kActionCount));
}

EpisodeRecord rollout(Agent& agent, const WorldConfig& world, VisualMode vision, ActionMode action,
                      const WorldState& initial, bool keep_trace, std::uint64_t episode) {
  EpisodeRecord rec;
  rec.config_id = static_cast<std::size_t>(episode);
  rec.vision = vision;
  rec.action = action;
  rec.world = world;
  WorldState s = initial;
  if (keep_trace) rec.trace.push_back(trace_line(s, std::nullopt, 0.0));
  agent.begin_episode(episode);
  while (!s.terminal) {
    const Observation obs = encode(vision, world, s);
    const int a = agent.act(obs, s);
    StepResult r = step(world, s, decode_action(a, action, s.subordinate.orientation));
    s = r.state;
    rec.total_reward += r.reward;
    rec.ate = rec.ate || r.events.ate;
    rec.steps += 1;
    if (keep_trace) rec.trace.push_back(trace_line(s, a, r.reward));
  }
  return rec;
}

double BehaviorReport::pct_correct_when_should_eat() const {
  return eat_trials == 0 ? 0.0 : 100.0 * static_cast<double>(eat_correct) / static_cast<double>(eat_trials);
}

double BehaviorReport::pct_correct_when_should_avoid() const {
  return avoid_trials == 0 ? 0.0 : 100.0 * static_cast<double>(avoid_correct) / static_cast<double>(avoid_trials);
}

BehaviorReport evaluate_behavior(Agent& agent, const WorldConfig& world, VisualMode vision, ActionMode action,
                                 const std::vector<InitialConfig>& configs) {
  BehaviorReport report;
  report.outcomes.reserve(configs.size());
  for (const InitialConfig& c : configs) {
    const EpisodeRecord rec = rollout(agent, world, vision, action, c.state(), false, c.id);
    TrialOutcome o;
    o.config_id = c.id;
    o.label = c.label;
    o.ate = rec.ate;
    o.steps = rec.steps;
    o.reward = rec.total_reward;
    o.correct = c.label ? !rec.ate : rec.ate;
    if (c.label) {
      report.avoid_trials += 1;
      report.avoid_correct += o.correct;
    } else {
      report.eat_trials += 1;
      report.eat_correct += o.correct;
    }
    report.outcomes.push_back(o);
  }
  return report;
}

BehaviorReport evaluate_behavior(const NetworkSpec& spec, const ParamSet<float>& params, const WorldConfig& world,
                                 VisualMode vision, ActionMode action) {
  if (spec.input != observation_shape(vision, world.side))
    throw ShapeError("network input does not match " + to_string(vision) + " vision on a " +
                     std::to_string(world.side) + "x" + std::to_string(world.side) + " world");
  GreedyNetworkAgent agent(spec, params);
  return evaluate_behavior(agent, world, vision, action, enumerate_initial_configs(world));
}

nlohmann::json to_json(const BehaviorReport& r) {
  return {{"eat_trials", r.eat_trials},
          {"eat_correct", r.eat_correct},
          {"avoid_trials", r.avoid_trials},
          {"avoid_correct", r.avoid_correct},
          {"pct_correct_when_should_eat", r.pct_correct_when_should_eat()},
          {"pct_correct_when_should_avoid", r.pct_correct_when_should_avoid()}};
}

std::string outcomes_csv(const BehaviorReport& r) {
  std::ostringstream os;
  os << "config_id,label,ate,steps,reward,correct\n";
  os.precision(17);
  for (const TrialOutcome& o : r.outcomes)
    os << o.config_id << ',' << int(o.label) << ',' << int(o.ate) << ',' << o.steps << ',' << o.reward << ','
       << int(o.correct) << '\n';
  return os.str();
}

std::vector<std::pair<std::string, std::size_t>> select_quartet(const BehaviorReport& r) {
  struct Slot {
    const char* name;
    bool label;
    bool correct;
  };
  static constexpr std::array<Slot, 4> kSlots = {{{"approach-correct", false, true},
                                                  {"approach-wrong", false, false},
                                                  {"avoid-correct", true, true},
                                                  {"avoid-wrong", true, false}}};
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const Slot& slot : kSlots)
    for (const TrialOutcome& o : r.outcomes)
      if (o.label == slot.label && o.correct == slot.correct) {
        out.emplace_back(slot.name, o.config_id);
        break;
      }
  return out;
}

}  // namespace perspective
