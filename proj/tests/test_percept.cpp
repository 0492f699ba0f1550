#include <doctest.h>

#include <set>

#include "perspective/percept.hpp"

using namespace perspective;

namespace {

WorldState random_state(const WorldConfig& world, Rng& rng, bool with_food = true) {
  auto cell = [&] {
    return Cell{static_cast<int>(rng.uniform_index(static_cast<std::size_t>(world.side))),
                static_cast<int>(rng.uniform_index(static_cast<std::size_t>(world.side)))};
  };
  WorldState s;
  const Cell sc = cell();
  s.subordinate = {sc.row, sc.col, kOrientations[rng.uniform_index(4)]};
  Cell dc;
  do dc = cell();
  while (dc == sc);
  s.dominant = {dc.row, dc.col, kOrientations[rng.uniform_index(4)]};
  if (with_food) {
    Cell fc;
    do fc = cell();
    while (fc == dc || fc == sc);
    s.food = fc;
  }
  return s;
}

int map_sum(const Observation& obs, int ch) {
  int n = 0;
  for (int r = 0; r < obs.shape.rows; ++r)
    for (int c = 0; c < obs.shape.cols; ++c) n += obs.at(ch, r, c);
  return n;
}

// Rotates a cell a quarter turn clockwise about the centre of an odd square grid.
Cell rotate_cw(Cell c, int side) { return {c.col, side - 1 - c.row}; }

}  // namespace

TEST_CASE("observation shapes") {
  CHECK(observation_shape(VisualMode::Allocentric, 13) == ObservationShape{4, 13, 13, 8});
  CHECK(observation_shape(VisualMode::Egocentric, 11) == ObservationShape{3, 11, 21, 4});
  CHECK(observation_shape(VisualMode::Egocentric, 7) == ObservationShape{3, 7, 13, 4});
}

TEST_CASE("relative orientation table") {
  CHECK(relative_orientation(Orientation::East, Orientation::East) == RelativeOrientation::SameDirection);
  CHECK(relative_orientation(Orientation::East, Orientation::West) == RelativeOrientation::TowardAgent);
  CHECK(relative_orientation(Orientation::North, Orientation::South) == RelativeOrientation::TowardAgent);
  CHECK(relative_orientation(Orientation::North, Orientation::East) == RelativeOrientation::ToItsRight);
  CHECK(relative_orientation(Orientation::North, Orientation::West) == RelativeOrientation::ToItsLeft);
  for (Orientation sub : kOrientations) {
    std::set<RelativeOrientation> seen;
    for (Orientation dom : kOrientations) seen.insert(relative_orientation(sub, dom));
    CHECK(seen.size() == 4);
    // Rotating both agents together leaves the relation unchanged.
    for (Orientation dom : kOrientations)
      CHECK(relative_orientation(turn_right(sub), turn_right(dom)) == relative_orientation(sub, dom));
  }
}

TEST_CASE("allocentric encoding") {
  const WorldConfig world = WorldConfig::allocentric();
  SUBCASE("at spawn everything is visible") {
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
      const WorldState s = spawn(world, rng);
      const Observation obs = encode_allocentric(world, s);
      CHECK(map_sum(obs, channel::kAlloObservable) == 169);
      CHECK(obs.at(channel::kAlloSubordinate, s.subordinate.row, 0) == 1);
      CHECK(obs.at(channel::kAlloDominant, s.dominant.row, s.dominant.col) == 1);
      CHECK(obs.at(channel::kAlloFood, s.food->row, s.food->col) == 1);
      CHECK(obs.orientations[static_cast<std::size_t>(allocentric_orientation_slot(Orientation::East))] == 1);
      CHECK(obs.orientations[4 + static_cast<std::size_t>(allocentric_orientation_slot(s.dominant.orientation))] ==
            1);
    }
  }
  SUBCASE("an entity behind the subordinate is hidden") {
    WorldState s;
    s.subordinate = {6, 8, Orientation::East};
    s.dominant = {6, 3, Orientation::North};
    s.food = Cell{2, 2};
    const Observation obs = encode_allocentric(world, s);
    CHECK(map_sum(obs, channel::kAlloDominant) == 0);
    CHECK(map_sum(obs, channel::kAlloFood) == 0);
    for (std::size_t i = 4; i < 8; ++i) CHECK(obs.orientations[i] == 0);
  }
}

TEST_CASE("egocentric encoding examples") {
  const WorldConfig world = WorldConfig::egocentric();
  WorldState s;
  s.subordinate = {5, 3, Orientation::East};
  s.dominant = {9, 9, Orientation::North};
  s.food = Cell{5, 4};
  const Observation obs = encode_egocentric(world, s);
  CHECK(obs.at(channel::kEgoFood, 9, 10) == 1);
  CHECK(map_sum(obs, channel::kEgoFood) == 1);
  CHECK(obs.at(channel::kEgoObservable, 10, 10) == 1);

  s.subordinate = {8, 5, Orientation::North};
  s.dominant = {2, 5, Orientation::South};
  const Observation toward = encode_egocentric(world, s);
  CHECK(toward.orientations[static_cast<std::size_t>(RelativeOrientation::TowardAgent)] == 1);
  CHECK(toward.at(channel::kEgoDominant, 4, 10) == 1);
}

TEST_CASE("encodings mask entities by observability") {
  for (const WorldConfig& world : {WorldConfig::allocentric(), WorldConfig::egocentric(), WorldConfig::desk()}) {
    Rng rng(77);
    for (int i = 0; i < 10000; ++i) {
      const WorldState s = random_state(world, rng, i % 7 != 0);
      for (VisualMode mode : {VisualMode::Allocentric, VisualMode::Egocentric}) {
        const Observation obs = encode(mode, world, s);
        const int obs_ch = mode == VisualMode::Allocentric ? channel::kAlloObservable : channel::kEgoObservable;
        for (int ch = 0; ch < obs.shape.channels; ++ch) {
          if (ch == obs_ch) continue;
          REQUIRE(map_sum(obs, ch) <= 1);
          for (int r = 0; r < obs.shape.rows; ++r)
            for (int c = 0; c < obs.shape.cols; ++c)
              if (obs.at(ch, r, c)) REQUIRE(obs.at(obs_ch, r, c) == 1);
        }
        const int dom_ch = mode == VisualMode::Allocentric ? channel::kAlloDominant : channel::kEgoDominant;
        const std::size_t first = mode == VisualMode::Allocentric ? 4 : 0;
        int bits = 0;
        for (std::size_t k = first; k < first + 4; ++k) bits += obs.orientations[k];
        REQUIRE(bits == map_sum(obs, dom_ch));
        // The observable region is exactly the field of view.
        REQUIRE(map_sum(obs, obs_ch) == static_cast<int>(field_of_view(s.subordinate, world.side).count()));
      }
    }
  }
}

TEST_CASE("egocentric encoding is invariant to co-rotating the scene") {
  // The subordinate sits in the centre so rotations map the grid onto itself.
  const WorldConfig world = WorldConfig::egocentric();
  const int side = world.side;
  const Cell centre{side / 2, side / 2};
  Rng rng(9);
  int checked = 0;
  for (Orientation o : kOrientations)
    for (int d = 0; d < side * side; ++d)
      for (Orientation dom_o : kOrientations) {
        const Cell dc{d / side, d % side};
        if (dc == centre) continue;
        Cell fc;
        do fc = {static_cast<int>(rng.uniform_index(11)), static_cast<int>(rng.uniform_index(11))};
        while (fc == dc || fc == centre);
        WorldState s;
        s.subordinate = {centre.row, centre.col, o};
        s.dominant = {dc.row, dc.col, dom_o};
        s.food = fc;
        const Observation base = encode_egocentric(world, s);
        WorldState r = s;
        for (int k = 0; k < 4; ++k) {
          r.subordinate.orientation = turn_right(r.subordinate.orientation);
          const Cell nd = rotate_cw(r.dominant.cell(), side);
          r.dominant = {nd.row, nd.col, turn_right(r.dominant.orientation)};
          r.food = rotate_cw(*r.food, side);
          REQUIRE(encode_egocentric(world, r) == base);
          ++checked;
        }
      }
  CHECK(checked == 4 * (side * side - 1) * 4 * 4);
}

TEST_CASE("full-visibility encodings determine each other") {
  // Subordinate in column 0 facing East sees the whole grid.
  const WorldConfig world = WorldConfig::egocentric();
  const int side = world.side;
  Rng rng(31);
  for (int i = 0; i < 10000; ++i) {
    WorldState s = random_state(world, rng);
    s.subordinate = {static_cast<int>(rng.uniform_index(11)), 0, Orientation::East};
    if (s.dominant.cell() == s.subordinate.cell() || *s.food == s.subordinate.cell()) continue;
    const Observation ego = encode_egocentric(world, s);
    const Observation allo = encode_allocentric(world, s);

    // ego + pose -> allo
    Observation rebuilt;
    rebuilt.mode = VisualMode::Allocentric;
    rebuilt.shape = allo.shape;
    rebuilt.maps.assign(allo.maps.size(), 0);
    rebuilt.orientations.assign(8, 0);
    const Cell h = heading(s.subordinate.orientation);
    const Cell right{h.col, -h.row};
    for (int mr = 0; mr < ego.shape.rows; ++mr)
      for (int mc = 0; mc < ego.shape.cols; ++mc) {
        const int fwd = side - 1 - mr, lat = mc - (side - 1);
        const Cell w{s.subordinate.row + fwd * h.row + lat * right.row,
                     s.subordinate.col + fwd * h.col + lat * right.col};
        if (ego.at(channel::kEgoObservable, mr, mc)) rebuilt.at(channel::kAlloObservable, w.row, w.col) = 1;
        if (ego.at(channel::kEgoDominant, mr, mc)) rebuilt.at(channel::kAlloDominant, w.row, w.col) = 1;
        if (ego.at(channel::kEgoFood, mr, mc)) rebuilt.at(channel::kAlloFood, w.row, w.col) = 1;
      }
    rebuilt.at(channel::kAlloSubordinate, s.subordinate.row, s.subordinate.col) = 1;
    rebuilt.orientations[static_cast<std::size_t>(allocentric_orientation_slot(s.subordinate.orientation))] = 1;
    for (Orientation o : kOrientations)
      if (ego.orientations[static_cast<std::size_t>(relative_orientation(s.subordinate.orientation, o))])
        rebuilt.orientations[4 + static_cast<std::size_t>(allocentric_orientation_slot(o))] = 1;
    REQUIRE(rebuilt == allo);

    // allo -> ego
    Observation back;
    back.mode = VisualMode::Egocentric;
    back.shape = ego.shape;
    back.maps.assign(ego.maps.size(), 0);
    back.orientations.assign(4, 0);
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) {
        const Cell m = egocentric_cell(s.subordinate, {r, c}, side);
        if (allo.at(channel::kAlloObservable, r, c)) back.at(channel::kEgoObservable, m.row, m.col) = 1;
        if (allo.at(channel::kAlloDominant, r, c)) back.at(channel::kEgoDominant, m.row, m.col) = 1;
        if (allo.at(channel::kAlloFood, r, c)) back.at(channel::kEgoFood, m.row, m.col) = 1;
      }
    for (Orientation o : kOrientations)
      if (allo.orientations[4 + static_cast<std::size_t>(allocentric_orientation_slot(o))])
        back.orientations[static_cast<std::size_t>(relative_orientation(s.subordinate.orientation, o))] = 1;
    REQUIRE(back == ego);
  }
}

TEST_CASE("action decoding") {
  for (Orientation o : kOrientations) {
    const Move north = decode_action(0, ActionMode::Allocentric, o);
    CHECK(north.displacement == Cell{-1, 0});
    CHECK(north.orientation == Orientation::North);
    CHECK(decode_action(4, ActionMode::Allocentric, o) == Move{{0, 0}, o});
    CHECK(decode_action(4, ActionMode::Egocentric, o) == Move{{0, 0}, o});
    for (ActionMode mode : {ActionMode::Allocentric, ActionMode::Egocentric}) {
      std::set<std::pair<int, int>> displacements;
      for (int a = 0; a < kActionCount; ++a) {
        const Move m = decode_action(a, mode, o);
        displacements.insert({m.displacement.row, m.displacement.col});
        if (a < 4) {
          CHECK(heading(m.orientation) == m.displacement);
          CHECK(encode_displacement(m.displacement, mode, o) == a);
        }
      }
      CHECK(displacements.size() == 5);
    }
  }
  CHECK(decode_action(0, ActionMode::Egocentric, Orientation::West) == Move{{0, -1}, Orientation::West});
  CHECK(decode_action(1, ActionMode::Egocentric, Orientation::North) == Move{{1, 0}, Orientation::South});
  CHECK(decode_action(2, ActionMode::Egocentric, Orientation::North) == Move{{0, 1}, Orientation::East});
  CHECK(decode_action(3, ActionMode::Egocentric, Orientation::North) == Move{{0, -1}, Orientation::West});
  CHECK(decode_action(1, ActionMode::Allocentric, Orientation::East) == Move{{1, 0}, Orientation::South});
  CHECK(decode_action(2, ActionMode::Allocentric, Orientation::West) == Move{{0, 1}, Orientation::East});
  CHECK_THROWS(decode_action(5, ActionMode::Egocentric, Orientation::North));
  CHECK_FALSE(encode_displacement({0, 0}, ActionMode::Egocentric, Orientation::North).has_value());
}

TEST_CASE("mode names parse") {
  CHECK(parse_visual_mode("ego") == VisualMode::Egocentric);
  CHECK(parse_visual_mode("allocentric") == VisualMode::Allocentric);
  CHECK(parse_action_mode("allo") == ActionMode::Allocentric);
  CHECK_THROWS_AS(parse_visual_mode("sideways"), ConfigError);
}

TEST_CASE("flatten writes maps then orientations") {
  Rng rng(2);
  const WorldConfig world = WorldConfig::desk();
  const Observation obs = encode_egocentric(world, spawn(world, rng));
  std::vector<double> maps(obs.maps.size()), orient(obs.orientations.size());
  flatten_into(obs, maps.data(), orient.data());
  for (std::size_t i = 0; i < maps.size(); ++i) CHECK(maps[i] == obs.maps[i]);
  for (std::size_t i = 0; i < orient.size(); ++i) CHECK(orient[i] == obs.orientations[i]);
}
