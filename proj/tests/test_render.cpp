#include <doctest.h>

#include "perspective/render.hpp"

using namespace perspective;

namespace {

struct StayAgent : Agent {
  int act(const Observation&, const WorldState&) override { return 4; }
};

std::size_t occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("an idle episode draws one marker per step") {
  const WorldConfig w = WorldConfig::egocentric();
  const InitialConfig c = enumerate_initial_configs(w)[5000];
  StayAgent agent;
  const EpisodeRecord e = rollout(agent, w, VisualMode::Egocentric, ActionMode::Egocentric, c.state());
  REQUIRE(e.steps == 100);
  const std::string svg = render_svg(e, "idle <test>");
  CHECK(occurrences(svg, "class=\"step\"") == 100);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("idle &lt;test&gt;") != std::string::npos);
  CHECK(svg == render_svg(e, "idle <test>"));
}

TEST_CASE("trace JSON lines round trip") {
  const WorldConfig w = WorldConfig::desk();
  OracleAgent agent(w, ActionMode::Allocentric);
  const InitialConfig c = enumerate_initial_configs(w)[77];
  const EpisodeRecord e = rollout(agent, w, VisualMode::Allocentric, ActionMode::Allocentric, c.state());
  const std::string jsonl = trace_to_jsonl(e.trace);
  CHECK(parse_trace(jsonl) == e.trace);
  CHECK(render_svg(parse_trace(jsonl), w) == render_svg(e.trace, w));
}

TEST_CASE("malformed traces are rejected") {
  const WorldConfig w = WorldConfig::desk();
  CHECK_THROWS_AS(parse_trace("{\"t\": 0\nnot json\n"), RenderError);
  CHECK_THROWS_AS(render_svg(std::vector<nlohmann::json>{}, w), RenderError);

  RandomAgent agent{Rng(2)};
  const EpisodeRecord e =
      rollout(agent, w, VisualMode::Egocentric, ActionMode::Egocentric, enumerate_initial_configs(w)[9].state());
  REQUIRE(e.trace.size() > 2);

  auto broken = e.trace;
  broken[1]["t"] = 5;
  CHECK_THROWS_AS(render_svg(broken, w), RenderError);
  broken = e.trace;
  broken[1].erase("sub");
  CHECK_THROWS_AS(render_svg(broken, w), RenderError);
  broken = e.trace;
  broken[1]["dom"] = broken[0]["sub"];
  CHECK_THROWS_AS(render_svg(broken, w), RenderError);
  broken = e.trace;
  broken[0]["food"] = nullptr;
  CHECK_THROWS_AS(render_svg(broken, w), RenderError);
  CHECK_THROWS_AS(render_svg(e.trace, WorldConfig{.side = 2, .spawn_region = {0, 0, 1, 1}}), RenderError);
}
