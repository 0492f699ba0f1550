#include "perspective/render.hpp"

#include <sstream>

namespace perspective {

namespace {

constexpr int kCell = 40;
constexpr int kMargin = 20;
constexpr int kTitle = 24;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Centre of a cell in pixels.
int cx(Cell c) { return kMargin + c.col * kCell + kCell / 2; }
int cy(Cell c, int top) { return top + c.row * kCell + kCell / 2; }

void agent_glyph(std::ostringstream& os, const AgentPose& p, int top, const char* fill, const char* label) {
  const int x = cx(p.cell()), y = cy(p.cell(), top);
  const Cell h = heading(p.orientation);
  const int r = kCell / 2 - 6;
  os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << r << "\" fill=\"" << fill
     << "\" stroke=\"#222\" stroke-width=\"1\"/>\n";
  os << "<line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << x + h.col * (r + 4) << "\" y2=\"" << y + h.row * (r + 4)
     << "\" stroke=\"#222\" stroke-width=\"3\"/>\n";
  os << "<text x=\"" << x << "\" y=\"" << y + 4 << "\" font-size=\"11\" text-anchor=\"middle\" fill=\"#fff\">" << label
     << "</text>\n";
}

}  // namespace

std::vector<nlohmann::json> parse_trace(const std::string& jsonl) {
  std::vector<nlohmann::json> out;
  std::istringstream is(jsonl);
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw RenderError("trace line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string trace_to_jsonl(const std::vector<nlohmann::json>& trace) {
  std::string out;
  for (const auto& line : trace) out += line.dump() + "\n";
  return out;
}

std::string render_svg(const std::vector<nlohmann::json>& trace, const WorldConfig& world, const std::string& title) {
  if (trace.empty()) throw RenderError("empty trace");
  std::vector<WorldState> states;
  states.reserve(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    WorldState s;
    try {
      s = state_from_trace_line(trace[i]);
    } catch (const nlohmann::json::exception& e) {
      throw RenderError("trace line " + std::to_string(i + 1) + ": " + e.what());
    }
    if (s.t != static_cast<int>(i)) throw RenderError("trace line " + std::to_string(i + 1) + " has t=" + std::to_string(s.t));
    if (!world.in_bounds(s.subordinate.cell()) || !world.in_bounds(s.dominant.cell()) ||
        (s.food && !world.in_bounds(*s.food)))
      throw RenderError("trace line " + std::to_string(i + 1) + " places something off the grid");
    if (i > 0 && !(s.dominant == states.front().dominant)) throw RenderError("the dominant moved during the episode");
    states.push_back(s);
  }
  const WorldState& first = states.front();
  const WorldState& last = states.back();
  if (!first.food) throw RenderError("the spawn line has no food");

  const int top = kMargin + kTitle;
  const int size = world.side * kCell;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * kMargin << "\" height=\""
     << size + 2 * kMargin + kTitle << "\" viewBox=\"0 0 " << size + 2 * kMargin << ' ' << size + 2 * kMargin + kTitle
     << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  os << "<text x=\"" << kMargin << "\" y=\"" << kMargin + 4 << "\" font-size=\"14\" font-family=\"sans-serif\">"
     << escape(title.empty() ? "episode" : title) << " (" << states.size() - 1 << " steps"
     << (last.food ? "" : ", food eaten") << ")</text>\n";

  // Dominant field of view, then spawn region, then grid lines.
  const VisibilityMask fov = field_of_view(first.dominant, world.side, world.closed_fov);
  for (int r = 0; r < world.side; ++r)
    for (int c = 0; c < world.side; ++c)
      if (fov.visible({r, c}))
        os << "<rect x=\"" << kMargin + c * kCell << "\" y=\"" << top + r * kCell << "\" width=\"" << kCell
           << "\" height=\"" << kCell << "\" fill=\"#fde2e2\"/>\n";
  const Rect& sr = world.spawn_region;
  os << "<rect x=\"" << kMargin + sr.col * kCell << "\" y=\"" << top + sr.row * kCell << "\" width=\""
     << sr.cols * kCell << "\" height=\"" << sr.rows * kCell
     << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"2\" stroke-dasharray=\"6 4\"/>\n";
  for (int i = 0; i <= world.side; ++i) {
    os << "<line x1=\"" << kMargin << "\" y1=\"" << top + i * kCell << "\" x2=\"" << kMargin + size << "\" y2=\""
       << top + i * kCell << "\" stroke=\"#ccc\" stroke-width=\"1\"/>\n";
    os << "<line x1=\"" << kMargin + i * kCell << "\" y1=\"" << top << "\" x2=\"" << kMargin + i * kCell << "\" y2=\""
       << top + size << "\" stroke=\"#ccc\" stroke-width=\"1\"/>\n";
  }

  // Path: a polyline through the subordinate's cells and one marker per step.
  os << "<polyline fill=\"none\" stroke=\"#3b7dd8\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < states.size(); ++i)
    os << (i ? " " : "") << cx(states[i].subordinate.cell()) << ',' << cy(states[i].subordinate.cell(), top);
  os << "\"/>\n";
  for (std::size_t i = 1; i < states.size(); ++i)
    os << "<circle class=\"step\" cx=\"" << cx(states[i].subordinate.cell()) << "\" cy=\""
       << cy(states[i].subordinate.cell(), top) << "\" r=\"3\" fill=\"#3b7dd8\"/>\n";

  const Cell food = *first.food;
  os << "<rect x=\"" << cx(food) - 8 << "\" y=\"" << cy(food, top) - 8 << "\" width=\"16\" height=\"16\" fill=\""
     << (last.food ? "#2e9e44" : "none") << "\" stroke=\"#2e9e44\" stroke-width=\"2\"/>\n";
  agent_glyph(os, first.dominant, top, "#c0392b", "D");
  agent_glyph(os, last.subordinate, top, "#2c3e50", "S");
  os << "</svg>\n";
  return os.str();
}

std::string render_svg(const EpisodeRecord& record, const std::string& title) {
  return render_svg(record.trace, record.world, title);
}

}  // namespace perspective
