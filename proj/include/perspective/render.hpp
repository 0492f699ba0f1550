#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "perspective/analysis.hpp"

namespace perspective {

class RenderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SVG drawing of an episode: grid, spawn region, the dominant's field of
/// view, food, both agents with heading arrows and one marker per step on
/// the subordinate's cell. Output bytes depend only on the inputs.
std::string render_svg(const std::vector<nlohmann::json>& trace, const WorldConfig& world,
                       const std::string& title = {});
std::string render_svg(const EpisodeRecord& record, const std::string& title = {});

/// Parses a JSON-lines trace (one trace_line object per line).
std::vector<nlohmann::json> parse_trace(const std::string& jsonl);
std::string trace_to_jsonl(const std::vector<nlohmann::json>& trace);

}  // namespace perspective
