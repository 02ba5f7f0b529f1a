#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dle/eval.hpp"

namespace dle {

/// Bird's-eye SVG of one decision step; lanes drawn when a region is given,
/// ego highlighted, colliding vehicles marked.
std::string render_frame_svg(const EpisodeStep& step, const RegionSpec* region);

/// Replay trace CSV (one row per decision step).
std::string replay_trace_csv(const EpisodeLog& log);

struct CurveSeries {
    std::string name;
    std::vector<double> values;  // per episode
};

/// Overlaid training curves with axes and a legend.
std::string render_curves_svg(const std::vector<CurveSeries>& series);

}  // namespace dle
