#include "dle/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace dle {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

const char* series_color(size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return colors[i % 6];
}

}  // namespace

std::string render_frame_svg(const EpisodeStep& step, const RegionSpec* region) {
    // view window centered on the ego
    double cx = step.ego_x, cy = step.ego_y;
    double half_w = 80.0, half_h = 25.0;
    double scale = 8.0;  // px per metre
    double width = 2 * half_w * scale, height = 2 * half_h * scale;

    auto tx = [&](double x) { return (x - (cx - half_w)) * scale; };
    auto ty = [&](double y) { return height - (y - (cy - half_h)) * scale; };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) +
                      "\" height=\"" + fmt(height) + "\" viewBox=\"0 0 " + fmt(width) + " " +
                      fmt(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#f4f4f4\"/>\n";

    if (region) {
        for (const auto& lane : region->geometry.lanes) {
            std::string pts;
            for (const auto& p : lane.centerline)
                pts += fmt(tx(p.x)) + "," + fmt(ty(p.y)) + " ";
            svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"" +
                   fmt(lane.width_m * scale) + "\" stroke-linecap=\"butt\"/>\n";
            svg += "<polyline points=\"" + pts +
                   "\" fill=\"none\" stroke=\"#ffffff\" stroke-width=\"1\" stroke-dasharray=\"6,6\"/>\n";
        }
    }

    auto draw_vehicle = [&](double x, double y, double heading, const char* fill) {
        double deg = -heading * 180.0 / M_PI;  // svg y axis points down
        svg += "<g transform=\"translate(" + fmt(tx(x)) + "," + fmt(ty(y)) + ") rotate(" + fmt(deg) +
               ")\"><rect x=\"" + fmt(-2.5 * scale) + "\" y=\"" + fmt(-1.0 * scale) + "\" width=\"" +
               fmt(5.0 * scale) + "\" height=\"" + fmt(2.0 * scale) + "\" fill=\"" + fill +
               "\" stroke=\"#333333\"/></g>\n";
    };

    auto colliding = [&](int id) {
        for (const auto& [a, b] : step.collisions)
            if (a == id || b == id) return true;
        return false;
    };

    for (const auto& o : step.others) {
        int id = static_cast<int>(o[0]);
        // others are drawn at their lane-frame pose when geometry is known
        double x = o[2], y = o[3];
        double heading = 0.0;
        if (region) {
            int lane_id = static_cast<int>(o[1]);
            if (region->geometry.valid_lane(lane_id)) {
                const Lane& lane = region->geometry.lanes[static_cast<size_t>(lane_id)];
                Vec2 p = lane.offset_point(o[2], o[3]);
                Vec2 t = lane.tangent_at(o[2]);
                x = p.x;
                y = p.y;
                heading = std::atan2(t.y, t.x);
            }
        }
        draw_vehicle(x, y, heading, colliding(id) ? "#d62728" : "#999999");
    }
    draw_vehicle(step.ego_x, step.ego_y, step.ego_heading, colliding(0) ? "#d62728" : "#1f77b4");

    svg += "<text x=\"8\" y=\"16\" font-family=\"monospace\" font-size=\"13\">step " +
           std::to_string(step.step) + "  action " + std::to_string(step.action) + "  v=" +
           fmt(step.ego_speed) + " m/s</text>\n";
    svg += "</svg>\n";
    return svg;
}

std::string replay_trace_csv(const EpisodeLog& log) {
    std::string out = "step,x_m,y_m,s_m,l_m,speed_mps,heading_rad,lane,action,reward\n";
    char buf[256];
    for (const auto& s : log.steps) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d,%d,%.6f\n", s.step, s.ego_x,
                      s.ego_y, s.ego_s, s.ego_l, s.ego_speed, s.ego_heading, s.ego_lane, s.action,
                      s.reward.total);
        out += buf;
    }
    return out;
}

std::string render_curves_svg(const std::vector<CurveSeries>& series) {
    double width = 720, height = 420, ml = 60, mb = 40, mt = 20, mr = 20;
    double lo = 0.0, hi = 1.0;
    size_t max_n = 1;
    bool any = false;
    for (const auto& s : series) {
        for (double v : s.values) {
            if (!any) {
                lo = hi = v;
                any = true;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        max_n = std::max(max_n, s.values.size());
    }
    if (hi <= lo) hi = lo + 1.0;

    auto px = [&](size_t i) {
        return ml + (width - ml - mr) * static_cast<double>(i) / std::max<size_t>(1, max_n - 1);
    };
    auto py = [&](double v) { return height - mb - (height - mt - mb) * (v - lo) / (hi - lo); };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) +
                      "\" height=\"" + fmt(height) + "\">\n<rect width=\"100%\" height=\"100%\" "
                      "fill=\"#ffffff\"/>\n";
    svg += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(height - mb) + "\" x2=\"" + fmt(width - mr) +
           "\" y2=\"" + fmt(height - mb) + "\" stroke=\"#000\"/>\n";
    svg += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(mt) + "\" x2=\"" + fmt(ml) + "\" y2=\"" +
           fmt(height - mb) + "\" stroke=\"#000\"/>\n";
    svg += "<text x=\"" + fmt(width / 2) + "\" y=\"" + fmt(height - 8) +
           "\" font-size=\"12\" text-anchor=\"middle\">episode</text>\n";
    svg += "<text x=\"12\" y=\"" + fmt(height / 2) +
           "\" font-size=\"12\" transform=\"rotate(-90 12 " + fmt(height / 2) +
           ")\" text-anchor=\"middle\">episode reward</text>\n";
    svg += "<text x=\"" + fmt(ml - 6) + "\" y=\"" + fmt(py(lo)) +
           "\" font-size=\"10\" text-anchor=\"end\">" + fmt(lo) + "</text>\n";
    svg += "<text x=\"" + fmt(ml - 6) + "\" y=\"" + fmt(py(hi)) +
           "\" font-size=\"10\" text-anchor=\"end\">" + fmt(hi) + "</text>\n";

    for (size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        if (s.values.empty()) continue;
        std::string pts;
        for (size_t i = 0; i < s.values.size(); ++i)
            pts += fmt(px(i)) + "," + fmt(py(s.values[i])) + " ";
        svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" +
               std::string(series_color(k)) + "\" stroke-width=\"1.5\"/>\n";
        svg += "<text x=\"" + fmt(width - mr - 120) + "\" y=\"" + fmt(mt + 16 + 16 * k) +
               "\" font-size=\"12\" fill=\"" + series_color(k) + "\">" + s.name + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace dle
