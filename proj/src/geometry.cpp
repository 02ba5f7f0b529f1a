#include "dle/geometry.hpp"

#include <nlohmann/json.hpp>

#include "dle/log.hpp"

namespace dle {

using nlohmann::json;

void Lane::finalize() {
    if (centerline.size() < 2)
        throw std::invalid_argument("Lane: centerline needs at least 2 points");
    if (width_m <= 0.0) throw std::invalid_argument("Lane: width must be positive");
    size_t n = centerline.size();
    cum_s.assign(n, 0.0);
    seg_dir.assign(n - 1, {});
    vertex_tan.assign(n, {});
    for (size_t i = 0; i + 1 < n; ++i) {
        Vec2 d = centerline[i + 1] - centerline[i];
        double len = norm(d);
        if (len <= 0.0)
            throw std::invalid_argument("Lane: centerline arclength must be strictly increasing");
        seg_dir[i] = (1.0 / len) * d;
        cum_s[i + 1] = cum_s[i] + len;
    }
    for (size_t i = 0; i < n; ++i) {
        Vec2 t{};
        if (i > 0) t = t + seg_dir[i - 1];
        if (i + 1 < n) t = t + seg_dir[i];
        double len = norm(t);
        vertex_tan[i] = len > 0.0 ? (1.0 / len) * t : Vec2{1.0, 0.0};
    }
}

namespace {

// Locate segment index and local fraction for arclength s (clamped).
std::pair<size_t, double> locate(const std::vector<double>& cum_s, double s) {
    if (s <= 0.0) return {0, 0.0};
    if (s >= cum_s.back()) return {cum_s.size() - 2, 1.0};
    size_t lo = 0, hi = cum_s.size() - 1;
    while (hi - lo > 1) {
        size_t mid = (lo + hi) / 2;
        if (cum_s[mid] <= s) lo = mid;
        else hi = mid;
    }
    double seg_len = cum_s[lo + 1] - cum_s[lo];
    return {lo, (s - cum_s[lo]) / seg_len};
}

}  // namespace

Vec2 Lane::point_at(double s) const {
    auto [i, t] = locate(cum_s, s);
    return centerline[i] + t * (centerline[i + 1] - centerline[i]);
}

Vec2 Lane::tangent_at(double s) const {
    auto [i, t] = locate(cum_s, s);
    Vec2 tan = vertex_tan[i] + t * (vertex_tan[i + 1] - vertex_tan[i]);
    double len = norm(tan);
    return len > 0.0 ? (1.0 / len) * tan : seg_dir[i];
}

Vec2 Lane::offset_point(double s, double l) const {
    Vec2 p = point_at(s);
    Vec2 tan = tangent_at(s);
    Vec2 left{-tan.y, tan.x};
    return p + l * left;
}

const MergeSection* RoadGeometry::merge_for_ramp(int lane_id) const {
    for (const auto& m : merge_sections)
        if (m.ramp_lane == lane_id) return &m;
    return nullptr;
}

bool RoadGeometry::in_merge_section(int lane_id, double s) const {
    const MergeSection* m = merge_for_ramp(lane_id);
    return m && s >= m->merge_start_s_m && s <= m->gore_s_m;
}

std::vector<int> RoadGeometry::reachable_lanes(int lane_id, double s) const {
    std::vector<int> out;
    if (!valid_lane(lane_id)) return out;
    if (const MergeSection* m = merge_for_ramp(lane_id)) {
        if (s >= m->merge_start_s_m && s <= m->gore_s_m && valid_lane(m->main_lane))
            out.push_back(m->main_lane);
        return out;
    }
    for (int d : {-1, +1}) {
        int cand = lane_id + d;
        if (!valid_lane(cand)) continue;
        if (merge_for_ramp(cand)) continue;  // ramps are entered only by spawning
        out.push_back(cand);
    }
    return out;
}

void RoadGeometry::validate() const {
    if (lanes.empty()) throw std::invalid_argument("RoadGeometry: no lanes");
    for (const auto& lane : lanes) {
        if (lane.cum_s.empty())
            throw std::invalid_argument("RoadGeometry: lane not finalized");
        if (lane.width_m <= 0.0) throw std::invalid_argument("RoadGeometry: lane width must be positive");
    }
    for (const auto& m : merge_sections) {
        if (!valid_lane(m.ramp_lane) || !valid_lane(m.main_lane))
            throw std::invalid_argument("RoadGeometry: merge section references unknown lane");
        if (m.ramp_lane == m.main_lane)
            throw std::invalid_argument("RoadGeometry: ramp must connect to a different lane");
        if (m.gore_s_m <= m.merge_start_s_m)
            throw std::invalid_argument("RoadGeometry: merge section must end after it starts");
    }
}

LaneCoords lane_coordinates(const Pose& pose, const RoadGeometry& geom, int lane_id) {
    if (!geom.valid_lane(lane_id))
        throw std::invalid_argument("lane_coordinates: invalid lane id " + std::to_string(lane_id));
    const Lane& lane = geom.lanes[static_cast<size_t>(lane_id)];
    Vec2 p{pose.x, pose.y};

    double best_d2 = std::numeric_limits<double>::infinity();
    size_t best_i = 0;
    double best_t = 0.0;
    for (size_t i = 0; i + 1 < lane.centerline.size(); ++i) {
        Vec2 a = lane.centerline[i];
        Vec2 b = lane.centerline[i + 1];
        Vec2 ab = b - a;
        double len2 = dot(ab, ab);
        double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
        double tc = std::clamp(t, 0.0, 1.0);
        Vec2 proj = a + tc * ab;
        double d2 = dot(p - proj, p - proj);
        if (d2 < best_d2 - 1e-15) {
            best_d2 = d2;
            best_i = i;
            best_t = tc;
        }
    }

    LaneCoords out;
    double seg_len = lane.cum_s[best_i + 1] - lane.cum_s[best_i];
    out.s = lane.cum_s[best_i] + best_t * seg_len;
    Vec2 proj = lane.centerline[best_i] + best_t * (lane.centerline[best_i + 1] - lane.centerline[best_i]);
    Vec2 dir = lane.seg_dir[best_i];
    out.l = cross(dir, p - proj);

    Vec2 tan = lane.vertex_tan[best_i] + best_t * (lane.vertex_tan[best_i + 1] - lane.vertex_tan[best_i]);
    double tl = norm(tan);
    if (tl > 0.0) tan = (1.0 / tl) * tan;
    else tan = dir;
    out.dtheta = wrap_angle(pose.heading - std::atan2(tan.y, tan.x));

    bool at_start = best_i == 0 && best_t == 0.0 && dot(p - lane.centerline.front(), lane.seg_dir.front()) < 0.0;
    bool at_end = best_i + 2 == lane.centerline.size() && best_t == 1.0 &&
                  dot(p - lane.centerline.back(), lane.seg_dir.back()) > 0.0;
    if (at_start || at_end) {
        out.clamped = true;
        logf(LogLevel::Debug, "lane_coordinates: pose beyond lane %d extent, clamped", lane_id);
    }
    return out;
}

RoadGeometry make_straight_road(const std::vector<double>& lane_offsets_m, double length_m,
                                double width_m, double speed_limit_mps) {
    RoadGeometry g;
    for (double off : lane_offsets_m) {
        Lane lane;
        lane.centerline = {{0.0, off}, {length_m, off}};
        lane.width_m = width_m;
        lane.speed_limit_mps = speed_limit_mps;
        lane.finalize();
        g.lanes.push_back(std::move(lane));
    }
    g.validate();
    return g;
}

std::string geometry_to_json_string(const RoadGeometry& g) {
    json j;
    j["schema_version"] = 1;
    json lanes = json::array();
    for (const auto& lane : g.lanes) {
        json lj;
        json pts = json::array();
        for (const auto& p : lane.centerline) pts.push_back({p.x, p.y});
        lj["centerline_xy_m"] = pts;
        lj["width_m"] = lane.width_m;
        lj["speed_limit_mps"] = lane.speed_limit_mps;
        lanes.push_back(lj);
    }
    j["lanes"] = lanes;
    json merges = json::array();
    for (const auto& m : g.merge_sections) {
        merges.push_back({{"ramp_lane", m.ramp_lane},
                          {"main_lane", m.main_lane},
                          {"merge_start_s_m", m.merge_start_s_m},
                          {"gore_s_m", m.gore_s_m}});
    }
    j["merge_sections"] = merges;
    return j.dump(2);
}

RoadGeometry geometry_from_json_string(const std::string& s) {
    json j = json::parse(s);
    RoadGeometry g;
    for (const auto& lj : j.at("lanes")) {
        Lane lane;
        for (const auto& p : lj.at("centerline_xy_m"))
            lane.centerline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        lane.width_m = lj.at("width_m").get<double>();
        lane.speed_limit_mps = lj.at("speed_limit_mps").get<double>();
        lane.finalize();
        g.lanes.push_back(std::move(lane));
    }
    if (j.contains("merge_sections")) {
        for (const auto& mj : j["merge_sections"]) {
            MergeSection m;
            m.ramp_lane = mj.at("ramp_lane").get<int>();
            m.main_lane = mj.at("main_lane").get<int>();
            m.merge_start_s_m = mj.at("merge_start_s_m").get<double>();
            m.gore_s_m = mj.at("gore_s_m").get<double>();
            g.merge_sections.push_back(m);
        }
    }
    g.validate();
    return g;
}

}  // namespace dle
