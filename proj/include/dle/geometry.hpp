#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dle/mat.hpp"

namespace dle {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

struct Pose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
};

/// Arc-length lane coordinates: longitudinal s, signed lateral offset l
/// (left of travel direction positive), heading error wrapped to (-pi, pi].
struct LaneCoords {
    double s = 0.0;
    double l = 0.0;
    double dtheta = 0.0;
    bool clamped = false;  // pose projected beyond the lane extent
};

/// One lane: centerline polyline plus width and speed limit. Vertex
/// tangents are smoothed from adjacent segments so heading errors stay
/// accurate on sampled curves.
struct Lane {
    std::vector<Vec2> centerline;
    double width_m = 4.0;
    double speed_limit_mps = 50.0 / 3.6;

    // derived, filled by finalize()
    std::vector<double> cum_s;
    std::vector<Vec2> seg_dir;      // unit direction per segment
    std::vector<Vec2> vertex_tan;   // unit tangent per vertex (segment bisector)

    void finalize();
    double length() const { return cum_s.empty() ? 0.0 : cum_s.back(); }

    Vec2 point_at(double s) const;
    Vec2 tangent_at(double s) const;
    /// World position of lane coordinates (s, l).
    Vec2 offset_point(double s, double l) const;
};

struct MergeSection {
    int ramp_lane = -1;
    int main_lane = -1;
    double merge_start_s_m = 0.0;
    double gore_s_m = 0.0;  // arclength where the ramp ends
};

struct RoadGeometry {
    std::vector<Lane> lanes;
    std::vector<MergeSection> merge_sections;

    int lane_count() const { return static_cast<int>(lanes.size()); }
    bool valid_lane(int id) const { return id >= 0 && id < lane_count(); }

    const MergeSection* merge_for_ramp(int lane_id) const;
    bool in_merge_section(int lane_id, double s) const;

    /// Lanes an agent may move into from `lane_id` at arclength s.
    /// Adjacency is index +-1; a ramp connects only to its main lane and
    /// only inside the merge section.
    std::vector<int> reachable_lanes(int lane_id, double s) const;

    void validate() const;
};

LaneCoords lane_coordinates(const Pose& pose, const RoadGeometry& geom, int lane_id);

/// Builds parallel straight lanes along +x with the given lateral offsets
/// (index order = offsets order, left to right).
RoadGeometry make_straight_road(const std::vector<double>& lane_offsets_m, double length_m,
                                double width_m, double speed_limit_mps);

std::string geometry_to_json_string(const RoadGeometry& g);
RoadGeometry geometry_from_json_string(const std::string& s);

}  // namespace dle
