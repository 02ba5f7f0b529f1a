#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "dle/sim.hpp"

namespace dle::testing {

/// Plain straight road, no ramps: `mains` parallel lanes, leftmost first.
inline RegionSpec straight_region(int region_id, int mains, double length_m = 1500.0,
                                  double speed_limit = 50.0 / 3.6) {
    RegionSpec r;
    r.region_id = region_id;
    std::vector<double> offsets;
    for (int i = 0; i < mains; ++i) offsets.push_back(-4.0 * i);
    r.geometry = make_straight_road(offsets, length_m, 4.0, speed_limit);
    r.spawn.ego_lane = 0;
    r.spawn.ego_s_m = {40.0, 40.0};
    r.spawn.ego_speed_mps = {8.0, 8.0};
    r.spawn.min_vehicles = 0;
    r.spawn.max_vehicles = 0;
    r.spawn.env_lanes = {};
    r.episode_horizon_decisions = 80;
    return r;
}

/// Two main lanes plus a right-side merge ramp that ends at `gore_s`.
inline RegionSpec merge_region(int region_id, double gate, int mains = 2, double gore_s = 260.0,
                               double merge_start = 120.0, double length_m = 800.0) {
    RegionSpec r;
    r.region_id = region_id;
    // main lanes at y = 4*(mains-1-i) down to 0; ramp adjacent to the rightmost
    RoadGeometry g;
    for (int i = 0; i < mains; ++i) {
        Lane lane;
        double y = 4.0 * (mains - 1 - i);
        lane.centerline = {{0.0, y}, {length_m, y}};
        lane.width_m = 4.0;
        lane.speed_limit_mps = 50.0 / 3.6;
        lane.finalize();
        g.lanes.push_back(std::move(lane));
    }
    Lane ramp;
    ramp.centerline = {{0.0, -4.0}, {gore_s, -4.0}};
    ramp.width_m = 4.0;
    ramp.speed_limit_mps = 50.0 / 3.6;
    ramp.finalize();
    g.lanes.push_back(std::move(ramp));
    MergeSection m;
    m.ramp_lane = mains;
    m.main_lane = mains - 1;
    m.merge_start_s_m = merge_start;
    m.gore_s_m = gore_s;
    g.merge_sections.push_back(m);
    g.validate();
    r.geometry = std::move(g);

    r.merge_lane_change_probability = gate;
    r.spawn.ego_lane = mains - 1;
    r.spawn.ego_s_m = {30.0, 50.0};
    r.spawn.ego_speed_mps = {8.0, 11.0};
    r.spawn.min_vehicles = 4;
    r.spawn.max_vehicles = 8;
    r.spawn.env_lanes.clear();
    for (int i = 0; i < mains; ++i) r.spawn.env_lanes.push_back(i);
    r.spawn.env_lanes.push_back(mains);  // ramp
    r.spawn.env_s_m = {20.0, 240.0};
    r.spawn.env_speed_mps = {6.0, 11.0};
    r.episode_horizon_decisions = 80;
    return r;
}

inline std::string temp_dir(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() /
             ("dle_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

}  // namespace dle::testing
