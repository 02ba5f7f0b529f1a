#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dle/geometry.hpp"
#include "dle/idm.hpp"
#include "dle/mat.hpp"

namespace dle {

/// Discrete ego actions (highway meta-action convention).
enum class Action { LaneLeft = 0, Idle = 1, LaneRight = 2, Faster = 3, Slower = 4 };
inline constexpr int kActionCount = 5;

struct IdmRange {
    double lo = 0.0, hi = 0.0;
    double sample(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
};

struct IdmDistribution {
    IdmRange desired_velocity_mps{50.0 / 3.6, 50.0 / 3.6};
    IdmRange desired_time_gap_s{1.5, 1.5};
    IdmRange jam_distance_m{5.0, 5.0};
    IdmRange velocity_exponent{3.4, 4.5};
    IdmRange max_acceleration_mps2{3.0, 3.0};
    IdmRange desired_deceleration_mps2{-5.0, -5.0};

    IdmParams sample(Rng& rng) const;
};

struct SpawnSpec {
    int ego_lane = 0;
    IdmRange ego_s_m{40.0, 60.0};
    IdmRange ego_speed_mps{8.0, 12.0};
    int min_vehicles = 4;
    int max_vehicles = 8;
    std::vector<int> env_lanes;
    IdmRange env_s_m{0.0, 300.0};
    IdmRange env_speed_mps{6.0, 12.0};
};

/// Region-conditioned environment description: geometry plus the
/// position-dependent behaviour knobs (the lane-change gate in particular).
struct RegionSpec {
    int region_id = 0;
    RoadGeometry geometry;
    double merge_lane_change_probability = 0.5;
    IdmDistribution idm_distribution;
    MobilParams mobil;
    SpawnSpec spawn;
    int episode_horizon_decisions = 80;
    double physics_dt_s = 0.1;
    int substeps_per_decision = 5;
    double lane_change_duration_s = 2.0;
    double ego_speed_step_mps = 2.0;
    double ego_speed_kp = 2.0;

    double decision_dt_s() const { return physics_dt_s * substeps_per_decision; }
    void validate() const;
};

std::string region_to_json_string(const RegionSpec& r);
RegionSpec region_from_json_string(const std::string& s);
RegionSpec load_region_file(const std::string& path);

struct VehicleAgent {
    int id = 0;
    bool is_ego = false;
    bool active = true;
    int lane = 0;
    double s_m = 0.0;
    double speed_mps = 0.0;
    double length_m = 5.0;
    double width_m = 2.0;
    IdmParams idm;

    // lateral state: offset from the current lane centerline; nonzero only
    // while a lane change interpolates it back to zero
    double l_offset_m = 0.0;
    double change_progress = 1.0;  // >= 1 means not changing
    double change_l0_m = 0.0;
    int shadow_lane = -1;  // previous lane while changing, else -1

    // ego only
    double speed_setpoint_mps = 0.0;

    bool changing() const { return change_progress < 1.0; }
};

enum class TerminalCause { None, Collision, OffRoad, Horizon, RoadEnd };
const char* terminal_cause_name(TerminalCause c);

struct SimState {
    double time_s = 0.0;
    int decision_count = 0;
    std::vector<VehicleAgent> agents;
    int ego_id = 0;
    Rng rng;
    int region_id = 0;
    bool terminal = false;
    TerminalCause cause = TerminalCause::None;

    const VehicleAgent& ego() const;
    VehicleAgent& ego();
    const VehicleAgent* agent(int id) const;
};

struct StepEvents {
    std::vector<std::pair<int, int>> collisions;  // agent id pairs, first < second
    bool ego_collision = false;
    bool ego_off_road = false;
    bool ego_road_end = false;
    bool horizon_reached = false;
    bool ego_lane_change_started = false;
    bool ego_lane_change_completed = false;
    int env_lane_changes_started = 0;
    int merge_gate_attempts = 0;
    int merge_gate_passes = 0;
    bool near_collision = false;  // emergency IDM braking occurred
};

/// Everything the reward function needs about one decision step.
struct RewardContext {
    bool collision = false;
    double ego_speed_mps = 0.0;
    double speed_limit_mps = 1.0;
    bool lane_change_completed = false;
    // (speed, desired speed) of environment vehicles currently braking
    // behind the ego
    std::vector<std::pair<double, double>> impacted;
};

struct StepResult {
    StepEvents events;
    RewardContext reward_ctx;
};

Pose agent_pose(const VehicleAgent& a, const RegionSpec& region);

/// Samples an initial scene: ego plus 4-8 environment vehicles with
/// non-overlapping spawn gaps. Deterministic in (region, seed).
SimState sample_scenario(const RegionSpec& region, uint64_t seed);

/// Advances one decision interval (substeps_per_decision physics steps of
/// dt each). Throws if the state is already terminal.
StepResult step(SimState& state, Action ego_action, const RegionSpec& region, double dt);

inline StepResult step(SimState& state, Action ego_action, const RegionSpec& region) {
    return step(state, ego_action, region, region.physics_dt_s);
}

/// All currently overlapping oriented-rectangle pairs (first id < second).
std::vector<std::pair<int, int>> detect_collisions(const SimState& state, const RegionSpec& region);

struct OrientedRect {
    double cx = 0.0, cy = 0.0, heading = 0.0, length = 0.0, width = 0.0;
};

bool rects_overlap(const OrientedRect& a, const OrientedRect& b);

}  // namespace dle
