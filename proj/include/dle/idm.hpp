#pragma once

#include <optional>
#include <stdexcept>

#include "dle/mat.hpp"

namespace dle {

struct IdmParams {
    double desired_velocity_mps = 50.0 / 3.6;
    double desired_time_gap_s = 1.5;
    double jam_distance_m = 5.0;
    double velocity_exponent = 4.0;
    double max_acceleration_mps2 = 3.0;
    double desired_deceleration_mps2 = -5.0;

    void validate() const {
        if (max_acceleration_mps2 <= 0.0) throw std::invalid_argument("IdmParams: a must be > 0");
        if (desired_deceleration_mps2 >= 0.0) throw std::invalid_argument("IdmParams: b must be < 0");
        if (desired_time_gap_s <= 0.0) throw std::invalid_argument("IdmParams: T must be > 0");
        if (jam_distance_m <= 0.0) throw std::invalid_argument("IdmParams: g0 must be > 0");
        if (velocity_exponent < 3.4 || velocity_exponent > 4.5)
            throw std::invalid_argument("IdmParams: delta must be within [3.4, 4.5]");
    }
};

struct MobilParams {
    double politeness = 0.2;
    double lane_change_threshold_mps2 = 0.2;
    double safe_braking_mps2 = 4.0;  // magnitude of the strongest deceleration imposable on a new follower

    void validate() const {
        if (politeness < 0.0 || politeness > 1.0) throw std::invalid_argument("MobilParams: p in [0,1]");
        if (lane_change_threshold_mps2 <= 0.0)
            throw std::invalid_argument("MobilParams: threshold must be > 0");
    }
};

struct LeaderInfo {
    double gap_m = 0.0;  // bumper-to-bumper
    double speed_mps = 0.0;
};

struct IdmResult {
    double accel_mps2 = 0.0;
    bool emergency = false;  // non-positive gap with a leader present
};

/// Car-following acceleration, clamped to [b, a].
IdmResult idm_acceleration(double ego_speed_mps, const std::optional<LeaderInfo>& leader,
                           const IdmParams& params);

enum class LaneChange { Stay, Left, Right };

/// One vehicle's view of a candidate target lane. Gaps are bumper-to-bumper
/// in lane coordinates; absent neighbours are encoded by nullopt.
struct MobilCandidate {
    LaneChange direction = LaneChange::Stay;
    std::optional<LeaderInfo> new_leader;                // in front of self in the target lane
    std::optional<double> new_follower_speed;            // behind self in the target lane
    std::optional<double> new_follower_gap_to_self;      // its gap if self moves in
    std::optional<LeaderInfo> new_follower_current_lead; // its current situation (before the change)
    IdmParams new_follower_params;
    std::optional<double> old_follower_speed;            // current follower in self's lane
    std::optional<double> old_follower_gap_to_self;
    std::optional<LeaderInfo> old_follower_lead_after;   // its situation once self has left
    IdmParams old_follower_params;
};

struct MobilScene {
    double self_speed_mps = 0.0;
    IdmParams self_params;
    std::optional<LeaderInfo> current_leader;
    std::vector<MobilCandidate> candidates;
    bool mandatory = false;    // merging vehicle inside a merge section: skip the incentive test
    bool gated = false;        // merging vehicle: approved changes pass a Bernoulli gate
};

struct MobilDecision {
    LaneChange direction = LaneChange::Stay;
    bool gate_attempted = false;  // a change was approved and the gate was drawn
    bool gate_passed = false;
};

/// MOBIL incentive + safety test, with the region-dependent Bernoulli gate
/// applied to approved changes of gated (merging) vehicles.
MobilDecision mobil_decision(const MobilScene& scene, const MobilParams& mobil,
                             double merge_lane_change_probability, Rng& rng);

}  // namespace dle
