#pragma once

#include <algorithm>

#include "dle/sim.hpp"

namespace dle {

/// Reward term weights. Defaults are the experiment values; overriding them
/// requires the explicit flag so configs cannot drift silently.
struct RewardWeights {
    double w_collision = -1.0;
    double w_velocity = 0.2;
    double w_lane_change = -0.05;
    double w_politeness = -0.1;
    double gamma = 0.95;
    bool overridden = false;

    static RewardWeights defaults() { return RewardWeights{}; }
};

struct RewardBreakdown {
    double r_c = 0.0;  // collision indicator
    double r_v = 0.0;  // normalized speed
    double r_l = 0.0;  // lane change executed
    double r_p = 0.0;  // induced slowdown of surrounding vehicles
    double total = 0.0;
};

inline RewardBreakdown reward(const RewardContext& ctx, const RewardWeights& w) {
    RewardBreakdown b;
    b.r_c = ctx.collision ? 1.0 : 0.0;
    b.r_v = std::clamp(ctx.ego_speed_mps / ctx.speed_limit_mps, 0.0, 1.0);
    b.r_l = ctx.lane_change_completed ? 1.0 : 0.0;
    double p = 0.0;
    for (const auto& [speed, target] : ctx.impacted)
        if (target > 0.0) p += (target - speed) / target;
    b.r_p = std::clamp(p, 0.0, 1.0);
    b.total = w.w_collision * b.r_c + w.w_velocity * b.r_v + w.w_lane_change * b.r_l +
              w.w_politeness * b.r_p;
    return b;
}

}  // namespace dle
