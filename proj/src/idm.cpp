#include "dle/idm.hpp"

#include "dle/log.hpp"

namespace dle {

IdmResult idm_acceleration(double ego_speed_mps, const std::optional<LeaderInfo>& leader,
                           const IdmParams& p) {
    double a = p.max_acceleration_mps2;
    double b = p.desired_deceleration_mps2;
    if (leader && leader->gap_m <= 0.0) {
        logf(LogLevel::Debug, "idm: non-positive gap %.3f, emergency braking", leader->gap_m);
        return {b, true};
    }
    double v = ego_speed_mps;
    double free_term = std::pow(v / p.desired_velocity_mps, p.velocity_exponent);
    double interaction = 0.0;
    if (leader) {
        double dv = v - leader->speed_mps;
        double s_star = p.jam_distance_m + v * p.desired_time_gap_s +
                        v * dv / (2.0 * std::sqrt(a * std::fabs(b)));
        double ratio = s_star / leader->gap_m;
        interaction = ratio * ratio;
    }
    double accel = a * (1.0 - free_term - interaction);
    return {std::clamp(accel, b, a), false};
}

namespace {

double accel_of(double speed, const std::optional<LeaderInfo>& leader, const IdmParams& p) {
    return idm_acceleration(speed, leader, p).accel_mps2;
}

struct CandidateResult {
    bool safe = false;
    double incentive = -std::numeric_limits<double>::infinity();
};

CandidateResult evaluate(const MobilScene& scene, const MobilCandidate& c, const MobilParams& mobil) {
    CandidateResult r;

    // Safety: the prospective follower must not be forced to brake harder
    // than the safe limit.
    if (c.new_follower_speed) {
        if (!c.new_follower_gap_to_self || *c.new_follower_gap_to_self <= 0.0) return r;
        LeaderInfo self_as_leader{*c.new_follower_gap_to_self, scene.self_speed_mps};
        double a_new = accel_of(*c.new_follower_speed, self_as_leader, c.new_follower_params);
        if (a_new < -mobil.safe_braking_mps2) return r;
    }
    r.safe = true;

    double a_self_old = accel_of(scene.self_speed_mps, scene.current_leader, scene.self_params);
    double a_self_new = accel_of(scene.self_speed_mps, c.new_leader, scene.self_params);

    double others = 0.0;
    if (c.new_follower_speed) {
        LeaderInfo self_as_leader{c.new_follower_gap_to_self.value_or(1e9), scene.self_speed_mps};
        double a_nf_new = accel_of(*c.new_follower_speed, self_as_leader, c.new_follower_params);
        double a_nf_old = accel_of(*c.new_follower_speed, c.new_follower_current_lead, c.new_follower_params);
        others += a_nf_new - a_nf_old;
    }
    if (c.old_follower_speed) {
        std::optional<LeaderInfo> self_behind =
            c.old_follower_gap_to_self ? std::optional<LeaderInfo>({*c.old_follower_gap_to_self,
                                                                    scene.self_speed_mps})
                                       : std::nullopt;
        double a_of_old = accel_of(*c.old_follower_speed, self_behind, c.old_follower_params);
        double a_of_new = accel_of(*c.old_follower_speed, c.old_follower_lead_after, c.old_follower_params);
        others += a_of_new - a_of_old;
    }

    r.incentive = (a_self_new - a_self_old) + mobil.politeness * others;
    return r;
}

}  // namespace

MobilDecision mobil_decision(const MobilScene& scene, const MobilParams& mobil,
                             double merge_lane_change_probability, Rng& rng) {
    MobilDecision out;
    const MobilCandidate* best = nullptr;
    double best_incentive = -std::numeric_limits<double>::infinity();

    for (const auto& c : scene.candidates) {
        CandidateResult r = evaluate(scene, c, mobil);
        if (!r.safe) continue;
        bool wanted = scene.mandatory || r.incentive > mobil.lane_change_threshold_mps2;
        if (!wanted) continue;
        if (r.incentive > best_incentive) {
            best_incentive = r.incentive;
            best = &c;
        }
    }
    if (!best) return out;

    if (scene.gated) {
        out.gate_attempted = true;
        out.gate_passed = rng.bernoulli(merge_lane_change_probability);
        if (!out.gate_passed) return out;
    }
    out.direction = best->direction;
    return out;
}

}  // namespace dle
