#include "dle/sim.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dle/log.hpp"

namespace dle {

using nlohmann::json;

IdmParams IdmDistribution::sample(Rng& rng) const {
    IdmParams p;
    p.desired_velocity_mps = desired_velocity_mps.sample(rng);
    p.desired_time_gap_s = desired_time_gap_s.sample(rng);
    p.jam_distance_m = jam_distance_m.sample(rng);
    p.velocity_exponent = velocity_exponent.sample(rng);
    p.max_acceleration_mps2 = max_acceleration_mps2.sample(rng);
    p.desired_deceleration_mps2 = desired_deceleration_mps2.sample(rng);
    p.validate();
    return p;
}

void RegionSpec::validate() const {
    geometry.validate();
    if (merge_lane_change_probability < 0.0 || merge_lane_change_probability > 1.0)
        throw std::invalid_argument("RegionSpec: merge_lane_change_probability must be in [0,1]");
    mobil.validate();
    if (!geometry.valid_lane(spawn.ego_lane))
        throw std::invalid_argument("RegionSpec: spawn ego lane out of range");
    for (int l : spawn.env_lanes)
        if (!geometry.valid_lane(l)) throw std::invalid_argument("RegionSpec: spawn env lane out of range");
    if (spawn.min_vehicles < 0 || spawn.max_vehicles < spawn.min_vehicles)
        throw std::invalid_argument("RegionSpec: bad vehicle count range");
    if (episode_horizon_decisions <= 0) throw std::invalid_argument("RegionSpec: horizon must be > 0");
    if (physics_dt_s <= 0.0 || substeps_per_decision <= 0)
        throw std::invalid_argument("RegionSpec: bad timing parameters");
    if (lane_change_duration_s <= 0.0)
        throw std::invalid_argument("RegionSpec: lane change duration must be > 0");
    double ego_len = geometry.lanes[static_cast<size_t>(spawn.ego_lane)].length();
    if (spawn.ego_s_m.lo < 0.0 || spawn.ego_s_m.hi > ego_len)
        throw std::invalid_argument("RegionSpec: ego spawn positions outside geometry");
}

const char* terminal_cause_name(TerminalCause c) {
    switch (c) {
        case TerminalCause::None: return "none";
        case TerminalCause::Collision: return "collision";
        case TerminalCause::OffRoad: return "off_road";
        case TerminalCause::Horizon: return "horizon";
        case TerminalCause::RoadEnd: return "road_end";
    }
    return "?";
}

const VehicleAgent& SimState::ego() const {
    for (const auto& a : agents)
        if (a.id == ego_id) return a;
    throw std::logic_error("SimState: ego not found");
}

VehicleAgent& SimState::ego() {
    for (auto& a : agents)
        if (a.id == ego_id) return a;
    throw std::logic_error("SimState: ego not found");
}

const VehicleAgent* SimState::agent(int id) const {
    for (const auto& a : agents)
        if (a.id == id) return &a;
    return nullptr;
}

Pose agent_pose(const VehicleAgent& a, const RegionSpec& region) {
    const Lane& lane = region.geometry.lanes[static_cast<size_t>(a.lane)];
    Vec2 p = lane.offset_point(a.s_m, a.l_offset_m);
    Vec2 tan = lane.tangent_at(a.s_m);
    double dldt = 0.0;
    if (a.changing()) {
        double tau = std::min(a.change_progress, 1.0);
        dldt = -a.change_l0_m * (M_PI / (2.0 * region.lane_change_duration_s)) * std::sin(M_PI * tau);
    }
    Vec2 vel = a.speed_mps * tan + dldt * Vec2{-tan.y, tan.x};
    double heading = (norm(vel) > 1e-9) ? std::atan2(vel.y, vel.x) : std::atan2(tan.y, tan.x);
    return {p.x, p.y, heading};
}

namespace {

struct LaneSlot {
    double s;
    int idx;  // index into agents
};

// Occupancy per lane; vehicles mid-change appear in both their target and
// shadow lane.
std::vector<std::vector<LaneSlot>> lane_occupancy(const std::vector<VehicleAgent>& agents, int lane_count) {
    std::vector<std::vector<LaneSlot>> occ(static_cast<size_t>(lane_count));
    for (size_t i = 0; i < agents.size(); ++i) {
        const auto& a = agents[i];
        if (!a.active) continue;
        occ[static_cast<size_t>(a.lane)].push_back({a.s_m, static_cast<int>(i)});
        if (a.changing() && a.shadow_lane >= 0 && a.shadow_lane < lane_count)
            occ[static_cast<size_t>(a.shadow_lane)].push_back({a.s_m, static_cast<int>(i)});
    }
    for (auto& v : occ)
        std::sort(v.begin(), v.end(), [](const LaneSlot& x, const LaneSlot& y) {
            return x.s != y.s ? x.s < y.s : x.idx < y.idx;
        });
    return occ;
}

std::optional<int> leader_index(const std::vector<LaneSlot>& lane, double s, int self_idx) {
    std::optional<int> best;
    double best_s = std::numeric_limits<double>::infinity();
    for (const auto& slot : lane) {
        if (slot.idx == self_idx) continue;
        if (slot.s > s || (slot.s == s && slot.idx > self_idx)) {
            if (slot.s < best_s) {
                best_s = slot.s;
                best = slot.idx;
            }
        }
    }
    return best;
}

std::optional<int> follower_index(const std::vector<LaneSlot>& lane, double s, int self_idx) {
    std::optional<int> best;
    double best_s = -std::numeric_limits<double>::infinity();
    for (const auto& slot : lane) {
        if (slot.idx == self_idx) continue;
        if (slot.s < s || (slot.s == s && slot.idx < self_idx)) {
            if (slot.s > best_s) {
                best_s = slot.s;
                best = slot.idx;
            }
        }
    }
    return best;
}

double bumper_gap(const VehicleAgent& back, const VehicleAgent& front) {
    return (front.s_m - back.s_m) - 0.5 * (front.length_m + back.length_m);
}

// Leader info for car following, including the virtual stopped wall at the
// end of ramp lanes.
std::optional<LeaderInfo> leader_info(const std::vector<VehicleAgent>& agents,
                                      const std::vector<std::vector<LaneSlot>>& occ,
                                      const RegionSpec& region, int idx) {
    const VehicleAgent& self = agents[static_cast<size_t>(idx)];
    std::optional<LeaderInfo> info;
    auto li = leader_index(occ[static_cast<size_t>(self.lane)], self.s_m, idx);
    if (li) {
        const VehicleAgent& lead = agents[static_cast<size_t>(*li)];
        info = LeaderInfo{bumper_gap(self, lead), lead.speed_mps};
    }
    if (region.geometry.merge_for_ramp(self.lane)) {
        const Lane& lane = region.geometry.lanes[static_cast<size_t>(self.lane)];
        double wall_gap = lane.length() - self.s_m - 0.5 * self.length_m;
        if (!info || wall_gap < info->gap_m) info = LeaderInfo{wall_gap, 0.0};
    }
    return info;
}

void begin_lane_change(VehicleAgent& a, int target, const RegionSpec& region) {
    Pose pose = agent_pose(a, region);
    LaneCoords c = lane_coordinates(pose, region.geometry, target);
    a.shadow_lane = a.lane;
    a.lane = target;
    a.s_m = c.s;
    a.l_offset_m = c.l;
    a.change_l0_m = c.l;
    a.change_progress = 0.0;
}

OrientedRect agent_rect(const VehicleAgent& a, const RegionSpec& region) {
    Pose p = agent_pose(a, region);
    return {p.x, p.y, p.heading, a.length_m, a.width_m};
}

}  // namespace

bool rects_overlap(const OrientedRect& a, const OrientedRect& b) {
    auto corners = [](const OrientedRect& r) {
        std::array<Vec2, 4> out;
        double c = std::cos(r.heading), s = std::sin(r.heading);
        double hl = 0.5 * r.length, hw = 0.5 * r.width;
        int k = 0;
        for (double dx : {-hl, hl})
            for (double dy : {-hw, hw})
                out[static_cast<size_t>(k++)] = {r.cx + dx * c - dy * s, r.cy + dx * s + dy * c};
        return out;
    };
    auto ca = corners(a);
    auto cb = corners(b);
    std::array<Vec2, 4> axes = {
        Vec2{std::cos(a.heading), std::sin(a.heading)},
        Vec2{-std::sin(a.heading), std::cos(a.heading)},
        Vec2{std::cos(b.heading), std::sin(b.heading)},
        Vec2{-std::sin(b.heading), std::cos(b.heading)},
    };
    for (const auto& axis : axes) {
        double amin = std::numeric_limits<double>::infinity(), amax = -amin;
        double bmin = amin, bmax = -amin;
        for (const auto& p : ca) {
            double d = dot(p, axis);
            amin = std::min(amin, d);
            amax = std::max(amax, d);
        }
        for (const auto& p : cb) {
            double d = dot(p, axis);
            bmin = std::min(bmin, d);
            bmax = std::max(bmax, d);
        }
        if (amax < bmin || bmax < amin) return false;
    }
    return true;
}

std::vector<std::pair<int, int>> detect_collisions(const SimState& state, const RegionSpec& region) {
    std::vector<std::pair<int, int>> out;
    const auto& agents = state.agents;
    for (size_t i = 0; i < agents.size(); ++i) {
        if (!agents[i].active) continue;
        OrientedRect ri = agent_rect(agents[i], region);
        for (size_t j = i + 1; j < agents.size(); ++j) {
            if (!agents[j].active) continue;
            if (rects_overlap(ri, agent_rect(agents[j], region))) {
                int a = agents[i].id, b = agents[j].id;
                out.emplace_back(std::min(a, b), std::max(a, b));
            }
        }
    }
    return out;
}

SimState sample_scenario(const RegionSpec& region, uint64_t seed) {
    region.validate();
    Rng spawn_rng(seed);
    SimState state;
    state.region_id = region.region_id;
    state.rng = Rng(seed ^ 0xd6e8feb86659fd93ULL);

    VehicleAgent ego;
    ego.id = 0;
    ego.is_ego = true;
    ego.lane = region.spawn.ego_lane;
    ego.s_m = region.spawn.ego_s_m.sample(spawn_rng);
    ego.speed_mps = region.spawn.ego_speed_mps.sample(spawn_rng);
    ego.speed_setpoint_mps = ego.speed_mps;
    ego.idm = IdmParams{};  // ego uses only the [b, a] bounds of these
    state.agents.push_back(ego);
    state.ego_id = 0;

    int target_count = spawn_rng.uniform_int(region.spawn.min_vehicles, region.spawn.max_vehicles);
    int next_id = 1;
    for (int i = 0; i < target_count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            VehicleAgent v;
            v.id = next_id;
            v.lane = region.spawn.env_lanes.empty()
                         ? region.spawn.ego_lane
                         : region.spawn.env_lanes[spawn_rng.below(region.spawn.env_lanes.size())];
            v.s_m = region.spawn.env_s_m.sample(spawn_rng);
            v.speed_mps = region.spawn.env_speed_mps.sample(spawn_rng);
            v.idm = region.idm_distribution.sample(spawn_rng);
            double lane_len = region.geometry.lanes[static_cast<size_t>(v.lane)].length();
            if (v.s_m > lane_len - v.length_m) continue;
            bool ok = true;
            for (const auto& other : state.agents) {
                if (other.lane != v.lane) continue;
                double gap = std::fabs(other.s_m - v.s_m) - 0.5 * (other.length_m + v.length_m);
                // jam distance plus a headway term for the rear vehicle, so
                // closing speeds at spawn stay resolvable
                const VehicleAgent& rear = other.s_m < v.s_m ? other : v;
                if (gap < v.idm.jam_distance_m || gap < 0.8 * rear.speed_mps) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            state.agents.push_back(v);
            ++next_id;
            placed = true;
        }
        if (!placed)
            logf(LogLevel::Info, "sample_scenario: spawn space exhausted after 100 attempts, placed %d of %d",
                 next_id - 1, target_count);
    }
    return state;
}

StepResult step(SimState& state, Action ego_action, const RegionSpec& region, double dt) {
    if (state.terminal)
        throw std::invalid_argument("step: episode already terminal (" +
                                    std::string(terminal_cause_name(state.cause)) + ")");
    if (dt <= 0.0) throw std::invalid_argument("step: dt must be > 0");

    StepResult result;
    auto& agents = state.agents;
    const RoadGeometry& geom = region.geometry;

    // ---- decision phase -------------------------------------------------
    {
        VehicleAgent& ego = state.ego();
        const Lane& ego_lane = geom.lanes[static_cast<size_t>(ego.lane)];
        switch (ego_action) {
            case Action::Faster:
                ego.speed_setpoint_mps =
                    std::min(ego.speed_setpoint_mps + region.ego_speed_step_mps, ego_lane.speed_limit_mps);
                break;
            case Action::Slower:
                ego.speed_setpoint_mps = std::max(ego.speed_setpoint_mps - region.ego_speed_step_mps, 0.0);
                break;
            case Action::LaneLeft:
            case Action::LaneRight: {
                if (ego.changing()) break;
                int target = ego.lane + (ego_action == Action::LaneLeft ? -1 : +1);
                auto reach = geom.reachable_lanes(ego.lane, ego.s_m);
                if (std::find(reach.begin(), reach.end(), target) != reach.end()) {
                    begin_lane_change(ego, target, region);
                    result.events.ego_lane_change_started = true;
                }
                break;
            }
            case Action::Idle: break;
        }
    }

    // Environment vehicles decide in id order; each applied change updates
    // the occupancy the next vehicle sees, so two vehicles cannot claim the
    // same gap in one decision round.
    {
        auto occ = lane_occupancy(agents, geom.lane_count());
        for (size_t i = 0; i < agents.size(); ++i) {
            VehicleAgent& a = agents[i];
            if (!a.active || a.is_ego || a.changing()) continue;
            auto reach = geom.reachable_lanes(a.lane, a.s_m);
            if (reach.empty()) continue;

            MobilScene scene;
            scene.self_speed_mps = a.speed_mps;
            scene.self_params = a.idm;
            scene.current_leader = leader_info(agents, occ, region, static_cast<int>(i));
            bool on_ramp = geom.merge_for_ramp(a.lane) != nullptr;
            bool in_section = geom.in_merge_section(a.lane, a.s_m);
            scene.mandatory = on_ramp && in_section;
            scene.gated = on_ramp && in_section;

            for (int target : reach) {
                MobilCandidate c;
                c.direction = target < a.lane ? LaneChange::Left : LaneChange::Right;
                const auto& tlane = occ[static_cast<size_t>(target)];
                auto nl = leader_index(tlane, a.s_m, static_cast<int>(i));
                if (nl) {
                    const auto& lead = agents[static_cast<size_t>(*nl)];
                    c.new_leader = LeaderInfo{bumper_gap(a, lead), lead.speed_mps};
                }
                auto nf = follower_index(tlane, a.s_m, static_cast<int>(i));
                if (nf) {
                    const auto& fol = agents[static_cast<size_t>(*nf)];
                    c.new_follower_speed = fol.speed_mps;
                    c.new_follower_gap_to_self = bumper_gap(fol, a);
                    c.new_follower_params = fol.idm;
                    if (nl) {
                        const auto& lead = agents[static_cast<size_t>(*nl)];
                        c.new_follower_current_lead = LeaderInfo{bumper_gap(fol, lead), lead.speed_mps};
                    }
                }
                auto of = follower_index(occ[static_cast<size_t>(a.lane)], a.s_m, static_cast<int>(i));
                if (of) {
                    const auto& fol = agents[static_cast<size_t>(*of)];
                    c.old_follower_speed = fol.speed_mps;
                    c.old_follower_gap_to_self = bumper_gap(fol, a);
                    c.old_follower_params = fol.idm;
                    auto cl = leader_index(occ[static_cast<size_t>(a.lane)], a.s_m, static_cast<int>(i));
                    if (cl) {
                        const auto& lead = agents[static_cast<size_t>(*cl)];
                        c.old_follower_lead_after = LeaderInfo{bumper_gap(fol, lead), lead.speed_mps};
                    }
                }
                scene.candidates.push_back(std::move(c));
            }

            MobilDecision d = mobil_decision(scene, region.mobil, region.merge_lane_change_probability, state.rng);
            if (d.gate_attempted) {
                ++result.events.merge_gate_attempts;
                if (d.gate_passed) ++result.events.merge_gate_passes;
            }
            if (d.direction != LaneChange::Stay) {
                int target = a.lane + (d.direction == LaneChange::Left ? -1 : +1);
                begin_lane_change(a, target, region);
                ++result.events.env_lane_changes_started;
                occ = lane_occupancy(agents, geom.lane_count());
            }
        }
    }

    // ---- physics substeps ------------------------------------------------
    for (int sub = 0; sub < region.substeps_per_decision && !state.terminal; ++sub) {
        auto occ = lane_occupancy(agents, geom.lane_count());
        std::vector<double> accel(agents.size(), 0.0);
        for (size_t i = 0; i < agents.size(); ++i) {
            VehicleAgent& a = agents[i];
            if (!a.active) continue;
            if (a.is_ego) {
                double cmd = region.ego_speed_kp * (a.speed_setpoint_mps - a.speed_mps);
                accel[i] = std::clamp(cmd, a.idm.desired_deceleration_mps2, a.idm.max_acceleration_mps2);
            } else {
                auto leader = leader_info(agents, occ, region, static_cast<int>(i));
                IdmResult r = idm_acceleration(a.speed_mps, leader, a.idm);
                if (r.emergency) result.events.near_collision = true;
                accel[i] = r.accel_mps2;
            }
        }
        for (size_t i = 0; i < agents.size(); ++i) {
            VehicleAgent& a = agents[i];
            if (!a.active) continue;
            a.speed_mps = std::max(0.0, a.speed_mps + accel[i] * dt);
            a.s_m += a.speed_mps * dt;
            if (a.changing()) {
                a.change_progress += dt / region.lane_change_duration_s;
                if (a.change_progress >= 1.0) {
                    a.change_progress = 1.0;
                    a.l_offset_m = 0.0;
                    a.shadow_lane = -1;
                    if (a.is_ego) result.events.ego_lane_change_completed = true;
                } else {
                    a.l_offset_m = a.change_l0_m * 0.5 * (1.0 + std::cos(M_PI * a.change_progress));
                }
            }
        }

        // bounds: despawn at main-lane ends, hard stop at ramp ends
        for (auto& a : agents) {
            if (!a.active) continue;
            const Lane& lane = geom.lanes[static_cast<size_t>(a.lane)];
            bool on_ramp = geom.merge_for_ramp(a.lane) != nullptr;
            if (a.is_ego) {
                if (a.s_m + 0.5 * a.length_m >= lane.length()) {
                    state.terminal = true;
                    state.cause = TerminalCause::RoadEnd;
                    result.events.ego_road_end = true;
                }
                if (std::fabs(a.l_offset_m) > 2.0 * lane.width_m) {
                    state.terminal = true;
                    state.cause = TerminalCause::OffRoad;
                    result.events.ego_off_road = true;
                }
            } else if (a.s_m + 0.5 * a.length_m >= lane.length()) {
                if (on_ramp) {
                    a.s_m = lane.length() - 0.5 * a.length_m;
                    a.speed_mps = 0.0;
                } else {
                    a.active = false;
                }
            }
        }

        auto collisions = detect_collisions(state, region);
        for (auto& pr : collisions) {
            result.events.collisions.push_back(pr);
            if (pr.first == state.ego_id || pr.second == state.ego_id) {
                result.events.ego_collision = true;
                state.terminal = true;
                state.cause = TerminalCause::Collision;
            }
        }
        state.time_s += dt;
    }

    ++state.decision_count;
    if (!state.terminal && state.decision_count >= region.episode_horizon_decisions) {
        state.terminal = true;
        state.cause = TerminalCause::Horizon;
        result.events.horizon_reached = true;
    }

    // ---- reward context ---------------------------------------------------
    {
        const VehicleAgent& ego = state.ego();
        result.reward_ctx.collision = result.events.ego_collision;
        result.reward_ctx.ego_speed_mps = ego.speed_mps;
        result.reward_ctx.speed_limit_mps = geom.lanes[static_cast<size_t>(ego.lane)].speed_limit_mps;
        result.reward_ctx.lane_change_completed = result.events.ego_lane_change_completed;
        auto occ = lane_occupancy(agents, geom.lane_count());
        for (size_t i = 0; i < agents.size(); ++i) {
            const VehicleAgent& a = agents[i];
            if (!a.active || a.is_ego) continue;
            auto li = leader_index(occ[static_cast<size_t>(a.lane)], a.s_m, static_cast<int>(i));
            if (!li || !agents[static_cast<size_t>(*li)].is_ego) continue;
            auto leader = leader_info(agents, occ, region, static_cast<int>(i));
            IdmResult r = idm_acceleration(a.speed_mps, leader, a.idm);
            if (r.accel_mps2 < 0.0)
                result.reward_ctx.impacted.emplace_back(a.speed_mps, a.idm.desired_velocity_mps);
        }
    }
    return result;
}

// ---- region JSON ----------------------------------------------------------

namespace {

json range_to_json(const IdmRange& r) { return json::array({r.lo, r.hi}); }

IdmRange range_from_json(const json& j) {
    if (j.is_array()) return {j.at(0).get<double>(), j.at(1).get<double>()};
    double v = j.get<double>();
    return {v, v};
}

}  // namespace

std::string region_to_json_string(const RegionSpec& r) {
    json j;
    j["schema_version"] = 1;
    j["region_id"] = r.region_id;
    j["geometry"] = json::parse(geometry_to_json_string(r.geometry));
    j["merge_lane_change_probability"] = r.merge_lane_change_probability;
    j["idm_distribution"] = {
        {"desired_velocity_mps", range_to_json(r.idm_distribution.desired_velocity_mps)},
        {"desired_time_gap_s", range_to_json(r.idm_distribution.desired_time_gap_s)},
        {"jam_distance_m", range_to_json(r.idm_distribution.jam_distance_m)},
        {"velocity_exponent", range_to_json(r.idm_distribution.velocity_exponent)},
        {"max_acceleration_mps2", range_to_json(r.idm_distribution.max_acceleration_mps2)},
        {"desired_deceleration_mps2", range_to_json(r.idm_distribution.desired_deceleration_mps2)},
    };
    j["mobil"] = {{"politeness", r.mobil.politeness},
                  {"lane_change_threshold_mps2", r.mobil.lane_change_threshold_mps2},
                  {"safe_braking_mps2", r.mobil.safe_braking_mps2}};
    j["spawn"] = {{"ego_lane", r.spawn.ego_lane},
                  {"ego_s_m", range_to_json(r.spawn.ego_s_m)},
                  {"ego_speed_mps", range_to_json(r.spawn.ego_speed_mps)},
                  {"min_vehicles", r.spawn.min_vehicles},
                  {"max_vehicles", r.spawn.max_vehicles},
                  {"env_lanes", r.spawn.env_lanes},
                  {"env_s_m", range_to_json(r.spawn.env_s_m)},
                  {"env_speed_mps", range_to_json(r.spawn.env_speed_mps)}};
    j["episode_horizon_decisions"] = r.episode_horizon_decisions;
    j["physics_dt_s"] = r.physics_dt_s;
    j["substeps_per_decision"] = r.substeps_per_decision;
    j["lane_change_duration_s"] = r.lane_change_duration_s;
    j["ego_speed_step_mps"] = r.ego_speed_step_mps;
    j["ego_speed_kp"] = r.ego_speed_kp;
    return j.dump(2);
}

RegionSpec region_from_json_string(const std::string& s) {
    json j = json::parse(s);
    RegionSpec r;
    r.region_id = j.at("region_id").get<int>();
    r.geometry = geometry_from_json_string(j.at("geometry").dump());
    r.merge_lane_change_probability = j.at("merge_lane_change_probability").get<double>();
    if (j.contains("idm_distribution")) {
        const auto& d = j["idm_distribution"];
        auto get = [&](const char* key, IdmRange def) {
            return d.contains(key) ? range_from_json(d[key]) : def;
        };
        r.idm_distribution.desired_velocity_mps = get("desired_velocity_mps", r.idm_distribution.desired_velocity_mps);
        r.idm_distribution.desired_time_gap_s = get("desired_time_gap_s", r.idm_distribution.desired_time_gap_s);
        r.idm_distribution.jam_distance_m = get("jam_distance_m", r.idm_distribution.jam_distance_m);
        r.idm_distribution.velocity_exponent = get("velocity_exponent", r.idm_distribution.velocity_exponent);
        r.idm_distribution.max_acceleration_mps2 =
            get("max_acceleration_mps2", r.idm_distribution.max_acceleration_mps2);
        r.idm_distribution.desired_deceleration_mps2 =
            get("desired_deceleration_mps2", r.idm_distribution.desired_deceleration_mps2);
    }
    if (j.contains("mobil")) {
        r.mobil.politeness = j["mobil"].value("politeness", r.mobil.politeness);
        r.mobil.lane_change_threshold_mps2 =
            j["mobil"].value("lane_change_threshold_mps2", r.mobil.lane_change_threshold_mps2);
        r.mobil.safe_braking_mps2 = j["mobil"].value("safe_braking_mps2", r.mobil.safe_braking_mps2);
    }
    const auto& sp = j.at("spawn");
    r.spawn.ego_lane = sp.at("ego_lane").get<int>();
    r.spawn.ego_s_m = range_from_json(sp.at("ego_s_m"));
    r.spawn.ego_speed_mps = range_from_json(sp.at("ego_speed_mps"));
    r.spawn.min_vehicles = sp.at("min_vehicles").get<int>();
    r.spawn.max_vehicles = sp.at("max_vehicles").get<int>();
    r.spawn.env_lanes = sp.at("env_lanes").get<std::vector<int>>();
    r.spawn.env_s_m = range_from_json(sp.at("env_s_m"));
    r.spawn.env_speed_mps = range_from_json(sp.at("env_speed_mps"));
    r.episode_horizon_decisions = j.at("episode_horizon_decisions").get<int>();
    r.physics_dt_s = j.value("physics_dt_s", r.physics_dt_s);
    r.substeps_per_decision = j.value("substeps_per_decision", r.substeps_per_decision);
    r.lane_change_duration_s = j.value("lane_change_duration_s", r.lane_change_duration_s);
    r.ego_speed_step_mps = j.value("ego_speed_step_mps", r.ego_speed_step_mps);
    r.ego_speed_kp = j.value("ego_speed_kp", r.ego_speed_kp);
    r.validate();
    return r;
}

RegionSpec load_region_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open region file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return region_from_json_string(ss.str());
}

}  // namespace dle
