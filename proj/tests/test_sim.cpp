#include <doctest.h>

#include "dle/graph.hpp"
#include "dle/sim.hpp"
#include "test_helpers.hpp"

using namespace dle;
using namespace dle::testing;

TEST_CASE("idm: stationary vehicle with free road accelerates at the maximum") {
    IdmParams p;
    CHECK(idm_acceleration(0.0, std::nullopt, p).accel_mps2 == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("idm: free flow at the desired velocity is an equilibrium") {
    IdmParams p;
    double a = idm_acceleration(p.desired_velocity_mps, std::nullopt, p).accel_mps2;
    CHECK(a == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("idm: formula oracle for a same-speed leader") {
    IdmParams p;  // table defaults, delta = 4
    double v = 10.0, gap = 25.0;
    IdmResult r = idm_acceleration(v, LeaderInfo{gap, v}, p);

    // independent spreadsheet-style evaluation
    double v0 = 50.0 / 3.6, T = 1.5, g0 = 5.0, a = 3.0, b = -5.0, delta = 4.0;
    double s_star = g0 + v * T + v * (v - v) / (2.0 * std::sqrt(a * std::fabs(b)));
    double expected = a * (1.0 - std::pow(v / v0, delta) - (s_star / gap) * (s_star / gap));
    CHECK(std::fabs(r.accel_mps2 - expected) <= 1e-9);
    CHECK_FALSE(r.emergency);
}

TEST_CASE("idm: non-positive gap triggers emergency braking") {
    IdmParams p;
    IdmResult r = idm_acceleration(5.0, LeaderInfo{-0.5, 5.0}, p);
    CHECK(r.accel_mps2 == p.desired_deceleration_mps2);
    CHECK(r.emergency);
}

TEST_CASE("idm: output always clamped to [b, a]") {
    IdmParams p;
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        double v = rng.uniform(0.0, 30.0);
        std::optional<LeaderInfo> leader;
        if (rng.bernoulli(0.8)) leader = LeaderInfo{rng.uniform(0.1, 100.0), rng.uniform(0.0, 30.0)};
        double a = idm_acceleration(v, leader, p).accel_mps2;
        CHECK(a >= p.desired_deceleration_mps2);
        CHECK(a <= p.max_acceleration_mps2);
    }
}

namespace {

MobilScene unopposed_scene() {
    MobilScene s;
    s.self_speed_mps = 10.0;
    s.current_leader = LeaderInfo{8.0, 4.0};  // crawling leader ahead
    MobilCandidate c;
    c.direction = LaneChange::Left;  // empty target lane
    s.candidates.push_back(c);
    return s;
}

}  // namespace

TEST_CASE("mobil: unopposed incentive with an open target lane changes") {
    MobilParams mp;
    Rng rng(1);
    MobilScene s = unopposed_scene();
    MobilDecision d = mobil_decision(s, mp, 1.0, rng);
    CHECK(d.direction == LaneChange::Left);
}

TEST_CASE("mobil: safety veto overrides any incentive") {
    MobilParams mp;
    Rng rng(1);
    MobilScene s = unopposed_scene();
    // fast follower right behind in the target lane
    s.candidates[0].new_follower_speed = 20.0;
    s.candidates[0].new_follower_gap_to_self = 1.0;
    s.candidates[0].new_follower_params = IdmParams{};
    MobilDecision d = mobil_decision(s, mp, 1.0, rng);
    CHECK(d.direction == LaneChange::Stay);
}

TEST_CASE("mobil: gate 0 stays, gate 1 changes, frequency tracks the gate") {
    MobilParams mp;
    MobilScene s = unopposed_scene();
    s.mandatory = true;
    s.gated = true;

    Rng rng0(7);
    CHECK(mobil_decision(s, mp, 0.0, rng0).direction == LaneChange::Stay);
    Rng rng1(7);
    CHECK(mobil_decision(s, mp, 1.0, rng1).direction == LaneChange::Left);

    Rng rng(99);
    int passes = 0, attempts = 0;
    for (int i = 0; i < 1000; ++i) {
        MobilDecision d = mobil_decision(s, mp, 0.3, rng);
        attempts += d.gate_attempted ? 1 : 0;
        passes += d.gate_passed ? 1 : 0;
    }
    CHECK(attempts == 1000);
    CHECK(std::fabs(static_cast<double>(passes) / attempts - 0.3) <= 0.03);
}

TEST_CASE("lane_coordinates: pose on the centerline, aligned") {
    RegionSpec r = straight_region(1, 1);
    LaneCoords c = lane_coordinates({50.0, 0.0, 0.0}, r.geometry, 0);
    CHECK(c.s == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(c.l == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(c.dtheta == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_FALSE(c.clamped);
}

TEST_CASE("lane_coordinates: straight lane along +x, lateral offset is left-positive") {
    RegionSpec r = straight_region(1, 1);
    LaneCoords c = lane_coordinates({10.0, 2.0, 0.0}, r.geometry, 0);
    CHECK(c.s == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(c.l == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(c.dtheta == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("lane_coordinates: quarter-circle closed form") {
    // radius 50 circle sampled finely; pose at the 45 degree vertex
    double R = 50.0;
    int n = 4000;
    Lane lane;
    for (int i = 0; i <= n; ++i) {
        double th = (M_PI / 2.0) * i / n;
        lane.centerline.push_back({R * std::sin(th), R * (1.0 - std::cos(th))});
    }
    lane.finalize();
    RoadGeometry g;
    g.lanes.push_back(lane);
    g.validate();

    double th = M_PI / 4.0;
    Pose pose{R * std::sin(th), R * (1.0 - std::cos(th)), th};  // heading = tangent angle
    LaneCoords c = lane_coordinates(pose, g, 0);
    CHECK(std::fabs(c.s - R * M_PI / 4.0) <= 1e-6);
    CHECK(std::fabs(c.l) <= 1e-6);
    CHECK(std::fabs(c.dtheta) <= 1e-6);
}

TEST_CASE("lane_coordinates: pose beyond the lane extent is clamped and flagged") {
    RegionSpec r = straight_region(1, 1, 100.0);
    LaneCoords c = lane_coordinates({150.0, 0.0, 0.0}, r.geometry, 0);
    CHECK(c.clamped);
    CHECK(c.s == doctest::Approx(100.0));
}

// ---- collision detection against an independent oracle ---------------------

namespace {

std::array<Vec2, 4> rect_corners(const OrientedRect& r) {
    std::array<Vec2, 4> out;
    double c = std::cos(r.heading), s = std::sin(r.heading);
    double hl = 0.5 * r.length, hw = 0.5 * r.width;
    const double dx[4] = {-hl, hl, hl, -hl};
    const double dy[4] = {-hw, -hw, hw, hw};
    for (int k = 0; k < 4; ++k)
        out[static_cast<size_t>(k)] = {r.cx + dx[k] * c - dy[k] * s, r.cy + dx[k] * s + dy[k] * c};
    return out;
}

bool point_in_rect(Vec2 p, const OrientedRect& r, double shrink) {
    double c = std::cos(r.heading), s = std::sin(r.heading);
    Vec2 d{p.x - r.cx, p.y - r.cy};
    double lx = d.x * c + d.y * s;
    double ly = -d.x * s + d.y * c;
    return std::fabs(lx) <= 0.5 * r.length - shrink && std::fabs(ly) <= 0.5 * r.width - shrink;
}

// dense point-sampling: grid over rect a (включая boundary), tested inside b
bool grid_hit(const OrientedRect& a, const OrientedRect& b, double shrink) {
    int nx = 80, ny = 32;
    double c = std::cos(a.heading), s = std::sin(a.heading);
    for (int i = 0; i <= nx; ++i) {
        for (int j = 0; j <= ny; ++j) {
            double lx = -0.5 * a.length + a.length * i / nx;
            double ly = -0.5 * a.width + a.width * j / ny;
            Vec2 p{a.cx + lx * c - ly * s, a.cy + lx * s + ly * c};
            if (point_in_rect(p, b, shrink)) return true;
        }
    }
    return false;
}

double seg_dist(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
    auto clamp01 = [](double t) { return std::clamp(t, 0.0, 1.0); };
    auto point_seg = [&](Vec2 p, Vec2 s0, Vec2 s1) {
        Vec2 d = s1 - s0;
        double len2 = dot(d, d);
        double t = len2 > 0 ? clamp01(dot(p - s0, d) / len2) : 0.0;
        Vec2 proj = s0 + t * d;
        return norm(p - proj);
    };
    double best = std::min({point_seg(a0, b0, b1), point_seg(a1, b0, b1), point_seg(b0, a0, a1),
                            point_seg(b1, a0, a1)});
    // crossing segments have distance 0
    auto orient = [](Vec2 p, Vec2 q, Vec2 r) { return cross(q - p, r - p); };
    double o1 = orient(a0, a1, b0), o2 = orient(a0, a1, b1);
    double o3 = orient(b0, b1, a0), o4 = orient(b0, b1, a1);
    if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0))) return 0.0;
    return best;
}

// exact boundary distance: min over the 4x4 edge pairs (0 when crossing)
double rect_boundary_distance(const OrientedRect& a, const OrientedRect& b) {
    auto ca = rect_corners(a);
    auto cb = rect_corners(b);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            best = std::min(best, seg_dist(ca[static_cast<size_t>(i)], ca[static_cast<size_t>((i + 1) % 4)],
                                           cb[static_cast<size_t>(j)], cb[static_cast<size_t>((j + 1) % 4)]));
    return best;
}

}  // namespace

TEST_CASE("collision: far apart and co-located fixtures") {
    RegionSpec r = straight_region(1, 1);
    SimState st;
    st.region_id = 1;
    VehicleAgent a;
    a.id = 0;
    a.is_ego = true;
    a.lane = 0;
    a.s_m = 10.0;
    st.agents.push_back(a);
    VehicleAgent b = a;
    b.id = 1;
    b.is_ego = false;
    b.s_m = 110.0;
    st.agents.push_back(b);
    st.ego_id = 0;
    CHECK(detect_collisions(st, r).empty());

    st.agents[1].s_m = 10.0;  // co-located
    auto pairs = detect_collisions(st, r);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0] == std::pair<int, int>(0, 1));
}

TEST_CASE("collision: separating-axis agrees with the point-sampling oracle") {
    Rng rng(2024);
    int confident = 0;
    const int cases = 10000;
    for (int i = 0; i < cases; ++i) {
        OrientedRect a{0.0, 0.0, rng.uniform(0.0, 2 * M_PI), 5.0, 2.0};
        OrientedRect b{rng.uniform(-7.0, 7.0), rng.uniform(-4.0, 4.0), rng.uniform(0.0, 2 * M_PI), 5.0,
                       2.0};
        bool sat = rects_overlap(a, b);

        // confident overlap: sampled hit with both rects shrunk by 1 cm;
        // confident disjoint: boundaries > 1 cm apart and no containment
        bool shrunk_hit = grid_hit(a, b, 0.01) || grid_hit(b, a, 0.01);
        bool contained = point_in_rect({b.cx, b.cy}, a, 0.0) || point_in_rect({a.cx, a.cy}, b, 0.0);
        double dist = rect_boundary_distance(a, b);

        if (shrunk_hit) {
            ++confident;
            CHECK(sat);
        } else if (!contained && dist > 0.01) {
            ++confident;
            CHECK_FALSE(sat);
        }
    }
    // the margin band should exclude only a sliver of cases
    CHECK(confident > cases * 9 / 10);
}

TEST_CASE("collision detection is symmetric and irreflexive") {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        OrientedRect a{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 2 * M_PI), 5.0, 2.0};
        OrientedRect b{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 2 * M_PI), 5.0, 2.0};
        CHECK(rects_overlap(a, b) == rects_overlap(b, a));
        CHECK(rects_overlap(a, a));
    }
}

// ---- scenario sampling ------------------------------------------------------

TEST_CASE("sample_scenario: deterministic in (region, seed)") {
    RegionSpec r = merge_region(1, 0.2);
    SimState a = sample_scenario(r, 42);
    SimState b = sample_scenario(r, 42);
    REQUIRE(a.agents.size() == b.agents.size());
    for (size_t i = 0; i < a.agents.size(); ++i) {
        CHECK(a.agents[i].s_m == b.agents[i].s_m);
        CHECK(a.agents[i].speed_mps == b.agents[i].speed_mps);
        CHECK(a.agents[i].lane == b.agents[i].lane);
        CHECK(a.agents[i].idm.velocity_exponent == b.agents[i].idm.velocity_exponent);
    }
    SimState c = sample_scenario(r, 43);
    bool any_diff = c.agents.size() != a.agents.size();
    for (size_t i = 0; !any_diff && i < std::min(a.agents.size(), c.agents.size()); ++i)
        any_diff = a.agents[i].s_m != c.agents[i].s_m;
    CHECK(any_diff);
}

TEST_CASE("sample_scenario: 1000 samples, zero initial collisions, 4-8 vehicles") {
    RegionSpec r = merge_region(1, 0.2);
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        SimState st = sample_scenario(r, seed);
        CHECK(detect_collisions(st, r).empty());
        int env = static_cast<int>(st.agents.size()) - 1;
        CHECK(env >= 0);
        CHECK(env <= 8);
        for (const auto& a : st.agents) {
            CHECK(a.speed_mps >= 0.0);
            CHECK(r.geometry.valid_lane(a.lane));
            if (!a.is_ego) {
                CHECK(a.idm.velocity_exponent >= 3.4);
                CHECK(a.idm.velocity_exponent <= 4.5);
            }
        }
    }
}

// ---- stepping ---------------------------------------------------------------

TEST_CASE("step: hold on a straight empty lane leaves heading and offset clean") {
    RegionSpec r = straight_region(1, 1);
    r.episode_horizon_decisions = 200;
    SimState st = sample_scenario(r, 1);
    for (int i = 0; i < 100; ++i) {
        REQUIRE_FALSE(st.terminal);
        step(st, Action::Idle, r);
        Pose p = agent_pose(st.ego(), r);
        CHECK(std::fabs(p.heading) <= 1e-9);
        CHECK(std::fabs(st.ego().l_offset_m) <= 1e-6);
    }
}

TEST_CASE("step: acting on a terminal state is rejected") {
    RegionSpec r = straight_region(1, 1);
    r.episode_horizon_decisions = 1;
    SimState st = sample_scenario(r, 1);
    step(st, Action::Idle, r);
    CHECK(st.terminal);
    CHECK(st.cause == TerminalCause::Horizon);
    CHECK_THROWS_AS(step(st, Action::Idle, r), std::invalid_argument);
}

TEST_CASE("step: forced head-to-tail overlap reports a collision exactly per the rectangle test") {
    RegionSpec r = straight_region(1, 1);
    r.spawn.ego_speed_mps = {20.0, 20.0};
    SimState st = sample_scenario(r, 1);
    VehicleAgent block;
    block.id = 1;
    block.lane = 0;
    block.s_m = st.ego().s_m + 8.0;
    block.speed_mps = 0.0;
    block.idm = IdmParams{};
    // environment vehicle would brake; make it a wall by placing it stopped
    st.agents.push_back(block);

    bool collided = false;
    for (int i = 0; i < 40 && !st.terminal; ++i) {
        StepResult res = step(st, Action::Faster, r);
        bool rect_overlap_now = !detect_collisions(st, r).empty();
        if (res.events.ego_collision) {
            collided = true;
            CHECK(rect_overlap_now);
            break;
        }
    }
    CHECK(collided);
    CHECK(st.cause == TerminalCause::Collision);
}

TEST_CASE("step: platoon behind a steady leader converges to the analytic equilibrium gap") {
    RegionSpec r = straight_region(1, 1, 4000.0, 50.0);
    r.episode_horizon_decisions = 10000;
    SimState st;
    st.region_id = 1;
    st.ego_id = 0;

    IdmParams p;
    p.desired_velocity_mps = 50.0;
    p.velocity_exponent = 4.0;

    VehicleAgent leader;  // ego as the leader with a fixed setpoint
    leader.id = 0;
    leader.is_ego = true;
    leader.lane = 0;
    leader.s_m = 600.0;
    leader.speed_mps = 15.0;
    leader.speed_setpoint_mps = 15.0;
    leader.idm = IdmParams{};
    st.agents.push_back(leader);
    for (int i = 0; i < 5; ++i) {
        VehicleAgent f;
        f.id = i + 1;
        f.lane = 0;
        f.s_m = 600.0 - 30.0 * (i + 1);
        f.speed_mps = 15.0;
        f.idm = p;
        st.agents.push_back(f);
    }

    for (int i = 0; i < 240 && !st.terminal; ++i) step(st, Action::Idle, r);  // 120 s

    double gap_eq = (p.jam_distance_m + 15.0 * p.desired_time_gap_s) /
                    std::sqrt(1.0 - std::pow(15.0 / p.desired_velocity_mps, p.velocity_exponent));
    for (size_t i = 1; i < st.agents.size(); ++i) {
        const auto& front = st.agents[i - 1];
        const auto& back = st.agents[i];
        double gap = (front.s_m - back.s_m) - 0.5 * (front.length_m + back.length_m);
        CHECK(std::fabs(back.speed_mps - 15.0) <= 0.15);          // within 1%
        CHECK(std::fabs(gap - gap_eq) <= 0.02 * gap_eq);          // within 2%
    }
}

TEST_CASE("step: determinism including the rng stream") {
    RegionSpec r = merge_region(2, 0.8);
    auto run = [&](uint64_t seed) {
        SimState st = sample_scenario(r, seed);
        std::vector<double> trace;
        for (int i = 0; i < 30 && !st.terminal; ++i) {
            step(st, Action::Idle, r);
            for (const auto& a : st.agents) {
                trace.push_back(a.s_m);
                trace.push_back(a.speed_mps);
                trace.push_back(static_cast<double>(a.lane));
            }
        }
        return trace;
    };
    CHECK(run(7) == run(7));
}

TEST_CASE("region json: round trip preserves the spec") {
    RegionSpec r = merge_region(2, 0.8);
    std::string blob = region_to_json_string(r);
    RegionSpec back = region_from_json_string(blob);
    CHECK(back.region_id == r.region_id);
    CHECK(back.merge_lane_change_probability == r.merge_lane_change_probability);
    CHECK(back.geometry.lane_count() == r.geometry.lane_count());
    CHECK(region_to_json_string(back) == blob);
}

TEST_CASE("region effect: merge gate frequencies differ across regions") {
    RegionSpec lo = merge_region(1, 0.2);
    RegionSpec hi = merge_region(2, 0.8);
    auto pass_rate = [](const RegionSpec& region) {
        long long attempts = 0, passes = 0;
        for (uint64_t seed = 0; seed < 150; ++seed) {
            SimState st = sample_scenario(region, seed);
            for (int i = 0; i < 40 && !st.terminal; ++i) {
                StepResult res = step(st, Action::Idle, region);
                attempts += res.events.merge_gate_attempts;
                passes += res.events.merge_gate_passes;
            }
        }
        REQUIRE(attempts > 100);
        return static_cast<double>(passes) / static_cast<double>(attempts);
    };
    double f_lo = pass_rate(lo);
    double f_hi = pass_rate(hi);
    CHECK(f_hi - f_lo >= (0.8 - 0.2) - 0.05);
}

TEST_CASE("environment vehicles never change lanes against the safety veto") {
    // indirect check: across seeded merge episodes no env-env collision occurs
    RegionSpec r = merge_region(2, 0.8);
    int env_collisions = 0;
    for (uint64_t seed = 0; seed < 60; ++seed) {
        SimState st = sample_scenario(r, seed);
        for (int i = 0; i < 60 && !st.terminal; ++i) {
            StepResult res = step(st, Action::Slower, r);
            for (auto [a, b] : res.events.collisions)
                if (a != st.ego_id && b != st.ego_id) ++env_collisions;
        }
    }
    CHECK(env_collisions == 0);
}
