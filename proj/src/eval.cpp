#include "dle/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "dle/log.hpp"

namespace dle {

using nlohmann::json;

std::pair<double, double> EpisodeLog::recompute_returns(double gamma) const {
    double undisc = 0.0, disc = 0.0, g = 1.0;
    for (const auto& s : steps) {
        undisc += s.reward.total;
        disc += g * s.reward.total;
        g *= gamma;
    }
    return {undisc, disc};
}

namespace {

json step_to_json(const EpisodeStep& s) {
    json j;
    j["step"] = s.step;
    j["action"] = s.action;
    j["reward"] = {{"r_c", s.reward.r_c},
                   {"r_v", s.reward.r_v},
                   {"r_l", s.reward.r_l},
                   {"r_p", s.reward.r_p},
                   {"total", s.reward.total}};
    j["ego"] = {{"x_m", s.ego_x},       {"y_m", s.ego_y},   {"heading_rad", s.ego_heading},
                {"s_m", s.ego_s},       {"l_m", s.ego_l},   {"speed_mps", s.ego_speed},
                {"lane", s.ego_lane}};
    json others = json::array();
    for (const auto& o : s.others) others.push_back(o);
    j["others"] = others;
    j["events"] = s.events;
    json cols = json::array();
    for (const auto& [a, b] : s.collisions) cols.push_back({a, b});
    j["collisions"] = cols;
    return j;
}

EpisodeStep step_from_json(const json& j) {
    EpisodeStep s;
    s.step = j.at("step").get<int>();
    s.action = j.at("action").get<int>();
    const auto& r = j.at("reward");
    s.reward.r_c = r.at("r_c").get<double>();
    s.reward.r_v = r.at("r_v").get<double>();
    s.reward.r_l = r.at("r_l").get<double>();
    s.reward.r_p = r.at("r_p").get<double>();
    s.reward.total = r.at("total").get<double>();
    const auto& e = j.at("ego");
    s.ego_x = e.at("x_m").get<double>();
    s.ego_y = e.at("y_m").get<double>();
    s.ego_heading = e.at("heading_rad").get<double>();
    s.ego_s = e.at("s_m").get<double>();
    s.ego_l = e.at("l_m").get<double>();
    s.ego_speed = e.at("speed_mps").get<double>();
    s.ego_lane = e.at("lane").get<int>();
    for (const auto& o : j.at("others")) s.others.push_back(o.get<std::array<double, 5>>());
    s.events = j.at("events").get<std::vector<std::string>>();
    for (const auto& c : j.at("collisions")) s.collisions.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
    return s;
}

}  // namespace

std::string episode_to_jsonl(const EpisodeLog& log) {
    std::string out;
    json header;
    header["type"] = "header";
    header["region_id"] = log.region_id;
    header["seed"] = log.seed;
    header["policy_kind"] = log.policy_kind;
    header["variant"] = log.variant;
    out += header.dump() + "\n";
    for (const auto& s : log.steps) {
        json j = step_to_json(s);
        j["type"] = "step";
        out += j.dump() + "\n";
    }
    json footer;
    footer["type"] = "summary";
    footer["terminal_cause"] = log.terminal_cause;
    footer["undiscounted_return"] = log.undiscounted_return;
    footer["discounted_return"] = log.discounted_return;
    footer["valid"] = log.valid;
    footer["steps"] = log.steps.size();
    out += footer.dump() + "\n";
    return out;
}

EpisodeLog episode_from_jsonl(const std::string& text) {
    EpisodeLog log;
    std::istringstream in(text);
    std::string line;
    bool have_header = false, have_summary = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        std::string type = j.value("type", "");
        if (type == "header") {
            log.region_id = j.at("region_id").get<int>();
            log.seed = j.at("seed").get<uint64_t>();
            log.policy_kind = j.value("policy_kind", "");
            log.variant = j.value("variant", "");
            have_header = true;
        } else if (type == "step") {
            log.steps.push_back(step_from_json(j));
        } else if (type == "summary") {
            log.terminal_cause = j.at("terminal_cause").get<std::string>();
            log.undiscounted_return = j.at("undiscounted_return").get<double>();
            log.discounted_return = j.at("discounted_return").get<double>();
            log.valid = j.value("valid", true);
            have_summary = true;
        }
    }
    if (!have_header || !have_summary)
        throw std::runtime_error("episode_from_jsonl: missing header or summary record");
    return log;
}

namespace {

EpisodeLog run_one_episode(const PolicyHandle& policy, const RegionSpec& region, uint64_t seed,
                           const RewardWeights& weights) {
    EpisodeLog log;
    log.region_id = region.region_id;
    log.seed = seed;
    log.policy_kind = policy_kind_name(policy.kind);
    log.variant = variant_name(policy.acting_variant(region.region_id));

    SimState state = sample_scenario(region, seed);
    double g = 1.0;
    try {
        while (!state.terminal) {
            Action a = policy.act(state, region);
            StepResult sr = step(state, a, region);
            RewardBreakdown rb = reward(sr.reward_ctx, weights);

            EpisodeStep es;
            es.step = state.decision_count - 1;
            es.action = static_cast<int>(a);
            es.reward = rb;
            const VehicleAgent& ego = state.ego();
            Pose pose = agent_pose(ego, region);
            LaneCoords lc = lane_coordinates(pose, region.geometry, ego.lane);
            es.ego_x = pose.x;
            es.ego_y = pose.y;
            es.ego_heading = pose.heading;
            es.ego_s = lc.s;
            es.ego_l = lc.l;
            es.ego_speed = ego.speed_mps;
            es.ego_lane = ego.lane;
            for (const auto& v : state.agents) {
                if (v.is_ego || !v.active) continue;
                es.others.push_back({static_cast<double>(v.id), static_cast<double>(v.lane), v.s_m,
                                     v.l_offset_m, v.speed_mps});
            }
            if (sr.events.ego_collision) es.events.push_back("ego_collision");
            if (sr.events.ego_off_road) es.events.push_back("ego_off_road");
            if (sr.events.ego_road_end) es.events.push_back("ego_road_end");
            if (sr.events.ego_lane_change_started) es.events.push_back("ego_lane_change_started");
            if (sr.events.ego_lane_change_completed) es.events.push_back("ego_lane_change_completed");
            if (sr.events.horizon_reached) es.events.push_back("horizon");
            for (int k = 0; k < sr.events.env_lane_changes_started; ++k)
                es.events.push_back("env_lane_change_started");
            es.collisions = sr.events.collisions;
            log.steps.push_back(std::move(es));

            log.undiscounted_return += rb.total;
            log.discounted_return += g * rb.total;
            g *= weights.gamma;
        }
        log.terminal_cause = terminal_cause_name(state.cause);
    } catch (const std::exception& e) {
        logf(LogLevel::Warn, "run_episodes: episode seed %llu failed: %s",
             static_cast<unsigned long long>(seed), e.what());
        log.valid = false;
        log.terminal_cause = "invalid";
    }
    return log;
}

}  // namespace

std::vector<EpisodeLog> run_episodes(const PolicyHandle& policy, const RegionSpec& region, int n,
                                     uint64_t seed, const RewardWeights& weights, int workers) {
    if (n < 1) throw std::invalid_argument("run_episodes: n must be >= 1");
    std::vector<EpisodeLog> logs(static_cast<size_t>(n));
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) logs[static_cast<size_t>(i)] = run_one_episode(policy, region, seed + static_cast<uint64_t>(i), weights);
        return logs;
    }
    std::vector<std::thread> pool;
    std::atomic<int> cursor{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                int i = cursor.fetch_add(1);
                if (i >= n) return;
                logs[static_cast<size_t>(i)] = run_one_episode(policy, region, seed + static_cast<uint64_t>(i), weights);
            }
        });
    }
    for (auto& t : pool) t.join();
    return logs;
}

RegionMetrics summarize(const std::vector<EpisodeLog>& logs, int region_id) {
    RegionMetrics m;
    m.region_id = region_id;
    std::vector<double> returns;
    for (const auto& log : logs) {
        if (!log.valid) {
            ++m.invalid_episodes;
            continue;
        }
        ++m.episodes;
        returns.push_back(log.undiscounted_return);
        m.mean_return += log.undiscounted_return;
        m.mean_discounted += log.discounted_return;
        if (log.terminal_cause == "collision") ++m.collision_count;
    }
    if (m.episodes > 0) {
        m.mean_return /= m.episodes;
        m.mean_discounted /= m.episodes;
        m.collision_rate = static_cast<double>(m.collision_count) / m.episodes;
        if (m.episodes > 1) {
            double var = 0.0;
            for (double r : returns) var += (r - m.mean_return) * (r - m.mean_return);
            var /= (m.episodes - 1);
            m.ci95_halfwidth = 1.96 * std::sqrt(var / m.episodes);
        }
    }
    return m;
}

double apr(const std::vector<double>& policy_returns, const std::vector<double>& optimal_returns) {
    if (policy_returns.size() != optimal_returns.size())
        throw std::invalid_argument("apr: region lists must align");
    if (policy_returns.empty()) throw std::invalid_argument("apr: empty region lists");
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < policy_returns.size(); ++i) {
        num += policy_returns[i];
        den += optimal_returns[i];
    }
    if (den == 0.0) throw std::invalid_argument("apr: optimal returns sum to zero");
    return num / den;
}

double collision_rate(const std::vector<EpisodeLog>& logs) {
    if (logs.empty()) throw std::invalid_argument("collision_rate: no episodes");
    int total = 0, collisions = 0;
    for (const auto& log : logs) {
        if (!log.valid) continue;
        ++total;
        if (log.terminal_cause == "collision") ++collisions;
    }
    if (total == 0) throw std::invalid_argument("collision_rate: no valid episodes");
    return static_cast<double>(collisions) / total;
}

double value_gap(const PolicyHandle& policy, const PolicyHandle& reference, const RegionSpec& region,
                 int n, uint64_t seed, const RewardWeights& weights) {
    auto a = run_episodes(policy, region, n, seed, weights);
    auto b = run_episodes(reference, region, n, seed, weights);
    double ma = 0.0, mb = 0.0;
    int na = 0, nb = 0;
    for (const auto& log : a)
        if (log.valid) {
            ma += log.discounted_return;
            ++na;
        }
    for (const auto& log : b)
        if (log.valid) {
            mb += log.discounted_return;
            ++nb;
        }
    if (na == 0 || nb == 0) throw std::runtime_error("value_gap: no valid episodes");
    return std::fabs(ma / na - mb / nb);
}

std::string MetricsReport::to_json_string() const {
    json j;
    j["format_version"] = 1;
    j["policy_kind"] = policy_kind;
    j["checkpoint_hash"] = checkpoint_hash;
    json regions_j = json::array();
    for (const auto& r : regions) {
        regions_j.push_back({{"region_id", r.region_id},
                             {"episodes", r.episodes},
                             {"invalid_episodes", r.invalid_episodes},
                             {"mean_return", r.mean_return},
                             {"ci95_halfwidth", r.ci95_halfwidth},
                             {"mean_discounted", r.mean_discounted},
                             {"collision_count", r.collision_count},
                             {"collision_rate", r.collision_rate},
                             {"cross_region", r.cross_region}});
    }
    j["regions"] = regions_j;
    if (apr) j["apr"] = *apr;
    return j.dump(2);
}

MetricsReport MetricsReport::from_json_string(const std::string& s) {
    json j = json::parse(s);
    MetricsReport m;
    m.policy_kind = j.at("policy_kind").get<std::string>();
    m.checkpoint_hash = j.value("checkpoint_hash", "");
    for (const auto& rj : j.at("regions")) {
        RegionMetrics r;
        r.region_id = rj.at("region_id").get<int>();
        r.episodes = rj.at("episodes").get<int>();
        r.invalid_episodes = rj.at("invalid_episodes").get<int>();
        r.mean_return = rj.at("mean_return").get<double>();
        r.ci95_halfwidth = rj.at("ci95_halfwidth").get<double>();
        r.mean_discounted = rj.at("mean_discounted").get<double>();
        r.collision_count = rj.at("collision_count").get<int>();
        r.collision_rate = rj.at("collision_rate").get<double>();
        r.cross_region = rj.at("cross_region").get<bool>();
        m.regions.push_back(r);
    }
    if (j.contains("apr")) m.apr = j["apr"].get<double>();
    return m;
}

std::string MetricsReport::to_table() const {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-8s %-8s %-10s %-10s %-10s %s\n", "policy", "region",
                  "mean_ret", "ci95", "R_c", "episodes");
    out += buf;
    for (const auto& r : regions) {
        std::snprintf(buf, sizeof(buf), "%-8s %-8d %-10.3f %-10.3f %-10.3f %d%s\n", policy_kind.c_str(),
                      r.region_id, r.mean_return, r.ci95_halfwidth, r.collision_rate, r.episodes,
                      r.cross_region ? "  [cross-region]" : "");
        out += buf;
    }
    return out;
}

}  // namespace dle
