#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dle/policies.hpp"
#include "dle/reward.hpp"

namespace dle {

struct EpisodeStep {
    int step = 0;
    int action = 0;
    RewardBreakdown reward;
    // ego summary
    double ego_x = 0.0, ego_y = 0.0, ego_heading = 0.0;
    double ego_s = 0.0, ego_l = 0.0, ego_speed = 0.0;
    int ego_lane = 0;
    // compact others summary: (id, lane, s, l, speed)
    std::vector<std::array<double, 5>> others;
    std::vector<std::string> events;
    std::vector<std::pair<int, int>> collisions;
};

struct EpisodeLog {
    int region_id = 0;
    uint64_t seed = 0;
    std::string policy_kind;
    std::string variant;  // common / local, what the policy acted on
    std::vector<EpisodeStep> steps;
    std::string terminal_cause;
    double undiscounted_return = 0.0;
    double discounted_return = 0.0;
    bool valid = true;

    /// Recompute returns from the step records (consistency check on load).
    std::pair<double, double> recompute_returns(double gamma) const;
};

std::string episode_to_jsonl(const EpisodeLog& log);
EpisodeLog episode_from_jsonl(const std::string& text);

struct RegionMetrics {
    int region_id = 0;
    int episodes = 0;
    int invalid_episodes = 0;
    double mean_return = 0.0;
    double ci95_halfwidth = 0.0;
    double mean_discounted = 0.0;
    int collision_count = 0;
    double collision_rate = 0.0;
    bool cross_region = false;  // evaluated outside the policy's training regime
};

struct MetricsReport {
    std::string policy_kind;
    std::string checkpoint_hash;
    std::vector<RegionMetrics> regions;
    std::optional<double> apr;  // filled by comparisons, needs optimal refs

    std::string to_json_string() const;
    static MetricsReport from_json_string(const std::string& s);
    std::string to_table() const;
};

/// Runs N greedy episodes with per-episode seeds seed+i. Deterministic; may
/// fan out over `workers` threads (episodes are independent).
std::vector<EpisodeLog> run_episodes(const PolicyHandle& policy, const RegionSpec& region, int n,
                                     uint64_t seed, const RewardWeights& weights = RewardWeights::defaults(),
                                     int workers = 1);

RegionMetrics summarize(const std::vector<EpisodeLog>& logs, int region_id);

/// Average performance ratio: sum of per-region mean returns over the sum of
/// per-region optimal returns.
double apr(const std::vector<double>& policy_returns, const std::vector<double>& optimal_returns);

/// Fraction of episodes that ended in a collision.
double collision_rate(const std::vector<EpisodeLog>& logs);

/// Monte-Carlo value gap: |mean discounted return difference| on paired seeds.
double value_gap(const PolicyHandle& policy, const PolicyHandle& reference, const RegionSpec& region,
                 int n, uint64_t seed, const RewardWeights& weights = RewardWeights::defaults());

}  // namespace dle
