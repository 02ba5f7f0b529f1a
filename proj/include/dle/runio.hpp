#pragma once

#include <string>
#include <vector>

#include "dle/policies.hpp"

namespace dle {

/// Top-level experiment configuration (one training run).
struct RunConfig {
    std::string experiment_name;
    PolicyKind policy_kind = PolicyKind::LM12;
    std::vector<std::string> region_spec_paths;
    TrainConfig train;
    int eval_episodes = 100;
    uint64_t eval_seed = 7;
    std::string out_dir;
    bool allow_reward_override = false;
    RewardWeights reward_weights;  // defaults unless explicitly overridden

    void validate() const;
    std::string to_json_string() const;
    static RunConfig from_json_string(const std::string& s);
};

RunConfig load_run_config(const std::string& path);

/// Canonical snapshot hash: FNV-1a over the serialized config plus the
/// serialized region specs it references.
std::string config_snapshot_hash(const RunConfig& cfg, const std::vector<RegionSpec>& regions);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);

/// Run-directory layout helpers. Artifacts always embed the snapshot hash.
struct RunDirectory {
    std::string root;

    std::string config_snapshot_path() const { return root + "/config_snapshot.json"; }
    std::string checkpoint_dir() const { return root + "/checkpoint"; }
    std::string curve_path() const { return root + "/curve.csv"; }
    std::string logs_dir() const { return root + "/logs"; }
    std::string eval_dir() const { return root + "/eval"; }
    std::string metrics_path(int region_id) const {
        return eval_dir() + "/metrics_region" + std::to_string(region_id) + ".json";
    }

    void create() const;
};

}  // namespace dle
