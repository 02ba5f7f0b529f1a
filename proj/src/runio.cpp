#include "dle/runio.hpp"

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace dle {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
    if (experiment_name.empty()) throw std::invalid_argument("RunConfig.experiment_name: required");
    for (char c : experiment_name)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
            throw std::invalid_argument("RunConfig.experiment_name: must be filesystem-safe "
                                        "(alphanumeric, '-', '_')");
    if (region_spec_paths.empty())
        throw std::invalid_argument("RunConfig.region_spec_paths: at least one region required");
    for (const auto& p : region_spec_paths)
        if (!file_exists(p)) throw std::invalid_argument("RunConfig.region_spec_paths: missing file " + p);
    if (out_dir.empty()) throw std::invalid_argument("RunConfig.out_dir: required");
    if (eval_episodes < 1) throw std::invalid_argument("RunConfig.eval_episodes: must be >= 1");
    train.validate();
    if (reward_weights.overridden && !allow_reward_override)
        throw std::invalid_argument("RunConfig.reward_weights: override requires allow_reward_override");
}

std::string RunConfig::to_json_string() const {
    json j;
    j["schema_version"] = 1;
    j["experiment_name"] = experiment_name;
    j["policy_kind"] = policy_kind_name(policy_kind);
    j["region_spec_paths"] = region_spec_paths;
    j["train"] = json::parse(train.to_json_string());
    j["eval_episodes"] = eval_episodes;
    j["eval_seed"] = eval_seed;
    j["out_dir"] = out_dir;
    j["allow_reward_override"] = allow_reward_override;
    if (reward_weights.overridden) {
        j["reward_weights"] = {{"w_collision", reward_weights.w_collision},
                               {"w_velocity", reward_weights.w_velocity},
                               {"w_lane_change", reward_weights.w_lane_change},
                               {"w_politeness", reward_weights.w_politeness},
                               {"gamma", reward_weights.gamma}};
    }
    return j.dump(2);
}

RunConfig RunConfig::from_json_string(const std::string& s) {
    json j;
    try {
        j = json::parse(s);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("RunConfig: invalid JSON: ") + e.what());
    }
    RunConfig c;
    auto require = [&](const char* field) -> const json& {
        if (!j.contains(field)) throw std::invalid_argument(std::string("RunConfig.") + field + ": missing");
        return j[field];
    };
    c.experiment_name = require("experiment_name").get<std::string>();
    c.policy_kind = policy_kind_from_name(require("policy_kind").get<std::string>());
    c.region_spec_paths = require("region_spec_paths").get<std::vector<std::string>>();
    if (j.contains("train")) c.train = TrainConfig::from_json_string(j["train"].dump());
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.eval_seed = j.value("eval_seed", c.eval_seed);
    c.out_dir = require("out_dir").get<std::string>();
    c.allow_reward_override = j.value("allow_reward_override", false);
    if (j.contains("reward_weights")) {
        const auto& w = j["reward_weights"];
        c.reward_weights.w_collision = w.value("w_collision", c.reward_weights.w_collision);
        c.reward_weights.w_velocity = w.value("w_velocity", c.reward_weights.w_velocity);
        c.reward_weights.w_lane_change = w.value("w_lane_change", c.reward_weights.w_lane_change);
        c.reward_weights.w_politeness = w.value("w_politeness", c.reward_weights.w_politeness);
        c.reward_weights.gamma = w.value("gamma", c.reward_weights.gamma);
        c.reward_weights.overridden = true;
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    return RunConfig::from_json_string(read_text_file(path));
}

std::string config_snapshot_hash(const RunConfig& cfg, const std::vector<RegionSpec>& regions) {
    std::string blob = cfg.to_json_string();
    for (const auto& r : regions) blob += region_to_json_string(r);
    return hex64(fnv1a64(blob));
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void RunDirectory::create() const {
    fs::create_directories(root);
    fs::create_directories(checkpoint_dir());
    fs::create_directories(logs_dir());
    fs::create_directories(eval_dir());
}

}  // namespace dle
