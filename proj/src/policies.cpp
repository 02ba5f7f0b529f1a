#include "dle/policies.hpp"

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dle/log.hpp"

namespace dle {

namespace fs = std::filesystem;
using nlohmann::json;

const char* policy_kind_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::LM1: return "LM1";
        case PolicyKind::LM2: return "LM2";
        case PolicyKind::LM12: return "LM12";
        case PolicyKind::GM: return "GM";
        case PolicyKind::DLE: return "DLE";
    }
    return "?";
}

PolicyKind policy_kind_from_name(const std::string& name) {
    if (name == "LM1") return PolicyKind::LM1;
    if (name == "LM2") return PolicyKind::LM2;
    if (name == "LM12") return PolicyKind::LM12;
    if (name == "GM") return PolicyKind::GM;
    if (name == "DLE") return PolicyKind::DLE;
    throw std::invalid_argument("unknown policy kind: " + name);
}

KindRegime kind_regime(PolicyKind k) {
    switch (k) {
        case PolicyKind::LM1: return {{1}, false, false};
        case PolicyKind::LM2: return {{2}, false, false};
        case PolicyKind::LM12: return {{1, 2}, false, false};
        case PolicyKind::GM: return {{1, 2}, false, true};
        case PolicyKind::DLE: return {{1, 2}, true, true};
    }
    return {};
}

int PolicyHandle::gm_route(int region_id) const {
    auto it = router.find(region_id);
    if (it == router.end())
        throw std::out_of_range("gm_route: no expert trained for region " + std::to_string(region_id));
    return it->second;
}

Variant PolicyHandle::acting_variant(int region_id) const {
    if (kind == PolicyKind::DLE && stores.count(region_id)) return Variant::Local;
    return Variant::Common;
}

Action PolicyHandle::act(const SimState& state, const RegionSpec& region) const {
    const PolicyModel* m = &model;
    if (kind == PolicyKind::GM) m = &experts[static_cast<size_t>(gm_route(region.region_id))];

    SceneNodes scene = build_vehicle_nodes(state, region);
    Vec x;
    if (acting_variant(region.region_id) == Variant::Local) {
        Pose pose = agent_pose(state.ego(), region);
        RoadGraph graph = build_road_graph(region.geometry, pose, region.region_id);
        associate_vehicles(graph, scene);
        x = encode_scene(m->enc, scene, &graph, Variant::Local).x;
    } else {
        x = encode_scene(m->enc, scene, nullptr, Variant::Common).x;
    }
    Vec q = m->q.forward(x);
    Rng unused(0);
    return static_cast<Action>(select_action(q, 0.0, unused));
}

size_t PolicyHandle::parameter_count() const {
    if (kind == PolicyKind::GM) {
        size_t n = 0;
        for (const auto& e : experts) n += e.policy_param_count();
        return n;
    }
    return model.policy_param_count();
}

namespace {

PolicyModel model_from_trained(const TrainedModel& t) { return {t.enc, t.qnet.online}; }

void check_counts(const PolicyHandle& policy) {
    // Table-style structural check: GM carries n_s x the single-model budget.
    if (policy.kind == PolicyKind::GM) {
        size_t single = policy.experts.front().policy_param_count();
        for (const auto& e : policy.experts) {
            double ratio = static_cast<double>(e.policy_param_count()) / static_cast<double>(single);
            if (ratio < 0.99 || ratio > 1.01)
                throw std::logic_error("make_policy: GM expert parameter counts diverge");
        }
    }
}

}  // namespace

PolicyHandle make_policy(PolicyKind kind, const TrainConfig& config,
                         const std::vector<RegionSpec>& regions, const std::string& config_hash,
                         std::vector<TrainedModel>* trained_out) {
    KindRegime regime = kind_regime(kind);
    if (regions.size() < regime.train_regions.size())
        throw std::invalid_argument(std::string("make_policy: kind ") + policy_kind_name(kind) +
                                    " needs " + std::to_string(regime.train_regions.size()) +
                                    " regions, got " + std::to_string(regions.size()));

    // map region ordinals (1-based) onto the supplied specs
    std::vector<RegionSpec> train_set;
    for (int ordinal : regime.train_regions) {
        if (ordinal - 1 >= static_cast<int>(regions.size()))
            throw std::invalid_argument("make_policy: region ordinal out of range");
        train_set.push_back(regions[static_cast<size_t>(ordinal - 1)]);
    }

    PolicyHandle policy;
    policy.kind = kind;
    policy.config_hash = config_hash;
    policy.train_config = config;
    for (const auto& r : train_set) policy.trained_region_ids.push_back(r.region_id);

    if (kind == PolicyKind::GM) {
        for (size_t i = 0; i < train_set.size(); ++i) {
            TrainConfig expert_cfg = config;
            expert_cfg.seed = config.seed ^ (0xa0761d6478bd642fULL * (i + 1));
            TrainedModel t = train_dle(expert_cfg, {train_set[i]}, false);
            policy.router[train_set[i].region_id] = static_cast<int>(i);
            policy.experts.push_back(model_from_trained(t));
            if (trained_out) trained_out->push_back(std::move(t));
        }
    } else {
        bool local = kind == PolicyKind::DLE;
        TrainedModel t = train_dle(config, train_set, local);
        policy.model = model_from_trained(t);
        if (local) {
            for (const auto& r : train_set)
                policy.stores.emplace(r.region_id, make_regional_store(r, policy.model.enc, config_hash));
        }
        if (trained_out) trained_out->push_back(std::move(t));
    }
    check_counts(policy);
    return policy;
}

void save_checkpoint(const std::string& dir, const PolicyHandle& policy) {
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write checkpoint file " + name);
        out << content;
    };

    json manifest;
    manifest["format_version"] = 1;
    manifest["kind"] = policy_kind_name(policy.kind);
    manifest["trained_region_ids"] = policy.trained_region_ids;
    manifest["config_hash"] = policy.config_hash;
    manifest["parameter_count"] = policy.parameter_count();
    manifest["expert_count"] = policy.experts.size();
    json router = json::array();
    for (const auto& [rid, idx] : policy.router) router.push_back({{"region_id", rid}, {"expert", idx}});
    manifest["router"] = router;
    json stores = json::array();
    for (const auto& [rid, st] : policy.stores) stores.push_back(rid);
    manifest["store_region_ids"] = stores;
    write("manifest.json", manifest.dump(2) + "\n");
    write("train_config.json", policy.train_config.to_json_string() + "\n");

    if (policy.kind == PolicyKind::GM) {
        for (size_t i = 0; i < policy.experts.size(); ++i) {
            write("expert_" + std::to_string(i) + "_encoder.json",
                  policy.experts[i].enc.to_json_string());
            write("expert_" + std::to_string(i) + "_qnet.json", policy.experts[i].q.to_json_string());
        }
    } else {
        write("encoder.json", policy.model.enc.to_json_string());
        write("qnet.json", policy.model.q.to_json_string());
    }
    for (const auto& [rid, st] : policy.stores)
        write("regional_store_" + std::to_string(rid) + ".json", st.to_json_string());
}

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

PolicyHandle load_checkpoint(const std::string& dir) {
    fs::path base(dir);
    json manifest = json::parse(read_file(base / "manifest.json"));
    PolicyHandle policy;
    policy.kind = policy_kind_from_name(manifest.at("kind").get<std::string>());
    policy.trained_region_ids = manifest.at("trained_region_ids").get<std::vector<int>>();
    policy.config_hash = manifest.value("config_hash", "");
    policy.train_config = TrainConfig::from_json_string(read_file(base / "train_config.json"));

    if (policy.kind == PolicyKind::GM) {
        size_t n = manifest.at("expert_count").get<size_t>();
        for (size_t i = 0; i < n; ++i) {
            PolicyModel m;
            m.enc = EncoderBundle::from_json_string(
                read_file(base / ("expert_" + std::to_string(i) + "_encoder.json")));
            m.q = DenseNet::from_json_string(
                read_file(base / ("expert_" + std::to_string(i) + "_qnet.json")));
            policy.experts.push_back(std::move(m));
        }
        for (const auto& rj : manifest.at("router"))
            policy.router[rj.at("region_id").get<int>()] = rj.at("expert").get<int>();
    } else {
        policy.model.enc = EncoderBundle::from_json_string(read_file(base / "encoder.json"));
        policy.model.q = DenseNet::from_json_string(read_file(base / "qnet.json"));
    }
    for (int rid : manifest.at("store_region_ids").get<std::vector<int>>()) {
        policy.stores.emplace(rid, RegionalStore::from_json_string(
                                       read_file(base / ("regional_store_" + std::to_string(rid) + ".json"))));
    }
    return policy;
}

}  // namespace dle
