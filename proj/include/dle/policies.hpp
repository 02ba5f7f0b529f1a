#pragma once

#include <map>
#include <string>
#include <vector>

#include "dle/rl.hpp"

namespace dle {

enum class PolicyKind { LM1, LM2, LM12, GM, DLE };
const char* policy_kind_name(PolicyKind k);
PolicyKind policy_kind_from_name(const std::string& name);

/// Which regions a kind trains on and whether it uses local info / routing.
struct KindRegime {
    std::vector<int> train_regions;  // by position: 1-based region ordinals
    bool local_info = false;
    bool global_location = false;
};
KindRegime kind_regime(PolicyKind k);

struct PolicyModel {
    EncoderBundle enc;
    DenseNet q;

    size_t policy_param_count() const { return enc.policy_param_count() + q.param_count(); }
};

/// Frozen, act-only policy. DLE carries per-region stores; GM carries one
/// expert per region plus the location router.
class PolicyHandle {
  public:
    PolicyKind kind = PolicyKind::LM12;
    std::vector<int> trained_region_ids;
    PolicyModel model;                      // LM* / DLE
    std::vector<PolicyModel> experts;       // GM
    std::map<int, int> router;              // GM: region id -> expert index
    std::map<int, RegionalStore> stores;    // DLE regional data
    std::string config_hash;
    TrainConfig train_config;

    /// GM location routing; unknown regions are an explicit error.
    int gm_route(int region_id) const;

    /// Greedy action. DLE uses the local variant when a store exists for the
    /// region, otherwise falls back to the common path.
    Action act(const SimState& state, const RegionSpec& region) const;

    /// The variant act() would use in this region.
    Variant acting_variant(int region_id) const;

    size_t parameter_count() const;
};

/// Trains a policy of the given kind. `regions` must carry the regions the
/// regime requires, in region-ordinal order (region 1 first).
PolicyHandle make_policy(PolicyKind kind, const TrainConfig& config,
                         const std::vector<RegionSpec>& regions, const std::string& config_hash,
                         std::vector<TrainedModel>* trained_out = nullptr);

void save_checkpoint(const std::string& dir, const PolicyHandle& policy);
PolicyHandle load_checkpoint(const std::string& dir);

}  // namespace dle
