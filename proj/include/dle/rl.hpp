#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "dle/graph.hpp"
#include "dle/mine.hpp"
#include "dle/reward.hpp"

namespace dle {

/// One replay record. Scenes (and ego poses for graph rebuilds) are kept so
/// encodings can be recomputed with fresh encoder parameters at update time;
/// the x snapshots are what the acting policy saw.
struct Transition {
    Vec x_t, x_next;
    int action = 0;
    double reward = 0.0;
    bool terminal = false;
    Variant variant = Variant::Common;
    SceneNodes scene_t, scene_next;
    Pose ego_pose_t, ego_pose_next;
    int region_id = 0;
};

/// FIFO ring buffer with per-variant bookkeeping so TD batches can be drawn
/// from a single variant (local and common targets are never mixed).
class ReplayBuffer {
  public:
    explicit ReplayBuffer(size_t capacity);

    void push(Transition tr);
    size_t size() const { return slots_.size(); }
    size_t count(Variant v) const { return order_[v == Variant::Local ? 1 : 0].size(); }
    const Transition& operator[](size_t i) const { return slots_[i]; }

    /// Chooses a variant (probability proportional to its share) and samples
    /// `batch` slots of that variant uniformly with replacement.
    std::vector<size_t> sample_single_variant(Rng& rng, size_t batch, Variant& chosen) const;

  private:
    std::vector<Transition> slots_;
    size_t capacity_ = 0;
    size_t next_ = 0;
    std::deque<size_t> order_[2];  // slot ids per variant, oldest first
};

/// Online/target value-network pair.
struct QNet {
    DenseNet online;
    DenseNet target;
    int sync_period = 500;
    long long updates_since_sync = 0;
    long long sync_count = 0;

    static QNet make(int state_dim, const std::vector<int>& hidden, int actions, int sync_period,
                     Rng& rng);
    void sync() {
        target = online;
        updates_since_sync = 0;
        ++sync_count;
    }
};

/// Epsilon-greedy with lowest-index argmax tie-break.
int select_action(const Vec& q_values, double epsilon, Rng& rng);

struct TrainConfig {
    int episodes = 500;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_decay_steps = 30000;
    double gamma = 0.95;
    int rl_batch = 64;
    int enb_batch = 64;
    int replay_capacity = 50000;
    int pair_capacity = 20000;
    int target_sync_period = 500;
    double local_info_probability = 0.5;
    uint64_t seed = 1;
    double alpha = 0.5;
    double beta0 = 1.0;
    double anneal_fraction = 0.6;  // of the expected decision steps
    double lr_rl = 3e-4;
    double lr_enb = 1e-4;
    int embedding_dim = 32;
    std::vector<int> q_hidden{64, 64};
    std::vector<int> encoder_hidden{32};
    std::vector<int> stat_hidden{64, 64};
    int sage_depth = 2;
    int trajectory_horizon = 8;
    double max_skip_fraction = 0.01;

    void validate() const;
    std::string to_json_string() const;
    static TrainConfig from_json_string(const std::string& s);
};

double epsilon_schedule(const TrainConfig& cfg, long long rl_updates);

struct CurveRow {
    int episode = 0;
    double episode_reward = 0.0;
    double epsilon = 1.0;
    double beta = 0.0;
    double i_common = 0.0;
    double i_local = 0.0;
    int decisions = 0;
    std::string terminal_cause;
    std::string variant = "common";
};

std::string curve_to_csv(const std::vector<CurveRow>& rows);

struct TrainedModel {
    EncoderBundle enc;
    QNet qnet;
    StatisticNet t_local, t_common;
    TrainConfig config;
    std::vector<CurveRow> curve;
    long long rl_updates = 0;
    long long enb_updates = 0;
    long long skipped_updates = 0;
    std::string final_rng_state;
};

/// TD gradients for one single-variant batch: mean squared error against the
/// frozen-target bootstrap, with gradients flowing through the encodings.
struct TdResult {
    double loss = 0.0;
    NetGrads q_grads;
    EncGrads enc_grads;
    bool ok = false;
};
TdResult td_loss(const std::vector<const Transition*>& batch, const EncoderBundle& enc, QNet& qnet,
                 double gamma, const std::vector<const RegionSpec*>& regions);

/// Runs the full training loop: per-episode variant coin flip (when
/// use_local_info), epsilon-greedy rollouts into the two buffers, one
/// encoding-objective update and one TD update per decision step.
TrainedModel train_dle(const TrainConfig& config, const std::vector<RegionSpec>& regions,
                       bool use_local_info, const RewardWeights& weights = RewardWeights::defaults());

}  // namespace dle
