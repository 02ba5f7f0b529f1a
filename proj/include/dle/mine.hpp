#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "dle/graph.hpp"
#include "dle/nn.hpp"

namespace dle {

/// Flattened raw state: the 5 attributes of each of the 7 vehicle slots.
Vec flatten_state(const SceneNodes& scene);

/// Rolling state-action trajectory window y = [s_0, a_0, ..., s_h] over the
/// last h decision steps, zero-padded at episode starts.
class TrajectoryBuilder {
  public:
    TrajectoryBuilder(int horizon, int state_dim, int action_count);

    void reset();
    /// Record the (state, action) pair of a completed decision step.
    void push(const Vec& s_flat, int action);
    /// Window ending at the current raw state.
    Vec window(const Vec& current_s) const;

    int flat_dim() const { return horizon_ * (state_dim_ + action_count_) + state_dim_; }
    int horizon() const { return horizon_; }

  private:
    int horizon_;
    int state_dim_;
    int action_count_;
    std::deque<std::pair<Vec, int>> history_;
};

/// Statistic network T_w plus the moving-average denominator used for
/// bias-corrected gradients of the log-mean-exp term.
struct StatisticNet {
    DenseNet net;  // concat of both arguments -> scalar
    double ema_denominator = 0.0;
    bool ema_initialized = false;
    double ema_decay = 0.99;

    static StatisticNet make(int dim_a, int dim_b, const std::vector<int>& hidden, Rng& rng);
    double score(const Vec& a, const Vec& b) const;
};

/// Donsker-Varadhan lower bound mean(T over joint) - log mean(exp T over
/// marginal), with max-subtraction in the log term. Returns NaN (and logs)
/// if any score is non-finite.
double dv_estimate(const StatisticNet& t, const std::vector<Vec>& joint_a,
                   const std::vector<Vec>& joint_b, const std::vector<Vec>& marginal_a,
                   const std::vector<Vec>& marginal_b);

double dv_from_scores(const Vec& joint_scores, const Vec& marginal_scores);

/// d(estimate)/d(score) for each joint and marginal score. The marginal
/// derivative uses the net's moving-average denominator (updated here).
struct DvScoreGrads {
    double estimate = 0.0;
    Vec d_joint;
    Vec d_marginal;
    bool ok = false;
};
DvScoreGrads dv_score_grads(StatisticNet& t, const Vec& joint_scores, const Vec& marginal_scores);

/// One ascent step of T on the bound for externally supplied input pairs
/// (already concatenated). Returns the batch estimate, or nullopt if the
/// batch was skipped. Used directly by the synthetic-data suites.
std::optional<double> dv_train_step(StatisticNet& t, const std::vector<Vec>& joint_inputs,
                                    const std::vector<Vec>& marginal_inputs, Adam& opt);

/// Replay record for the encoding objective: trajectory window, raw state,
/// and everything needed to re-encode x_c / x_l freshly at update time.
struct EncodedPairRecord {
    Vec y;
    Vec s_flat;
    SceneNodes scene;
    Pose ego_pose;
    int region_id = 0;
    Vec x_l, x_c;  // snapshots at collection time (diagnostics only)
};

class EncodedPairBuffer {
  public:
    explicit EncodedPairBuffer(size_t capacity);

    void push(EncodedPairRecord rec);
    size_t size() const { return slots_.size(); }
    size_t capacity() const { return capacity_; }
    const EncodedPairRecord& operator[](size_t i) const { return slots_[i]; }

    std::vector<size_t> sample(Rng& rng, size_t batch) const;

  private:
    std::vector<EncodedPairRecord> slots_;
    size_t capacity_ = 0;
    size_t next_ = 0;  // overwrite cursor once full
};

/// Linear anneal to zero: beta0 * max(0, 1 - step/total).
double anneal_beta(long long step, long long total_anneal_steps, double beta0);

struct EncoderObjectiveResult {
    double i_common = 0.0;
    double i_local = 0.0;
    bool applied = false;
    bool skipped_nonfinite = false;
};

/// Rebuilds the road graph for a record (graphs are a pure function of the
/// region geometry and ego pose).
RoadGraph rebuild_graph(const EncodedPairRecord& rec, const RegionSpec& region);

/// One combined update of the encoding objective: ascends
/// I(S; X_c) + alpha * I(Y; X_l), scaled by beta, through both statistic
/// nets and all encoder parameters. x_c / x_l are re-encoded from the stored
/// raw scenes. `opt` must cover [t_local, t_common, encoder] parameters in
/// that order.
EncoderObjectiveResult encoder_objective_update(const EncodedPairBuffer& buffer,
                                                const std::vector<size_t>& batch_indices,
                                                StatisticNet& t_local, StatisticNet& t_common,
                                                EncoderBundle& enc,
                                                const std::vector<const RegionSpec*>& regions_by_id,
                                                double alpha, double beta, Adam& opt, Rng& rng);

}  // namespace dle
