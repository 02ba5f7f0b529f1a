#include "dle/rl.hpp"

#include <algorithm>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "dle/log.hpp"

namespace dle {

using nlohmann::json;

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
    slots_.reserve(capacity);
}

void ReplayBuffer::push(Transition tr) {
    int v = tr.variant == Variant::Local ? 1 : 0;
    if (slots_.size() < capacity_) {
        order_[v].push_back(slots_.size());
        slots_.push_back(std::move(tr));
    } else {
        // the overwritten slot is the globally oldest entry, hence the front
        // of its variant's order deque
        int old_v = slots_[next_].variant == Variant::Local ? 1 : 0;
        if (!order_[old_v].empty() && order_[old_v].front() == next_) order_[old_v].pop_front();
        slots_[next_] = std::move(tr);
        order_[v].push_back(next_);
        next_ = (next_ + 1) % capacity_;
    }
}

std::vector<size_t> ReplayBuffer::sample_single_variant(Rng& rng, size_t batch, Variant& chosen) const {
    size_t n_local = order_[1].size();
    size_t n_common = order_[0].size();
    if (n_local + n_common == 0) throw std::invalid_argument("ReplayBuffer: empty");
    double p_local = static_cast<double>(n_local) / static_cast<double>(n_local + n_common);
    bool local = n_common == 0 || (n_local > 0 && rng.uniform() < p_local);
    chosen = local ? Variant::Local : Variant::Common;
    const auto& pool = order_[local ? 1 : 0];
    std::vector<size_t> out(batch);
    for (size_t i = 0; i < batch; ++i) out[i] = pool[rng.below(pool.size())];
    return out;
}

QNet QNet::make(int state_dim, const std::vector<int>& hidden, int actions, int sync_period,
                Rng& rng) {
    QNet q;
    std::vector<int> sizes{state_dim};
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(actions);
    std::vector<Activation> acts(sizes.size() - 1, Activation::Relu);
    acts.back() = Activation::Identity;
    q.online = DenseNet(sizes, acts);
    q.online.init_params(rng);
    q.target = q.online;
    q.sync_period = sync_period;
    return q;
}

int select_action(const Vec& q_values, double epsilon, Rng& rng) {
    if (q_values.empty()) throw std::invalid_argument("select_action: empty value vector");
    if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("select_action: epsilon in [0,1]");
    if (epsilon > 0.0 && rng.uniform() < epsilon)
        return static_cast<int>(rng.below(q_values.size()));
    // lowest-index tie break
    int best = 0;
    for (size_t i = 1; i < q_values.size(); ++i)
        if (q_values[i] > q_values[static_cast<size_t>(best)]) best = static_cast<int>(i);
    return best;
}

void TrainConfig::validate() const {
    if (episodes < 0) throw std::invalid_argument("TrainConfig.episodes: must be >= 0");
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("TrainConfig.gamma: must be in [0,1]");
    if (local_info_probability < 0.0 || local_info_probability > 1.0)
        throw std::invalid_argument("TrainConfig.local_info_probability: must be in [0,1]");
    if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0)
        throw std::invalid_argument("TrainConfig.epsilon: bounds must be in [0,1]");
    if (epsilon_end > epsilon_start)
        throw std::invalid_argument("TrainConfig.epsilon: end must not exceed start");
    if (epsilon_decay_steps <= 0) throw std::invalid_argument("TrainConfig.epsilon_decay_steps: must be > 0");
    if (rl_batch < 1 || enb_batch < 2)
        throw std::invalid_argument("TrainConfig.batch: rl >= 1 and enb >= 2 required");
    if (replay_capacity < rl_batch || pair_capacity < enb_batch)
        throw std::invalid_argument("TrainConfig.capacity: must hold at least one batch");
    if (target_sync_period <= 0) throw std::invalid_argument("TrainConfig.target_sync_period: must be > 0");
    if (anneal_fraction < 0.0 || anneal_fraction > 1.0)
        throw std::invalid_argument("TrainConfig.anneal_fraction: must be in [0,1]");
    if (embedding_dim <= 0) throw std::invalid_argument("TrainConfig.embedding_dim: must be > 0");
    if (sage_depth < 1) throw std::invalid_argument("TrainConfig.sage_depth: must be >= 1");
    if (trajectory_horizon < 1) throw std::invalid_argument("TrainConfig.trajectory_horizon: must be >= 1");
    if (lr_rl <= 0.0 || lr_enb <= 0.0) throw std::invalid_argument("TrainConfig.lr: must be > 0");
}

std::string TrainConfig::to_json_string() const {
    json j;
    j["episodes"] = episodes;
    j["epsilon_start"] = epsilon_start;
    j["epsilon_end"] = epsilon_end;
    j["epsilon_decay_steps"] = epsilon_decay_steps;
    j["gamma"] = gamma;
    j["rl_batch"] = rl_batch;
    j["enb_batch"] = enb_batch;
    j["replay_capacity"] = replay_capacity;
    j["pair_capacity"] = pair_capacity;
    j["target_sync_period"] = target_sync_period;
    j["local_info_probability"] = local_info_probability;
    j["seed"] = seed;
    j["alpha"] = alpha;
    j["beta0"] = beta0;
    j["anneal_fraction"] = anneal_fraction;
    j["lr_rl"] = lr_rl;
    j["lr_enb"] = lr_enb;
    j["embedding_dim"] = embedding_dim;
    j["q_hidden"] = q_hidden;
    j["encoder_hidden"] = encoder_hidden;
    j["stat_hidden"] = stat_hidden;
    j["sage_depth"] = sage_depth;
    j["trajectory_horizon"] = trajectory_horizon;
    j["max_skip_fraction"] = max_skip_fraction;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json_string(const std::string& s) {
    json j = json::parse(s);
    TrainConfig c;
    c.episodes = j.value("episodes", c.episodes);
    c.epsilon_start = j.value("epsilon_start", c.epsilon_start);
    c.epsilon_end = j.value("epsilon_end", c.epsilon_end);
    c.epsilon_decay_steps = j.value("epsilon_decay_steps", c.epsilon_decay_steps);
    c.gamma = j.value("gamma", c.gamma);
    c.rl_batch = j.value("rl_batch", c.rl_batch);
    c.enb_batch = j.value("enb_batch", c.enb_batch);
    c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
    c.pair_capacity = j.value("pair_capacity", c.pair_capacity);
    c.target_sync_period = j.value("target_sync_period", c.target_sync_period);
    c.local_info_probability = j.value("local_info_probability", c.local_info_probability);
    c.seed = j.value("seed", c.seed);
    c.alpha = j.value("alpha", c.alpha);
    c.beta0 = j.value("beta0", c.beta0);
    c.anneal_fraction = j.value("anneal_fraction", c.anneal_fraction);
    c.lr_rl = j.value("lr_rl", c.lr_rl);
    c.lr_enb = j.value("lr_enb", c.lr_enb);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.q_hidden = j.value("q_hidden", c.q_hidden);
    c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
    c.stat_hidden = j.value("stat_hidden", c.stat_hidden);
    c.sage_depth = j.value("sage_depth", c.sage_depth);
    c.trajectory_horizon = j.value("trajectory_horizon", c.trajectory_horizon);
    c.max_skip_fraction = j.value("max_skip_fraction", c.max_skip_fraction);
    c.validate();
    return c;
}

double epsilon_schedule(const TrainConfig& cfg, long long rl_updates) {
    if (rl_updates >= cfg.epsilon_decay_steps) return cfg.epsilon_end;
    double frac = static_cast<double>(rl_updates) / static_cast<double>(cfg.epsilon_decay_steps);
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

std::string curve_to_csv(const std::vector<CurveRow>& rows) {
    std::string out =
        "episode,episode_reward,epsilon,beta,i_common,i_local,decisions,terminal_cause,variant\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%s,%s\n", r.episode,
                      r.episode_reward, r.epsilon, r.beta, r.i_common, r.i_local, r.decisions,
                      r.terminal_cause.c_str(), r.variant.c_str());
        out += buf;
    }
    return out;
}

namespace {

const RegionSpec& region_by_id(const std::vector<const RegionSpec*>& regions, int id) {
    for (const auto* r : regions)
        if (r && r->region_id == id) return *r;
    throw std::invalid_argument("unknown region id " + std::to_string(id));
}

RoadGraph rebuild_transition_graph(const SceneNodes& scene, const Pose& pose, int region_id,
                                   const std::vector<const RegionSpec*>& regions) {
    const RegionSpec& region = region_by_id(regions, region_id);
    RoadGraph g = build_road_graph(region.geometry, pose, region_id);
    associate_vehicles(g, scene);
    return g;
}

}  // namespace

TdResult td_loss(const std::vector<const Transition*>& batch, const EncoderBundle& enc, QNet& qnet,
                 double gamma, const std::vector<const RegionSpec*>& regions) {
    TdResult res;
    if (batch.empty()) throw std::invalid_argument("td_loss: empty batch");
    res.q_grads = qnet.online.zero_grads();
    res.enc_grads = EncGrads::zeros_like(enc);
    double inv_b = 1.0 / static_cast<double>(batch.size());

    for (const Transition* tr : batch) {
        bool local = tr->variant == Variant::Local;
        RoadGraph graph_t, graph_next;
        if (local) {
            graph_t = rebuild_transition_graph(tr->scene_t, tr->ego_pose_t, tr->region_id, regions);
            graph_next = rebuild_transition_graph(tr->scene_next, tr->ego_pose_next, tr->region_id, regions);
        }
        EncodeTrace trace_t;
        Vec x_t = encode_scene(enc, tr->scene_t, local ? &graph_t : nullptr, tr->variant, &trace_t).x;

        double target = tr->reward;
        if (!tr->terminal) {
            Vec x_next = encode_scene(enc, tr->scene_next, local ? &graph_next : nullptr, tr->variant).x;
            Vec qn = qnet.target.forward(x_next);
            target += gamma * *std::max_element(qn.begin(), qn.end());
        }

        DenseTrace qtrace;
        Vec q = qnet.online.forward(x_t, qtrace);
        double delta = q[static_cast<size_t>(tr->action)] - target;
        res.loss += delta * delta * inv_b;

        Vec dq(q.size(), 0.0);
        dq[static_cast<size_t>(tr->action)] = 2.0 * delta * inv_b;
        Vec dx;
        NetGrads qg = qnet.online.backward(qtrace, dq, &dx);
        res.q_grads.add(qg, 1.0);
        encode_scene_backward(enc, trace_t, dx, res.enc_grads);
    }
    res.ok = std::isfinite(res.loss);
    if (!res.ok) logf(LogLevel::Warn, "td_loss: non-finite loss, batch skipped");
    return res;
}

TrainedModel train_dle(const TrainConfig& config, const std::vector<RegionSpec>& regions,
                       bool use_local_info, const RewardWeights& weights) {
    config.validate();
    if (regions.empty()) throw std::invalid_argument("train_dle: need at least one region");
    for (const auto& r : regions) r.validate();

    std::vector<const RegionSpec*> region_ptrs;
    for (const auto& r : regions) region_ptrs.push_back(&r);

    TrainedModel model;
    model.config = config;

    Rng init_rng(config.seed);
    model.enc = EncoderBundle::make(config.embedding_dim, config.encoder_hidden, config.sage_depth,
                                    init_rng);
    int state_dim = model.enc.state_dim();
    model.qnet = QNet::make(state_dim, config.q_hidden, kActionCount, config.target_sync_period,
                            init_rng);

    int s_flat_dim = kVehicleSlots * kVehicleAttrs;
    TrajectoryBuilder traj(config.trajectory_horizon, s_flat_dim, kActionCount);
    model.t_local = StatisticNet::make(traj.flat_dim(), state_dim, config.stat_hidden, init_rng);
    model.t_common = StatisticNet::make(s_flat_dim, state_dim, config.stat_hidden, init_rng);

    Adam opt_rl(config.lr_rl);
    Adam opt_enb(config.lr_enb);

    ReplayBuffer replay(static_cast<size_t>(config.replay_capacity));
    EncodedPairBuffer pairs(static_cast<size_t>(config.pair_capacity));

    Rng train_rng = Rng(config.seed).fork(0x7261696e);

    int max_horizon = 0;
    for (const auto& r : regions) max_horizon = std::max(max_horizon, r.episode_horizon_decisions);
    long long total_anneal = std::max<long long>(
        1, static_cast<long long>(config.anneal_fraction * config.episodes * max_horizon));

    long long global_decisions = 0;
    long long attempted_rl = 0;
    double last_ic = 0.0, last_il = 0.0;
    double beta = config.beta0;

    struct Observation {
        SceneNodes scene;
        Pose pose;
        RoadGraph graph;
        Vec x_c, x_l;
        Vec s_flat;
    };

    for (int episode = 0; episode < config.episodes; ++episode) {
        const RegionSpec& region =
            regions[regions.size() > 1 ? static_cast<size_t>(train_rng.below(regions.size())) : 0];
        uint64_t episode_seed = config.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<uint64_t>(episode) + 1));
        SimState state = sample_scenario(region, episode_seed);
        bool local_episode = use_local_info && train_rng.bernoulli(config.local_info_probability);
        Variant variant = local_episode ? Variant::Local : Variant::Common;
        traj.reset();

        auto observe = [&](Observation& obs) {
            obs.scene = build_vehicle_nodes(state, region);
            obs.pose = agent_pose(state.ego(), region);
            obs.s_flat = flatten_state(obs.scene);
            if (use_local_info) {
                obs.graph = build_road_graph(region.geometry, obs.pose, region.region_id);
                associate_vehicles(obs.graph, obs.scene);
                obs.x_l = encode_scene(model.enc, obs.scene, &obs.graph, Variant::Local).x;
            }
            obs.x_c = encode_scene(model.enc, obs.scene, nullptr, Variant::Common).x;
        };

        Observation cur;
        observe(cur);
        double episode_reward = 0.0;
        int decisions = 0;

        while (!state.terminal) {
            const Vec& x_act = local_episode ? cur.x_l : cur.x_c;
            Vec qv = model.qnet.online.forward(x_act);
            double eps = epsilon_schedule(config, model.rl_updates);
            int action = select_action(qv, eps, train_rng);

            StepResult sr = step(state, static_cast<Action>(action), region);
            RewardBreakdown rb = reward(sr.reward_ctx, weights);
            episode_reward += rb.total;
            ++decisions;
            ++global_decisions;
            beta = anneal_beta(global_decisions, total_anneal, config.beta0);

            Observation next;
            observe(next);

            Transition tr;
            tr.x_t = x_act;
            tr.x_next = local_episode ? next.x_l : next.x_c;
            tr.action = action;
            tr.reward = rb.total;
            tr.terminal = state.terminal;
            tr.variant = variant;
            tr.scene_t = cur.scene;
            tr.scene_next = next.scene;
            tr.ego_pose_t = cur.pose;
            tr.ego_pose_next = next.pose;
            tr.region_id = region.region_id;
            replay.push(std::move(tr));

            if (use_local_info) {
                EncodedPairRecord rec;
                rec.y = traj.window(cur.s_flat);
                rec.s_flat = cur.s_flat;
                rec.scene = cur.scene;
                rec.ego_pose = cur.pose;
                rec.region_id = region.region_id;
                rec.x_l = cur.x_l;
                rec.x_c = cur.x_c;
                pairs.push(std::move(rec));
            }
            traj.push(cur.s_flat, action);

            // encoding-objective update (skipped entirely once annealed out)
            if (use_local_info && beta > 0.0 &&
                pairs.size() >= static_cast<size_t>(config.enb_batch)) {
                auto idx = pairs.sample(train_rng, static_cast<size_t>(config.enb_batch));
                EncoderObjectiveResult er = encoder_objective_update(
                    pairs, idx, model.t_local, model.t_common, model.enc, region_ptrs, config.alpha,
                    beta, opt_enb, train_rng);
                if (er.applied || beta <= 0.0) {
                    last_ic = er.i_common;
                    last_il = er.i_local;
                    ++model.enb_updates;
                }
                if (er.skipped_nonfinite) ++model.skipped_updates;
            }

            // TD update
            if (replay.size() >= static_cast<size_t>(config.rl_batch)) {
                Variant chosen;
                auto idx =
                    replay.sample_single_variant(train_rng, static_cast<size_t>(config.rl_batch), chosen);
                std::vector<const Transition*> batch;
                batch.reserve(idx.size());
                for (size_t k : idx) batch.push_back(&replay[k]);
                ++attempted_rl;
                TdResult td = td_loss(batch, model.enc, model.qnet, config.gamma, region_ptrs);
                if (td.ok) {
                    std::vector<Matrix*> params = model.qnet.online.params();
                    for (auto* p : model.enc.params()) params.push_back(p);
                    std::vector<Matrix> grads;
                    for (auto& m : td.q_grads.g) grads.push_back(std::move(m));
                    for (auto& m : std::move(td.enc_grads).into_list()) grads.push_back(std::move(m));
                    if (opt_rl.step(params, grads)) {
                        ++model.rl_updates;
                        ++model.qnet.updates_since_sync;
                        if (model.qnet.updates_since_sync >= model.qnet.sync_period) model.qnet.sync();
                    } else {
                        ++model.skipped_updates;
                    }
                } else {
                    ++model.skipped_updates;
                }
            }

            cur = std::move(next);
        }

        CurveRow row;
        row.episode = episode;
        row.episode_reward = episode_reward;
        row.epsilon = epsilon_schedule(config, model.rl_updates);
        row.beta = beta;
        row.i_common = last_ic;
        row.i_local = last_il;
        row.decisions = decisions;
        row.terminal_cause = terminal_cause_name(state.cause);
        row.variant = variant_name(variant);
        model.curve.push_back(row);
    }

    long long attempted = attempted_rl + model.enb_updates + model.skipped_updates;
    if (attempted > 0) {
        double skip_frac = static_cast<double>(model.skipped_updates) / static_cast<double>(attempted);
        if (skip_frac > config.max_skip_fraction)
            throw std::runtime_error("train_dle: " + std::to_string(model.skipped_updates) +
                                     " skipped updates (" + std::to_string(skip_frac * 100.0) +
                                     "% > allowed)");
    }
    model.final_rng_state = train_rng.serialize();
    return model;
}

}  // namespace dle
