#include "dle/mine.hpp"

#include <algorithm>

#include "dle/log.hpp"

namespace dle {

Vec flatten_state(const SceneNodes& scene) {
    Vec out;
    out.reserve(kVehicleSlots * kVehicleAttrs);
    for (const auto& n : scene.nodes) {
        out.push_back(n.s);
        out.push_back(n.l);
        out.push_back(n.s_dot);
        out.push_back(n.l_dot);
        out.push_back(n.dtheta);
    }
    return out;
}

TrajectoryBuilder::TrajectoryBuilder(int horizon, int state_dim, int action_count)
    : horizon_(horizon), state_dim_(state_dim), action_count_(action_count) {
    if (horizon <= 0) throw std::invalid_argument("TrajectoryBuilder: horizon must be > 0");
}

void TrajectoryBuilder::reset() { history_.clear(); }

void TrajectoryBuilder::push(const Vec& s_flat, int action) {
    if (static_cast<int>(s_flat.size()) != state_dim_)
        throw std::invalid_argument("TrajectoryBuilder: state dim mismatch");
    history_.emplace_back(s_flat, action);
    while (static_cast<int>(history_.size()) > horizon_) history_.pop_front();
}

Vec TrajectoryBuilder::window(const Vec& current_s) const {
    Vec out(static_cast<size_t>(flat_dim()), 0.0);
    int pad = horizon_ - static_cast<int>(history_.size());
    size_t off = static_cast<size_t>(pad) * (state_dim_ + action_count_);
    for (const auto& [s, a] : history_) {
        std::copy(s.begin(), s.end(), out.begin() + static_cast<long>(off));
        off += static_cast<size_t>(state_dim_);
        if (a >= 0 && a < action_count_) out[off + static_cast<size_t>(a)] = 1.0;
        off += static_cast<size_t>(action_count_);
    }
    std::copy(current_s.begin(), current_s.end(), out.begin() + static_cast<long>(off));
    return out;
}

StatisticNet StatisticNet::make(int dim_a, int dim_b, const std::vector<int>& hidden, Rng& rng) {
    StatisticNet t;
    std::vector<int> sizes{dim_a + dim_b};
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(1);
    std::vector<Activation> acts(sizes.size() - 1, Activation::Tanh);
    acts.back() = Activation::Identity;
    t.net = DenseNet(sizes, acts);
    t.net.init_params(rng);
    return t;
}

double StatisticNet::score(const Vec& a, const Vec& b) const {
    Vec in;
    in.reserve(a.size() + b.size());
    in.insert(in.end(), a.begin(), a.end());
    in.insert(in.end(), b.begin(), b.end());
    return net.forward(in)[0];
}

double dv_from_scores(const Vec& joint_scores, const Vec& marginal_scores) {
    if (joint_scores.empty() || marginal_scores.empty())
        throw std::invalid_argument("dv_from_scores: empty batch");
    double mean_joint = 0.0;
    for (double t : joint_scores) mean_joint += t;
    mean_joint /= static_cast<double>(joint_scores.size());

    double m = *std::max_element(marginal_scores.begin(), marginal_scores.end());
    double acc = 0.0;
    for (double t : marginal_scores) acc += std::exp(t - m);
    double log_mean_exp = m + std::log(acc / static_cast<double>(marginal_scores.size()));
    return mean_joint - log_mean_exp;
}

double dv_estimate(const StatisticNet& t, const std::vector<Vec>& joint_a,
                   const std::vector<Vec>& joint_b, const std::vector<Vec>& marginal_a,
                   const std::vector<Vec>& marginal_b) {
    if (joint_a.size() != joint_b.size() || marginal_a.size() != marginal_b.size())
        throw std::invalid_argument("dv_estimate: pair count mismatch");
    if (joint_a.size() < 2 || marginal_a.size() < 2)
        throw std::invalid_argument("dv_estimate: batch sizes must be >= 2");
    Vec tj(joint_a.size()), tm(marginal_a.size());
    for (size_t i = 0; i < joint_a.size(); ++i) tj[i] = t.score(joint_a[i], joint_b[i]);
    for (size_t i = 0; i < marginal_a.size(); ++i) tm[i] = t.score(marginal_a[i], marginal_b[i]);
    if (!all_finite(tj) || !all_finite(tm)) {
        logf(LogLevel::Warn, "dv_estimate: non-finite statistic output, batch skipped");
        return std::numeric_limits<double>::quiet_NaN();
    }
    return dv_from_scores(tj, tm);
}

DvScoreGrads dv_score_grads(StatisticNet& t, const Vec& joint_scores, const Vec& marginal_scores) {
    DvScoreGrads out;
    if (!all_finite(joint_scores) || !all_finite(marginal_scores)) {
        logf(LogLevel::Warn, "dv_score_grads: non-finite statistic output, batch skipped");
        return out;
    }
    out.estimate = dv_from_scores(joint_scores, marginal_scores);

    size_t bj = joint_scores.size(), bm = marginal_scores.size();
    out.d_joint.assign(bj, 1.0 / static_cast<double>(bj));

    double batch_mean_exp = 0.0;
    for (double s : marginal_scores) batch_mean_exp += std::exp(s);
    batch_mean_exp /= static_cast<double>(bm);
    if (!std::isfinite(batch_mean_exp) || batch_mean_exp <= 0.0) {
        logf(LogLevel::Warn, "dv_score_grads: degenerate exp moments, batch skipped");
        return out;
    }
    if (!t.ema_initialized) {
        t.ema_denominator = batch_mean_exp;
        t.ema_initialized = true;
    } else {
        t.ema_denominator = t.ema_decay * t.ema_denominator + (1.0 - t.ema_decay) * batch_mean_exp;
    }
    out.d_marginal.assign(bm, 0.0);
    double denom = static_cast<double>(bm) * t.ema_denominator;
    for (size_t i = 0; i < bm; ++i) out.d_marginal[i] = -std::exp(marginal_scores[i]) / denom;
    out.ok = true;
    return out;
}

std::optional<double> dv_train_step(StatisticNet& t, const std::vector<Vec>& joint_inputs,
                                    const std::vector<Vec>& marginal_inputs, Adam& opt) {
    if (joint_inputs.size() < 2 || marginal_inputs.size() < 2)
        throw std::invalid_argument("dv_train_step: batch sizes must be >= 2");
    std::vector<DenseTrace> jt(joint_inputs.size()), mt(marginal_inputs.size());
    Vec tj(joint_inputs.size()), tm(marginal_inputs.size());
    for (size_t i = 0; i < joint_inputs.size(); ++i) tj[i] = t.net.forward(joint_inputs[i], jt[i])[0];
    for (size_t i = 0; i < marginal_inputs.size(); ++i) tm[i] = t.net.forward(marginal_inputs[i], mt[i])[0];

    DvScoreGrads g = dv_score_grads(t, tj, tm);
    if (!g.ok) return std::nullopt;

    // gradient ascent: feed the negated bound gradient to the optimizer
    NetGrads acc = t.net.zero_grads();
    for (size_t i = 0; i < joint_inputs.size(); ++i) {
        NetGrads gi = t.net.backward(jt[i], Vec{-g.d_joint[i]});
        acc.add(gi, 1.0);
    }
    for (size_t i = 0; i < marginal_inputs.size(); ++i) {
        NetGrads gi = t.net.backward(mt[i], Vec{-g.d_marginal[i]});
        acc.add(gi, 1.0);
    }
    opt.step(t.net.params(), acc.g);
    return g.estimate;
}

EncodedPairBuffer::EncodedPairBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("EncodedPairBuffer: capacity must be > 0");
    slots_.reserve(capacity);
}

void EncodedPairBuffer::push(EncodedPairRecord rec) {
    if (slots_.size() < capacity_) {
        slots_.push_back(std::move(rec));
    } else {
        slots_[next_] = std::move(rec);
        next_ = (next_ + 1) % capacity_;
    }
}

std::vector<size_t> EncodedPairBuffer::sample(Rng& rng, size_t batch) const {
    std::vector<size_t> out(batch);
    size_t n = size();
    for (size_t i = 0; i < batch; ++i) out[i] = rng.below(n);
    return out;
}

double anneal_beta(long long step, long long total_anneal_steps, double beta0) {
    if (total_anneal_steps <= 0) throw std::invalid_argument("anneal_beta: total steps must be > 0");
    double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_anneal_steps);
    return beta0 * std::max(0.0, frac);
}

RoadGraph rebuild_graph(const EncodedPairRecord& rec, const RegionSpec& region) {
    RoadGraph g = build_road_graph(region.geometry, rec.ego_pose, rec.region_id);
    associate_vehicles(g, rec.scene);
    return g;
}

EncoderObjectiveResult encoder_objective_update(const EncodedPairBuffer& buffer,
                                                const std::vector<size_t>& batch_indices,
                                                StatisticNet& t_local, StatisticNet& t_common,
                                                EncoderBundle& enc,
                                                const std::vector<const RegionSpec*>& regions_by_id,
                                                double alpha, double beta, Adam& opt, Rng& rng) {
    EncoderObjectiveResult res;
    size_t b = batch_indices.size();
    if (b < 2) return res;

    auto region_of = [&](int region_id) -> const RegionSpec& {
        for (const auto* r : regions_by_id)
            if (r && r->region_id == region_id) return *r;
        throw std::invalid_argument("encoder_objective_update: unknown region id " +
                                    std::to_string(region_id));
    };

    // fresh encodings of both variants for every record
    std::vector<EncodeTrace> traces_c(b), traces_l(b);
    std::vector<RoadGraph> graphs(b);
    std::vector<Vec> xc(b), xl(b);
    for (size_t i = 0; i < b; ++i) {
        const EncodedPairRecord& rec = buffer[batch_indices[i]];
        graphs[i] = rebuild_graph(rec, region_of(rec.region_id));
        xc[i] = encode_scene(enc, rec.scene, nullptr, Variant::Common, &traces_c[i]).x;
        xl[i] = encode_scene(enc, rec.scene, &graphs[i], Variant::Local, &traces_l[i]).x;
    }

    // derangement by rotation for the marginal pairing of the second argument
    size_t shift = 1 + rng.below(b - 1);
    auto rot = [&](size_t i) { return (i + shift) % b; };

    // statistic scores; input = concat(first, second)
    auto concat = [](const Vec& a, const Vec& c) {
        Vec in;
        in.reserve(a.size() + c.size());
        in.insert(in.end(), a.begin(), a.end());
        in.insert(in.end(), c.begin(), c.end());
        return in;
    };

    std::vector<DenseTrace> cj(b), cm(b), lj(b), lm(b);
    Vec tc_j(b), tc_m(b), tl_j(b), tl_m(b);
    for (size_t i = 0; i < b; ++i) {
        const EncodedPairRecord& rec = buffer[batch_indices[i]];
        tc_j[i] = t_common.net.forward(concat(rec.s_flat, xc[i]), cj[i])[0];
        tc_m[i] = t_common.net.forward(concat(rec.s_flat, xc[rot(i)]), cm[i])[0];
        tl_j[i] = t_local.net.forward(concat(rec.y, xl[i]), lj[i])[0];
        tl_m[i] = t_local.net.forward(concat(rec.y, xl[rot(i)]), lm[i])[0];
    }

    DvScoreGrads gc = dv_score_grads(t_common, tc_j, tc_m);
    DvScoreGrads gl = dv_score_grads(t_local, tl_j, tl_m);
    if (!gc.ok || !gl.ok) {
        res.skipped_nonfinite = true;
        return res;
    }
    res.i_common = gc.estimate;
    res.i_local = gl.estimate;

    if (beta <= 0.0) return res;  // annealed out: no parameter movement

    // loss = -beta * (I_c + alpha * I_l); accumulate d(loss)/d(params)
    NetGrads g_tl = t_local.net.zero_grads();
    NetGrads g_tc = t_common.net.zero_grads();
    EncGrads g_enc = EncGrads::zeros_like(enc);
    std::vector<Vec> dxc(b, Vec(xc[0].size(), 0.0));
    std::vector<Vec> dxl(b, Vec(xl[0].size(), 0.0));

    int state_dim = static_cast<int>(buffer[batch_indices[0]].s_flat.size());
    int traj_dim = static_cast<int>(buffer[batch_indices[0]].y.size());

    for (size_t i = 0; i < b; ++i) {
        // common joint: pair (s_i, xc_i)
        {
            double d = -beta * gc.d_joint[i];
            Vec din;
            NetGrads gi = t_common.net.backward(cj[i], Vec{d}, &din);
            g_tc.add(gi, 1.0);
            for (size_t k = 0; k < dxc[i].size(); ++k)
                dxc[i][k] += din[static_cast<size_t>(state_dim) + k];
        }
        // common marginal: pair (s_i, xc_{rot(i)})
        {
            double d = -beta * gc.d_marginal[i];
            Vec din;
            NetGrads gi = t_common.net.backward(cm[i], Vec{d}, &din);
            g_tc.add(gi, 1.0);
            for (size_t k = 0; k < dxc[rot(i)].size(); ++k)
                dxc[rot(i)][k] += din[static_cast<size_t>(state_dim) + k];
        }
        // local joint
        {
            double d = -beta * alpha * gl.d_joint[i];
            Vec din;
            NetGrads gi = t_local.net.backward(lj[i], Vec{d}, &din);
            g_tl.add(gi, 1.0);
            for (size_t k = 0; k < dxl[i].size(); ++k)
                dxl[i][k] += din[static_cast<size_t>(traj_dim) + k];
        }
        // local marginal
        {
            double d = -beta * alpha * gl.d_marginal[i];
            Vec din;
            NetGrads gi = t_local.net.backward(lm[i], Vec{d}, &din);
            g_tl.add(gi, 1.0);
            for (size_t k = 0; k < dxl[rot(i)].size(); ++k)
                dxl[rot(i)][k] += din[static_cast<size_t>(traj_dim) + k];
        }
    }

    for (size_t i = 0; i < b; ++i) {
        encode_scene_backward(enc, traces_c[i], dxc[i], g_enc);
        encode_scene_backward(enc, traces_l[i], dxl[i], g_enc);
    }

    std::vector<Matrix*> params = t_local.net.params();
    for (auto* p : t_common.net.params()) params.push_back(p);
    for (auto* p : enc.params()) params.push_back(p);
    std::vector<Matrix> grads;
    for (auto& m : g_tl.g) grads.push_back(std::move(m));
    for (auto& m : g_tc.g) grads.push_back(std::move(m));
    for (auto& m : std::move(g_enc).into_list()) grads.push_back(std::move(m));

    res.applied = opt.step(params, grads);
    res.skipped_nonfinite = !res.applied;
    return res;
}

}  // namespace dle
