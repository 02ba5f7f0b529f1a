#include "dle/graph.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "dle/log.hpp"

namespace dle {

using nlohmann::json;

const char* variant_name(Variant v) { return v == Variant::Common ? "common" : "local"; }

namespace {

inline double act_deriv_from_value(Activation a, double value) {
    switch (a) {
        case Activation::Relu: return value > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - value * value;
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

Vec lane_one_hot(int lane) {
    Vec v(kMaxOneHotLanes, 0.0);
    int idx = std::clamp(lane, 0, kMaxOneHotLanes - 1);
    v[static_cast<size_t>(idx)] = 1.0;
    return v;
}

}  // namespace

Vec RoadGraph::node_input(int idx) const {
    const RoadNode& n = nodes[static_cast<size_t>(idx)];
    const RoadNode& ref = nodes[static_cast<size_t>(reference_id)];
    Vec2 d = n.world - ref.world;
    Vec2 t = reference_tangent;
    Vec2 left{-t.y, t.x};
    Vec out(kRoadAttrs, 0.0);
    out[0] = dot(d, t);
    out[1] = dot(d, left);
    Vec oh_n = lane_one_hot(n.lane);
    Vec oh_r = lane_one_hot(ref.lane);
    for (int i = 0; i < kMaxOneHotLanes; ++i)
        out[static_cast<size_t>(2 + i)] = oh_n[static_cast<size_t>(i)] - oh_r[static_cast<size_t>(i)];
    return out;
}

EncoderBundle EncoderBundle::make(int embedding_dim, const std::vector<int>& encoder_hidden,
                                  int sage_depth, Rng& rng) {
    EncoderBundle enc;
    enc.embedding_dim = embedding_dim;

    std::vector<int> vsizes{kVehicleInput};
    std::vector<int> rsizes{kRoadAttrs};
    for (int h : encoder_hidden) {
        vsizes.push_back(h);
        rsizes.push_back(h);
    }
    vsizes.push_back(embedding_dim);
    rsizes.push_back(embedding_dim);
    std::vector<Activation> acts(vsizes.size() - 1, Activation::Relu);
    acts.back() = Activation::Identity;
    enc.vehicle_encoder = DenseNet(vsizes, acts);
    enc.road_encoder = DenseNet(rsizes, acts);
    enc.vehicle_encoder.init_params(rng);
    enc.road_encoder.init_params(rng);

    enc.w0 = Matrix(embedding_dim, embedding_dim);
    enc.w1 = Matrix(embedding_dim, embedding_dim);
    double bound = std::sqrt(6.0 / (embedding_dim + embedding_dim));
    for (auto& x : enc.w0.a) x = rng.uniform(-bound, bound);
    for (auto& x : enc.w1.a) x = rng.uniform(-bound, bound);

    double sb = std::sqrt(6.0 / (2 * embedding_dim + embedding_dim));
    for (int k = 0; k < sage_depth; ++k) {
        Matrix w(2 * embedding_dim, embedding_dim);
        for (auto& x : w.a) x = rng.uniform(-sb, sb);
        enc.sage_w.push_back(std::move(w));
    }
    return enc;
}

std::vector<Matrix*> EncoderBundle::params() {
    std::vector<Matrix*> p = vehicle_encoder.params();
    for (auto* m : road_encoder.params()) p.push_back(m);
    p.push_back(&w0);
    p.push_back(&w1);
    for (auto& m : sage_w) p.push_back(&m);
    return p;
}

std::vector<const Matrix*> EncoderBundle::params() const {
    std::vector<const Matrix*> p = vehicle_encoder.params();
    for (const auto* m : road_encoder.params()) p.push_back(m);
    p.push_back(&w0);
    p.push_back(&w1);
    for (const auto& m : sage_w) p.push_back(&m);
    return p;
}

size_t EncoderBundle::param_count() const {
    size_t n = 0;
    for (const auto* m : params()) n += m->size();
    return n;
}

size_t EncoderBundle::policy_param_count() const {
    return vehicle_encoder.param_count() + w0.size() + w1.size();
}

size_t EncoderBundle::regional_param_count() const {
    size_t n = road_encoder.param_count();
    for (const auto& m : sage_w) n += m.size();
    return n;
}

std::string EncoderBundle::to_json_string() const {
    json j;
    j["format_version"] = 1;
    j["embedding_dim"] = embedding_dim;
    j["sigma"] = activation_name(sigma);
    j["vehicle_encoder"] = json::parse(vehicle_encoder.to_json_string());
    j["road_encoder"] = json::parse(road_encoder.to_json_string());
    j["w0_row_major"] = w0.a;
    j["w1_row_major"] = w1.a;
    json sj = json::array();
    for (const auto& m : sage_w) sj.push_back(m.a);
    j["sage_w_row_major"] = sj;
    return j.dump();
}

EncoderBundle EncoderBundle::from_json_string(const std::string& s) {
    json j = json::parse(s);
    EncoderBundle enc;
    enc.embedding_dim = j.at("embedding_dim").get<int>();
    enc.sigma = activation_from_name(j.at("sigma").get<std::string>());
    enc.vehicle_encoder = DenseNet::from_json_string(j.at("vehicle_encoder").dump());
    enc.road_encoder = DenseNet::from_json_string(j.at("road_encoder").dump());
    int d = enc.embedding_dim;
    enc.w0 = Matrix(d, d);
    enc.w0.a = j.at("w0_row_major").get<std::vector<double>>();
    enc.w1 = Matrix(d, d);
    enc.w1.a = j.at("w1_row_major").get<std::vector<double>>();
    for (const auto& mj : j.at("sage_w_row_major")) {
        Matrix m(2 * d, d);
        m.a = mj.get<std::vector<double>>();
        if (m.a.size() != static_cast<size_t>(2 * d * d))
            throw std::invalid_argument("EncoderBundle: sage weight shape mismatch");
        enc.sage_w.push_back(std::move(m));
    }
    if (enc.w0.a.size() != static_cast<size_t>(d * d) || enc.w1.a.size() != static_cast<size_t>(d * d))
        throw std::invalid_argument("EncoderBundle: fusion weight shape mismatch");
    return enc;
}

EncGrads EncGrads::zeros_like(const EncoderBundle& enc) {
    EncGrads g;
    g.veh = enc.vehicle_encoder.zero_grads();
    g.road = enc.road_encoder.zero_grads();
    g.w0 = Matrix(enc.w0.rows, enc.w0.cols);
    g.w1 = Matrix(enc.w1.rows, enc.w1.cols);
    for (const auto& m : enc.sage_w) g.sage.emplace_back(m.rows, m.cols);
    return g;
}

void EncGrads::add(const EncGrads& o, double s) {
    veh.add(o.veh, s);
    road.add(o.road, s);
    add_scaled(w0.a, o.w0.a, s);
    add_scaled(w1.a, o.w1.a, s);
    for (size_t i = 0; i < sage.size(); ++i) add_scaled(sage[i].a, o.sage[i].a, s);
}

void EncGrads::scale(double s) {
    veh.scale(s);
    road.scale(s);
    for (auto& v : w0.a) v *= s;
    for (auto& v : w1.a) v *= s;
    for (auto& m : sage)
        for (auto& v : m.a) v *= s;
}

std::vector<Matrix> EncGrads::as_list() const {
    std::vector<Matrix> out;
    for (const auto& m : veh.g) out.push_back(m);
    for (const auto& m : road.g) out.push_back(m);
    out.push_back(w0);
    out.push_back(w1);
    for (const auto& m : sage) out.push_back(m);
    return out;
}

std::vector<Matrix> EncGrads::into_list() && {
    std::vector<Matrix> out;
    for (auto& m : veh.g) out.push_back(std::move(m));
    for (auto& m : road.g) out.push_back(std::move(m));
    out.push_back(std::move(w0));
    out.push_back(std::move(w1));
    for (auto& m : sage) out.push_back(std::move(m));
    return out;
}

SceneNodes build_vehicle_nodes(const SimState& state, const RegionSpec& region) {
    SceneNodes out;
    const VehicleAgent& ego = state.ego();
    const RoadGeometry& geom = region.geometry;
    int ego_lane = ego.lane;

    auto frame_of = [&](const VehicleAgent& a) {
        Pose pose = agent_pose(a, region);
        LaneCoords c = lane_coordinates(pose, geom, ego_lane);
        const Lane& lane = geom.lanes[static_cast<size_t>(ego_lane)];
        Vec2 tan = lane.tangent_at(c.s);
        Vec2 left{-tan.y, tan.x};
        // velocity in the ego-lane frame
        double dldt = 0.0;
        if (a.changing()) {
            double tau = std::min(a.change_progress, 1.0);
            dldt = -a.change_l0_m * (M_PI / (2.0 * region.lane_change_duration_s)) * std::sin(M_PI * tau);
        }
        const Lane& own = geom.lanes[static_cast<size_t>(a.lane)];
        Vec2 own_tan = own.tangent_at(a.s_m);
        Vec2 vel = a.speed_mps * own_tan + dldt * Vec2{-own_tan.y, own_tan.x};
        VehicleNode n;
        n.s = c.s;
        n.l = c.l;
        n.s_dot = dot(vel, tan);
        n.l_dot = dot(vel, left);
        n.dtheta = c.dtheta;
        n.present = true;
        return n;
    };

    VehicleNode ego_node = frame_of(ego);
    double s_ego = ego_node.s;
    ego_node.s = 0.0;  // longitudinal offsets are ego-relative
    out.nodes[0] = ego_node;
    out.agent_lane[0] = ego.lane;
    out.agent_s[0] = ego.s_m;

    struct Cand {
        double abs_ds;
        int id;
        VehicleNode node;
        int lane;
        double s;
    };
    std::vector<Cand> cands;
    for (const auto& a : state.agents) {
        if (!a.active || a.id == state.ego_id) continue;
        VehicleNode n = frame_of(a);
        n.s -= s_ego;
        cands.push_back({std::fabs(n.s), a.id, n, a.lane, a.s_m});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return a.abs_ds != b.abs_ds ? a.abs_ds < b.abs_ds : a.id < b.id;
    });
    for (size_t i = 0; i < cands.size() && i + 1 < kVehicleSlots; ++i) {
        out.nodes[i + 1] = cands[i].node;
        out.agent_lane[i + 1] = cands[i].lane;
        out.agent_s[i + 1] = cands[i].s;
    }
    return out;
}

RoadGraph build_road_graph(const RoadGeometry& geom, const Pose& ego_pose, int region_id,
                           double window_ahead_m, double window_behind_m) {
    if (window_ahead_m <= 0.0 || window_behind_m < 0.0)
        throw std::invalid_argument("build_road_graph: window must be positive");
    RoadGraph graph;
    graph.region_id = region_id;

    bool inside_any = false;
    for (int lane_id = 0; lane_id < geom.lane_count(); ++lane_id) {
        LaneCoords lc = lane_coordinates(ego_pose, geom, lane_id);
        if (!lc.clamped && std::fabs(lc.l) <= 4.0 * geom.lanes[static_cast<size_t>(lane_id)].width_m)
            inside_any = true;
    }
    if (!inside_any) {
        logf(LogLevel::Warn, "build_road_graph: ego outside geometry, returning empty graph");
        graph.ego_outside = true;
        return graph;
    }

    // the window is anchored at the ego's arclength on each lane; nodes sit
    // on the lane-anchored grid (multiples of the spacing from lane start)
    for (int lane_id = 0; lane_id < geom.lane_count(); ++lane_id) {
        const Lane& lane = geom.lanes[static_cast<size_t>(lane_id)];
        LaneCoords c = lane_coordinates(ego_pose, geom, lane_id);
        double spacing = 0.5 * lane.speed_limit_mps;
        double lo = std::max(0.0, c.s - window_behind_m);
        double hi = std::min(lane.length(), c.s + window_ahead_m);
        int k_lo = static_cast<int>(std::ceil(lo / spacing - 1e-9));
        int prev_in_lane = -1;
        for (int k = k_lo;; ++k) {
            double s = k * spacing;
            if (s >= hi - 1e-9) break;
            RoadNode n;
            n.id = static_cast<int>(graph.nodes.size());
            n.lane = lane_id;
            n.s_m = s;
            n.world = lane.point_at(s);
            n.predecessor = prev_in_lane;
            prev_in_lane = n.id;
            graph.nodes.push_back(n);
        }
    }

    graph.adjacency.assign(graph.nodes.size(), {});
    for (const auto& n : graph.nodes) {
        if (n.predecessor >= 0) {
            graph.adjacency[static_cast<size_t>(n.id)].push_back(n.predecessor);
            graph.adjacency[static_cast<size_t>(n.predecessor)].push_back(n.id);
        }
    }

    double best = std::numeric_limits<double>::infinity();
    Vec2 p{ego_pose.x, ego_pose.y};
    for (const auto& n : graph.nodes) {
        double d2 = dot(n.world - p, n.world - p);
        if (d2 < best - 1e-15) {
            best = d2;
            graph.reference_id = n.id;
        }
    }
    if (graph.reference_id >= 0) {
        const RoadNode& ref = graph.nodes[static_cast<size_t>(graph.reference_id)];
        graph.reference_tangent = geom.lanes[static_cast<size_t>(ref.lane)].tangent_at(ref.s_m);
    }
    return graph;
}

void associate_vehicles(RoadGraph& graph, const SceneNodes& scene) {
    for (auto& v : graph.slot_nodes) v.clear();
    if (graph.empty()) return;
    for (int slot = 0; slot < kVehicleSlots; ++slot) {
        if (!scene.nodes[static_cast<size_t>(slot)].present) continue;
        int lane = scene.agent_lane[static_cast<size_t>(slot)];
        double s = scene.agent_s[static_cast<size_t>(slot)];
        int behind = -1, ahead1 = -1, ahead2 = -1;
        double behind_s = -std::numeric_limits<double>::infinity();
        double a1 = std::numeric_limits<double>::infinity(), a2 = a1;
        for (const auto& n : graph.nodes) {
            if (n.lane != lane) continue;
            if (n.s_m <= s) {
                if (n.s_m > behind_s) {
                    behind_s = n.s_m;
                    behind = n.id;
                }
            } else if (n.s_m < a1) {
                a2 = a1;
                ahead2 = ahead1;
                a1 = n.s_m;
                ahead1 = n.id;
            } else if (n.s_m < a2) {
                a2 = n.s_m;
                ahead2 = n.id;
            }
        }
        auto& out = graph.slot_nodes[static_cast<size_t>(slot)];
        if (behind >= 0) out.push_back(behind);
        if (ahead1 >= 0) out.push_back(ahead1);
        if (ahead2 >= 0) out.push_back(ahead2);
    }
}

Vec encode_vehicle(const VehicleNode& node, const EncoderBundle& enc) {
    return enc.vehicle_encoder.forward(node.input());
}

Vec encode_road(const RoadGraph& graph, int node_idx, const EncoderBundle& enc) {
    return enc.road_encoder.forward(graph.node_input(node_idx));
}

std::vector<Vec> sage_aggregate(const RoadGraph& graph, const std::vector<Vec>& initial,
                                const EncoderBundle& enc, int depth) {
    if (depth < 1) throw std::invalid_argument("sage_aggregate: depth must be >= 1");
    if (depth > enc.sage_depth())
        throw std::invalid_argument("sage_aggregate: depth exceeds available weights");
    if (initial.size() != graph.nodes.size())
        throw std::invalid_argument("sage_aggregate: embedding count != node count");

    int d = enc.embedding_dim;
    std::vector<Vec> cur = initial;
    for (int k = 0; k < depth; ++k) {
        const Matrix& w = enc.sage_w[static_cast<size_t>(k)];
        std::vector<Vec> next(cur.size());
        for (size_t i = 0; i < cur.size(); ++i) {
            Vec mean(static_cast<size_t>(d), 0.0);
            const auto& nb = graph.adjacency[i];
            if (!nb.empty()) {
                for (int u : nb) add_scaled(mean, cur[static_cast<size_t>(u)], 1.0);
                for (auto& x : mean) x /= static_cast<double>(nb.size());
            }
            Vec cat(static_cast<size_t>(2 * d));
            for (int c = 0; c < d; ++c) {
                cat[static_cast<size_t>(c)] = cur[i][static_cast<size_t>(c)];
                cat[static_cast<size_t>(d + c)] = act_apply(enc.sigma, mean[static_cast<size_t>(c)]);
            }
            Vec z;
            matvec(w, cat, z);
            for (auto& x : z) x = act_apply(enc.sigma, x);
            next[i] = std::move(z);
        }
        cur = std::move(next);
    }
    return cur;
}

EncodedState fuse(const std::array<Vec, kVehicleSlots>& xv, const std::vector<Vec>& xr,
                  const std::array<std::vector<int>, kVehicleSlots>& assoc, const EncoderBundle& enc,
                  bool local) {
    int d = enc.embedding_dim;
    EncodedState out;
    out.variant = local ? Variant::Local : Variant::Common;
    out.x.assign(static_cast<size_t>(kVehicleSlots * d), 0.0);
    for (int slot = 0; slot < kVehicleSlots; ++slot) {
        Vec y;
        matvec(enc.w0, xv[static_cast<size_t>(slot)], y);
        if (local) {
            for (int j : assoc[static_cast<size_t>(slot)]) {
                Vec sig(xr[static_cast<size_t>(j)].size());
                for (size_t c = 0; c < sig.size(); ++c)
                    sig[c] = act_apply(enc.sigma, xr[static_cast<size_t>(j)][c]);
                Vec term;
                matvec(enc.w1, sig, term);
                add_scaled(y, term, 1.0);
            }
        }
        std::copy(y.begin(), y.end(), out.x.begin() + static_cast<long>(slot) * d);
    }
    return out;
}

EncodedState encode_scene(const EncoderBundle& enc, const SceneNodes& scene, const RoadGraph* graph,
                          Variant variant, EncodeTrace* trace) {
    bool local = variant == Variant::Local;
    if (local && (!graph || graph->empty())) {
        // no regional data: the local path degenerates to the common one
        local = false;
    }
    int d = enc.embedding_dim;

    EncodeTrace local_trace;
    EncodeTrace& tr = trace ? *trace : local_trace;
    tr = EncodeTrace{};
    tr.local = local;
    tr.graph = local ? graph : nullptr;

    std::array<Vec, kVehicleSlots> xv;
    for (int i = 0; i < kVehicleSlots; ++i) {
        xv[static_cast<size_t>(i)] = enc.vehicle_encoder.forward(scene.nodes[static_cast<size_t>(i)].input(),
                                                                 tr.veh_traces[static_cast<size_t>(i)]);
    }
    tr.xv = xv;

    std::vector<Vec> xr;
    if (local) {
        size_t n = graph->nodes.size();
        tr.road_traces.resize(n);
        tr.h0.resize(n);
        for (size_t j = 0; j < n; ++j)
            tr.h0[j] = enc.road_encoder.forward(graph->node_input(static_cast<int>(j)), tr.road_traces[j]);

        int depth = enc.sage_depth();
        tr.nb_mean.resize(static_cast<size_t>(depth));
        tr.nb_act.resize(static_cast<size_t>(depth));
        tr.z.resize(static_cast<size_t>(depth));
        tr.h.resize(static_cast<size_t>(depth));
        std::vector<Vec> cur = tr.h0;
        for (int k = 0; k < depth; ++k) {
            const Matrix& w = enc.sage_w[static_cast<size_t>(k)];
            auto& nbm = tr.nb_mean[static_cast<size_t>(k)];
            auto& nba = tr.nb_act[static_cast<size_t>(k)];
            auto& zk = tr.z[static_cast<size_t>(k)];
            auto& hk = tr.h[static_cast<size_t>(k)];
            nbm.resize(n);
            nba.resize(n);
            zk.resize(n);
            hk.resize(n);
            for (size_t i = 0; i < n; ++i) {
                Vec mean(static_cast<size_t>(d), 0.0);
                const auto& nb = graph->adjacency[i];
                if (!nb.empty()) {
                    for (int u : nb) add_scaled(mean, cur[static_cast<size_t>(u)], 1.0);
                    for (auto& x : mean) x /= static_cast<double>(nb.size());
                }
                nbm[i] = mean;
                Vec a(mean.size());
                for (size_t c = 0; c < mean.size(); ++c) a[c] = act_apply(enc.sigma, mean[c]);
                nba[i] = a;
                Vec cat(static_cast<size_t>(2 * d));
                for (int c = 0; c < d; ++c) {
                    cat[static_cast<size_t>(c)] = cur[i][static_cast<size_t>(c)];
                    cat[static_cast<size_t>(d + c)] = a[static_cast<size_t>(c)];
                }
                Vec z;
                matvec(w, cat, z);
                zk[i] = z;
                Vec h(z.size());
                for (size_t c = 0; c < z.size(); ++c) h[c] = act_apply(enc.sigma, z[c]);
                hk[i] = std::move(h);
            }
            cur = hk;
        }
        xr = depth > 0 ? tr.h.back() : tr.h0;
        tr.sigma_xr.resize(n);
        for (size_t j = 0; j < n; ++j) {
            Vec sig(xr[j].size());
            for (size_t c = 0; c < sig.size(); ++c) sig[c] = act_apply(enc.sigma, xr[j][c]);
            tr.sigma_xr[j] = std::move(sig);
        }
        tr.assoc = graph->slot_nodes;
    }

    EncodedState out;
    out.variant = variant;
    out.x.assign(static_cast<size_t>(kVehicleSlots * d), 0.0);
    for (int slot = 0; slot < kVehicleSlots; ++slot) {
        Vec y;
        matvec(enc.w0, xv[static_cast<size_t>(slot)], y);
        if (local) {
            for (int j : tr.assoc[static_cast<size_t>(slot)]) {
                Vec term;
                matvec(enc.w1, tr.sigma_xr[static_cast<size_t>(j)], term);
                add_scaled(y, term, 1.0);
            }
        }
        std::copy(y.begin(), y.end(), out.x.begin() + static_cast<long>(slot) * d);
    }
    tr.x = out.x;
    return out;
}

void encode_scene_backward(const EncoderBundle& enc, const EncodeTrace& tr, const Vec& dx,
                           EncGrads& grads) {
    int d = enc.embedding_dim;
    if (static_cast<int>(dx.size()) != kVehicleSlots * d)
        throw std::invalid_argument("encode_scene_backward: gradient size mismatch");

    size_t n = tr.local && tr.graph ? tr.graph->nodes.size() : 0;
    std::vector<Vec> d_sigma_xr(n, Vec(static_cast<size_t>(d), 0.0));

    for (int slot = 0; slot < kVehicleSlots; ++slot) {
        Vec dy(dx.begin() + static_cast<long>(slot) * d, dx.begin() + static_cast<long>(slot + 1) * d);
        // x^v branch
        add_outer(grads.w0, tr.xv[static_cast<size_t>(slot)], dy);
        Vec dxv;
        matvec_transposed(enc.w0, dy, dxv);
        Vec din;
        NetGrads vg = enc.vehicle_encoder.backward(tr.veh_traces[static_cast<size_t>(slot)], dxv, &din);
        grads.veh.add(vg, 1.0);
        // road branch
        if (tr.local) {
            for (int j : tr.assoc[static_cast<size_t>(slot)]) {
                add_outer(grads.w1, tr.sigma_xr[static_cast<size_t>(j)], dy);
                Vec ds;
                matvec_transposed(enc.w1, dy, ds);
                add_scaled(d_sigma_xr[static_cast<size_t>(j)], ds, 1.0);
            }
        }
    }

    if (tr.local && n > 0) {
        int depth = enc.sage_depth();
        const std::vector<Vec>& xr = depth > 0 ? tr.h.back() : tr.h0;
        // through the fusion nonlinearity
        std::vector<Vec> dh(n, Vec(static_cast<size_t>(d), 0.0));
        for (size_t j = 0; j < n; ++j)
            for (int c = 0; c < d; ++c)
                dh[j][static_cast<size_t>(c)] =
                    d_sigma_xr[j][static_cast<size_t>(c)] *
                    act_deriv_from_value(enc.sigma, xr[j][static_cast<size_t>(c)]);

        for (int k = depth - 1; k >= 0; --k) {
            const Matrix& w = enc.sage_w[static_cast<size_t>(k)];
            const std::vector<Vec>& prev = k > 0 ? tr.h[static_cast<size_t>(k - 1)] : tr.h0;
            std::vector<Vec> dprev(n, Vec(static_cast<size_t>(d), 0.0));
            for (size_t i = 0; i < n; ++i) {
                Vec dz(static_cast<size_t>(d));
                for (int c = 0; c < d; ++c)
                    dz[static_cast<size_t>(c)] =
                        dh[i][static_cast<size_t>(c)] *
                        act_deriv(enc.sigma, tr.z[static_cast<size_t>(k)][i][static_cast<size_t>(c)]);
                Vec cat(static_cast<size_t>(2 * d));
                for (int c = 0; c < d; ++c) {
                    cat[static_cast<size_t>(c)] = prev[i][static_cast<size_t>(c)];
                    cat[static_cast<size_t>(d + c)] = tr.nb_act[static_cast<size_t>(k)][i][static_cast<size_t>(c)];
                }
                add_outer(grads.sage[static_cast<size_t>(k)], cat, dz);
                Vec dcat;
                matvec_transposed(w, dz, dcat);
                for (int c = 0; c < d; ++c) dprev[i][static_cast<size_t>(c)] += dcat[static_cast<size_t>(c)];
                const auto& nb = tr.graph->adjacency[i];
                if (!nb.empty()) {
                    double inv = 1.0 / static_cast<double>(nb.size());
                    for (int c = 0; c < d; ++c) {
                        double da = dcat[static_cast<size_t>(d + c)] *
                                    act_deriv(enc.sigma,
                                              tr.nb_mean[static_cast<size_t>(k)][i][static_cast<size_t>(c)]);
                        if (da == 0.0) continue;
                        for (int u : nb) dprev[static_cast<size_t>(u)][static_cast<size_t>(c)] += da * inv;
                    }
                }
            }
            dh = std::move(dprev);
        }

        for (size_t j = 0; j < n; ++j) {
            NetGrads rg = enc.road_encoder.backward(tr.road_traces[j], dh[j]);
            grads.road.add(rg, 1.0);
        }
    }

}

// ---- regional store ---------------------------------------------------------

std::string RegionalStore::to_json_string() const {
    json j;
    j["format_version"] = 1;
    j["region_id"] = region_id;
    j["config_hash"] = config_hash;
    j["sigma"] = activation_name(sigma);
    j["road_encoder"] = json::parse(road_encoder.to_json_string());
    json sj = json::array();
    for (const auto& m : sage_w) sj.push_back({{"rows", m.rows}, {"cols", m.cols}, {"row_major", m.a}});
    j["sage_w"] = sj;
    json grid = json::array();
    for (const auto& [lane, s] : node_grid) grid.push_back({{"lane", lane}, {"s_m", s}});
    j["node_grid"] = grid;
    return j.dump(2);
}

RegionalStore RegionalStore::from_json_string(const std::string& s) {
    json j = json::parse(s);
    RegionalStore st;
    st.region_id = j.at("region_id").get<int>();
    st.config_hash = j.value("config_hash", "");
    st.sigma = activation_from_name(j.at("sigma").get<std::string>());
    st.road_encoder = DenseNet::from_json_string(j.at("road_encoder").dump());
    for (const auto& mj : j.at("sage_w")) {
        Matrix m(mj.at("rows").get<int>(), mj.at("cols").get<int>());
        m.a = mj.at("row_major").get<std::vector<double>>();
        st.sage_w.push_back(std::move(m));
    }
    for (const auto& gj : j.at("node_grid"))
        st.node_grid.emplace_back(gj.at("lane").get<int>(), gj.at("s_m").get<double>());
    return st;
}

RegionalStore make_regional_store(const RegionSpec& region, const EncoderBundle& enc,
                                  const std::string& config_hash) {
    RegionalStore st;
    st.region_id = region.region_id;
    st.road_encoder = enc.road_encoder;
    st.sage_w = enc.sage_w;
    st.sigma = enc.sigma;
    st.config_hash = config_hash;
    for (int lane_id = 0; lane_id < region.geometry.lane_count(); ++lane_id) {
        const Lane& lane = region.geometry.lanes[static_cast<size_t>(lane_id)];
        double spacing = 0.5 * lane.speed_limit_mps;
        for (int k = 0;; ++k) {
            double s = k * spacing;
            if (s >= lane.length() - 1e-9) break;
            st.node_grid.emplace_back(lane_id, s);
        }
    }
    return st;
}

}  // namespace dle
