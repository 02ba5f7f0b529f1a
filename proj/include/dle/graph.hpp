#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dle/nn.hpp"
#include "dle/sim.hpp"

namespace dle {

inline constexpr int kVehicleSlots = 7;
inline constexpr int kVehicleAttrs = 5;   // s, l, s_dot, l_dot, dtheta
inline constexpr int kVehicleInput = 6;   // attrs + presence flag
inline constexpr int kRoadAttrs = 5;      // ds, dl, lane one-hot (3)
inline constexpr int kMaxOneHotLanes = 3;

/// One observed vehicle in the ego lane's coordinate frame. Longitudinal
/// offsets are ego-relative; absent slots are all-zero with present=false.
struct VehicleNode {
    double s = 0.0;
    double l = 0.0;
    double s_dot = 0.0;
    double l_dot = 0.0;
    double dtheta = 0.0;
    bool present = false;

    Vec input() const { return {s, l, s_dot, l_dot, dtheta, present ? 1.0 : 0.0}; }
};

/// Slot attributes plus where each underlying agent actually is, needed to
/// associate slots with road nodes.
struct SceneNodes {
    std::array<VehicleNode, kVehicleSlots> nodes;
    std::array<int, kVehicleSlots> agent_lane{};
    std::array<double, kVehicleSlots> agent_s{};
};

struct RoadNode {
    int id = -1;
    int lane = 0;
    double s_m = 0.0;
    Vec2 world;
    int predecessor = -1;  // node id, at most one
};

struct RoadGraph {
    std::vector<RoadNode> nodes;
    int reference_id = -1;
    int region_id = 0;
    Vec2 reference_tangent{1.0, 0.0};
    std::vector<std::vector<int>> adjacency;  // symmetric closure of predecessor edges
    std::array<std::vector<int>, kVehicleSlots> slot_nodes;  // vehicle-association edges
    bool ego_outside = false;

    bool empty() const { return nodes.empty(); }
    /// (ds, dl) in the reference frame plus lane one-hot, minus the
    /// reference node's own attributes; zero for the reference node.
    Vec node_input(int idx) const;
};

/// Parameters of the state encoding: vehicle/road node encoders, the fusion
/// weights, and the neighbourhood-aggregation weight per depth.
struct EncoderBundle {
    DenseNet vehicle_encoder;  // kVehicleInput -> d
    DenseNet road_encoder;     // kRoadAttrs -> d
    Matrix w0, w1;             // d x d
    std::vector<Matrix> sage_w;  // 2d x d per depth
    int embedding_dim = 0;
    Activation sigma = Activation::Relu;

    static EncoderBundle make(int embedding_dim, const std::vector<int>& encoder_hidden, int sage_depth,
                              Rng& rng);

    int sage_depth() const { return static_cast<int>(sage_w.size()); }
    int state_dim() const { return kVehicleSlots * embedding_dim; }

    std::vector<Matrix*> params();
    std::vector<const Matrix*> params() const;
    size_t param_count() const;
    /// On-board policy parameters: vehicle encoder + fusion weights.
    size_t policy_param_count() const;
    /// Parameters persisted in the regional store: road encoder + aggregation.
    size_t regional_param_count() const;

    std::string to_json_string() const;
    static EncoderBundle from_json_string(const std::string& s);
};

enum class Variant { Common, Local };
const char* variant_name(Variant v);

struct EncodedState {
    Vec x;
    Variant variant = Variant::Common;
};

/// Gradients aligned with EncoderBundle::params() order.
struct EncGrads {
    NetGrads veh, road;
    Matrix w0, w1;
    std::vector<Matrix> sage;

    static EncGrads zeros_like(const EncoderBundle& enc);
    void add(const EncGrads& o, double scale = 1.0);
    void scale(double s);
    std::vector<Matrix> into_list() &&;
    std::vector<Matrix> as_list() const;
};

/// Cached intermediates of encode_scene for the hand-specified backward.
struct EncodeTrace {
    bool local = false;
    std::array<DenseTrace, kVehicleSlots> veh_traces;
    std::array<Vec, kVehicleSlots> xv;
    std::vector<DenseTrace> road_traces;
    std::vector<Vec> h0;                       // road embeddings at depth 0
    std::vector<std::vector<Vec>> nb_mean;     // per depth, per node (pre-activation)
    std::vector<std::vector<Vec>> nb_act;      // sigma(nb_mean)
    std::vector<std::vector<Vec>> z;           // per depth, per node, pre-activation of W^k concat
    std::vector<std::vector<Vec>> h;           // per depth, per node, post-activation
    std::vector<Vec> sigma_xr;                 // sigma(final road embedding)
    const RoadGraph* graph = nullptr;
    std::array<std::vector<int>, kVehicleSlots> assoc;
    Vec x;
};

/// Fills the 7 vehicle slots: ego first, then the 6 nearest others by
/// longitudinal distance (ties by agent id), zero-padded.
SceneNodes build_vehicle_nodes(const SimState& state, const RegionSpec& region);

/// Lane-aligned road-node chains around the ego (window behind/ahead), node
/// spacing = half the 1 s travel distance at the lane speed limit. Nodes sit
/// on a lane-anchored grid so windows cut consistent subsets.
RoadGraph build_road_graph(const RoadGeometry& geom, const Pose& ego_pose, int region_id,
                           double window_ahead_m = 100.0, double window_behind_m = 50.0);

/// Adds vehicle-association edges: per occupied slot the nearest same-lane
/// road node behind plus the two ahead.
void associate_vehicles(RoadGraph& graph, const SceneNodes& scene);

Vec encode_vehicle(const VehicleNode& node, const EncoderBundle& enc);
Vec encode_road(const RoadGraph& graph, int node_idx, const EncoderBundle& enc);

/// Neighbourhood aggregation over the road graph: per depth, mean of
/// neighbour embeddings -> nonlinearity -> concat with self -> linear ->
/// nonlinearity. Nodes without neighbours aggregate a zero vector.
std::vector<Vec> sage_aggregate(const RoadGraph& graph, const std::vector<Vec>& initial,
                                const EncoderBundle& enc, int depth);

/// x_slot = x^v W0 (+ sum_j sigma(x^r_j) W1 over associated nodes when local).
EncodedState fuse(const std::array<Vec, kVehicleSlots>& xv,
                  const std::vector<Vec>& xr,
                  const std::array<std::vector<int>, kVehicleSlots>& assoc,
                  const EncoderBundle& enc, bool local);

/// Full pipeline; pass a trace to enable encode_scene_backward.
EncodedState encode_scene(const EncoderBundle& enc, const SceneNodes& scene, const RoadGraph* graph,
                          Variant variant, EncodeTrace* trace = nullptr);

/// Backpropagates d(loss)/dx through fuse/aggregation/encoders, accumulating
/// into `grads`. Scaling is folded into dx by the caller.
void encode_scene_backward(const EncoderBundle& enc, const EncodeTrace& trace, const Vec& dx,
                           EncGrads& grads);

/// Persisted per-region container: the learned road-side parameters plus the
/// region's node-chain topology.
struct RegionalStore {
    int region_id = 0;
    DenseNet road_encoder;
    std::vector<Matrix> sage_w;
    Activation sigma = Activation::Relu;
    // topology snapshot (lane, arclength) of the full-extent node grid
    std::vector<std::pair<int, double>> node_grid;
    std::string config_hash;

    std::string to_json_string() const;
    static RegionalStore from_json_string(const std::string& s);
};

RegionalStore make_regional_store(const RegionSpec& region, const EncoderBundle& enc,
                                  const std::string& config_hash);

}  // namespace dle
