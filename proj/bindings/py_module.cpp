#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dle/commands.hpp"
#include "dle/eval.hpp"
#include "dle/mine.hpp"
#include "dle/runio.hpp"

namespace py = pybind11;
using namespace dle;

PYBIND11_MODULE(_core, m) {
    m.doc() = "DLE planner core: simulator, encoders, training and metrics";

    py::enum_<Action>(m, "Action")
        .value("LANE_LEFT", Action::LaneLeft)
        .value("IDLE", Action::Idle)
        .value("LANE_RIGHT", Action::LaneRight)
        .value("FASTER", Action::Faster)
        .value("SLOWER", Action::Slower);

    py::class_<IdmParams>(m, "IdmParams")
        .def(py::init<>())
        .def_readwrite("desired_velocity_mps", &IdmParams::desired_velocity_mps)
        .def_readwrite("desired_time_gap_s", &IdmParams::desired_time_gap_s)
        .def_readwrite("jam_distance_m", &IdmParams::jam_distance_m)
        .def_readwrite("velocity_exponent", &IdmParams::velocity_exponent)
        .def_readwrite("max_acceleration_mps2", &IdmParams::max_acceleration_mps2)
        .def_readwrite("desired_deceleration_mps2", &IdmParams::desired_deceleration_mps2);

    m.def(
        "idm_acceleration",
        [](double speed, std::optional<std::pair<double, double>> leader, const IdmParams& p) {
            std::optional<LeaderInfo> li;
            if (leader) li = LeaderInfo{leader->first, leader->second};
            return idm_acceleration(speed, li, p).accel_mps2;
        },
        py::arg("ego_speed_mps"), py::arg("leader_gap_and_speed") = std::nullopt,
        py::arg("params") = IdmParams{},
        "Car-following acceleration; leader given as (gap_m, speed_mps)");

    py::class_<DenseNet>(m, "DenseNet")
        .def(py::init([](const std::vector<int>& sizes, const std::vector<std::string>& acts,
                         uint64_t seed) {
                 std::vector<Activation> a;
                 for (const auto& s : acts) a.push_back(activation_from_name(s));
                 DenseNet net(sizes, a);
                 Rng rng(seed);
                 net.init_params(rng);
                 return net;
             }),
             py::arg("layer_sizes"), py::arg("activations"), py::arg("seed") = 0)
        .def("forward", [](const DenseNet& n, const Vec& x) { return n.forward(x); })
        .def("param_count", &DenseNet::param_count)
        .def("to_json", &DenseNet::to_json_string)
        .def_static("from_json", &DenseNet::from_json_string);

    py::class_<RegionSpec>(m, "RegionSpec")
        .def_readonly("region_id", &RegionSpec::region_id)
        .def_readonly("episode_horizon_decisions", &RegionSpec::episode_horizon_decisions)
        .def_static("load", &load_region_file, py::arg("path"))
        .def("to_json", &region_to_json_string);

    py::class_<SimState>(m, "SimState")
        .def_readonly("time_s", &SimState::time_s)
        .def_readonly("decision_count", &SimState::decision_count)
        .def_readonly("terminal", &SimState::terminal)
        .def_property_readonly("terminal_cause",
                               [](const SimState& s) { return std::string(terminal_cause_name(s.cause)); })
        .def_property_readonly("ego_speed_mps", [](const SimState& s) { return s.ego().speed_mps; })
        .def_property_readonly("ego_lane", [](const SimState& s) { return s.ego().lane; });

    m.def("sample_scenario", &sample_scenario, py::arg("region"), py::arg("seed"));
    m.def(
        "sim_step",
        [](SimState& state, int action, const RegionSpec& region) {
            StepResult r = step(state, static_cast<Action>(action), region);
            RewardBreakdown rb = reward(r.reward_ctx, RewardWeights::defaults());
            py::dict info;
            info["collision"] = r.events.ego_collision;
            info["lane_change_completed"] = r.events.ego_lane_change_completed;
            info["terminal"] = state.terminal;
            return py::make_tuple(rb.total, state.terminal, info);
        },
        py::arg("state"), py::arg("action"), py::arg("region"),
        "Advance one decision step; returns (reward, terminal, info)");

    m.def("apr", &apr, py::arg("policy_returns"), py::arg("optimal_returns"));
    m.def("anneal_beta", &anneal_beta, py::arg("step"), py::arg("total_anneal_steps"), py::arg("beta0"));
    m.def(
        "lane_coordinates",
        [](double x, double y, double heading, const RegionSpec& region, int lane_id) {
            LaneCoords c = lane_coordinates(Pose{x, y, heading}, region.geometry, lane_id);
            return py::make_tuple(c.s, c.l, c.dtheta);
        },
        py::arg("x"), py::arg("y"), py::arg("heading"), py::arg("region"), py::arg("lane_id"));

    m.def(
        "train_and_save",
        [](const std::string& config_path) { return cmd_train(config_path, std::nullopt); },
        py::arg("config_path"), "Run a full training from a run-config file; returns the exit code");
}
