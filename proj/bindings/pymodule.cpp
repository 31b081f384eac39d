#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "d2dpa/baselines.hpp"
#include "d2dpa/bench.hpp"
#include "d2dpa/objective.hpp"
#include "d2dpa/train.hpp"

namespace py = pybind11;
using namespace d2dpa;

namespace {

// Owns a config/params pair so Python never has to juggle the two separately.
struct Model {
    TgtConfig cfg;
    TgtParams params;

    static Model create(const TgtConfig& cfg, std::uint64_t seed) {
        Rng rng(seed);
        return Model{cfg, init_params(cfg, rng)};
    }

    std::vector<double> forward(const ChannelInstance& inst) const {
        return tgt_forward(inst, params, cfg).p;
    }
};

}  // namespace

PYBIND11_MODULE(_d2dpa, m) {
    m.doc() = "TGT power-allocation workbench for D2D interference channels";
    m.attr("__version__") = kToolVersion;

    py::class_<ChannelParams>(m, "ChannelParams")
        .def(py::init<>())
        .def_readwrite("sigma2", &ChannelParams::sigma2)
        .def_readwrite("pmax", &ChannelParams::pmax)
        .def_readwrite("fading_scale", &ChannelParams::fading_scale)
        .def_readwrite("weight", &ChannelParams::weight)
        .def_readwrite("half_width", &ChannelParams::half_width)
        .def_readwrite("rx_min", &ChannelParams::rx_min)
        .def_readwrite("rx_max", &ChannelParams::rx_max)
        .def_readwrite("pathloss_exponent", &ChannelParams::pathloss_exponent);

    py::class_<ChannelInstance>(m, "ChannelInstance")
        .def(py::init<>())
        .def_readwrite("n", &ChannelInstance::n)
        .def_readwrite("H", &ChannelInstance::H)
        .def_readwrite("sigma2", &ChannelInstance::sigma2)
        .def_readwrite("weights", &ChannelInstance::weights)
        .def_readwrite("pmax", &ChannelInstance::pmax)
        .def("gain", [](const ChannelInstance& c, int i, int j) { return c.gain(i, j); },
             py::arg("rx_i"), py::arg("tx_j"));

    py::class_<Dataset>(m, "Dataset")
        .def(py::init<>())
        .def_readonly("instances", &Dataset::instances)
        .def_readonly("topology_ids", &Dataset::topology_ids)
        .def_readonly("seed", &Dataset::seed)
        .def("__len__", [](const Dataset& d) { return d.instances.size(); });

    m.def("gen_dataset", &gen_dataset, py::arg("n_list"), py::arg("topologies"),
          py::arg("fades_per_topology"), py::arg("params") = ChannelParams{},
          py::arg("seed") = 1);
    m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
    m.def("load_dataset", &load_dataset, py::arg("path"));
    m.def("dataset_hash", &dataset_hash);

    m.def("max_power", [](const ChannelInstance& i) { return max_power(i).p; });
    m.def(
        "wmmse",
        [](const ChannelInstance& i, int iterations) {
            WmmseOptions o;
            o.iterations = iterations;
            return wmmse(i, o).p;
        },
        py::arg("instance"), py::arg("iterations") = 100);
    m.def("pair_rates", &pair_rates, py::arg("instance"), py::arg("p"));
    m.def("weighted_sum_rate", &weighted_sum_rate, py::arg("instance"), py::arg("p"));
    m.def(
        "homophily",
        [](const ChannelInstance& inst, const std::vector<double>& labels) {
            return channel_homophily(inst, labels).h;
        },
        py::arg("instance"), py::arg("labels"));

    py::class_<TgtConfig>(m, "TgtConfig")
        .def(py::init<>())
        .def_readwrite("d", &TgtConfig::d)
        .def_readwrite("heads", &TgtConfig::heads)
        .def_readwrite("layers", &TgtConfig::layers)
        .def_readwrite("leaky_slope", &TgtConfig::leaky_slope)
        .def_readwrite("share_qkv", &TgtConfig::share_qkv)
        .def_readwrite("pmax", &TgtConfig::pmax)
        .def("validate", &TgtConfig::validate);

    m.def("num_params", &num_params);

    py::class_<Model>(m, "Model")
        .def_static("create", &Model::create, py::arg("config") = TgtConfig{}, py::arg("seed") = 1)
        .def_static(
            "load",
            [](const std::string& path, const TgtConfig& cfg) {
                return Model{cfg, load_checkpoint(path, cfg)};
            },
            py::arg("path"), py::arg("config") = TgtConfig{})
        .def_readonly("config", &Model::cfg)
        .def("forward", &Model::forward, py::arg("instance"))
        .def("save", [](const Model& mdl, const std::string& path) {
            save_checkpoint(mdl.params, mdl.cfg, 0, 0, path);
        });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("val_fraction", &TrainConfig::val_fraction)
        .def_readwrite("cosine_decay", &TrainConfig::cosine_decay)
        .def_readwrite("lr_final", &TrainConfig::lr_final);

    m.def(
        "train",
        [](const TrainConfig& tc, const TgtConfig& cfg, const Dataset& ds) {
            TrainResult res = train(tc, cfg, ds);
            py::list history;
            for (const EpochRecord& r : res.history)
                history.append(py::make_tuple(r.epoch, r.train_loss, r.val_sum_rate));
            return py::make_tuple(Model{cfg, std::move(res.params)}, history, res.best_epoch);
        },
        py::arg("train_config"), py::arg("model_config"), py::arg("dataset"),
        "Returns (model, history, best_epoch); history rows are (epoch, loss, val_sum_rate).");

    m.def(
        "evaluate",
        [](const Model& mdl, const Dataset& ds) {
            EvalSummary s = evaluate(mdl.params, mdl.cfg, ds);
            return py::make_tuple(s.mean, s.stddev, s.per_instance);
        },
        py::arg("model"), py::arg("dataset"));
}
