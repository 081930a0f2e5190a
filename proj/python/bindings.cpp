#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lbpnet/activations.hpp"
#include "lbpnet/checkpoint.hpp"
#include "lbpnet/config.hpp"
#include "lbpnet/cost_model.hpp"
#include "lbpnet/dataset.hpp"
#include "lbpnet/lbp_layer.hpp"
#include "lbpnet/packed_model.hpp"
#include "lbpnet/trainer.hpp"

namespace py = pybind11;
using namespace lbpnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

FeatureMap to_map(const Array& a) {
    if (a.ndim() == 2) {
        return {1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                std::vector<double>(a.data(), a.data() + a.size())};
    }
    if (a.ndim() != 3) throw ShapeError("expected a (channels, height, width) or (height, width) array");
    return {static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
            std::vector<double>(a.data(), a.data() + a.size())};
}

template <typename T>
py::array_t<T> to_array(const BasicFeatureMap<T>& m) {
    py::array_t<T> out({m.channels(), m.height(), m.width()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

// (out, n, 2) array of (dx, dy)
std::vector<Pattern> to_patterns(const Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 2) throw ShapeError("patterns must have shape (out, n, 2)");
    std::vector<Pattern> ps(static_cast<std::size_t>(a.shape(0)));
    auto r = a.unchecked<3>();
    for (py::ssize_t o = 0; o < a.shape(0); ++o)
        for (py::ssize_t i = 0; i < a.shape(1); ++i) ps[o].points.push_back({r(o, i, 0), r(o, i, 1)});
    return ps;
}

py::array_t<double> from_patterns(const std::vector<Pattern>& ps) {
    const py::ssize_t n = ps.empty() ? 0 : ps[0].size();
    py::array_t<double> out({static_cast<py::ssize_t>(ps.size()), n, py::ssize_t{2}});
    auto w = out.mutable_unchecked<3>();
    for (std::size_t o = 0; o < ps.size(); ++o)
        for (py::ssize_t i = 0; i < n; ++i) {
            w(o, i, 0) = ps[o].points[i].dx;
            w(o, i, 1) = ps[o].points[i].dy;
        }
    return out;
}

NetworkConfig parse_config(const std::string& json_text) { return network_config_from_json(Json::parse(json_text)); }

Dataset to_dataset(const Array& images, const std::vector<int>& labels, int classes) {
    if (images.ndim() != 4) throw ShapeError("images must have shape (count, channels, height, width)");
    if (static_cast<std::size_t>(images.shape(0)) != labels.size()) throw ShapeError("image and label counts differ");
    Dataset ds;
    ds.classes = classes;
    const auto c = static_cast<int>(images.shape(1)), h = static_cast<int>(images.shape(2)),
               w = static_cast<int>(images.shape(3));
    const std::size_t plane = static_cast<std::size_t>(c) * h * w;
    for (py::ssize_t i = 0; i < images.shape(0); ++i) {
        const double* p = images.data() + i * plane;
        ds.images.emplace_back(c, h, w, std::vector<double>(p, p + plane));
    }
    ds.labels = labels;
    return ds;
}

py::dict layer_ops(const std::vector<LayerOps>& layers) {
    py::dict d;
    for (const auto& l : layers) {
        py::dict o;
        o["comparisons"] = l.ops.comparisons;
        o["bit_ops"] = l.ops.bit_ops;
        o["multiplications"] = l.ops.multiplications;
        o["additions"] = l.ops.additions;
        d[py::str(l.name)] = o;
    }
    return d;
}

}  // namespace

PYBIND11_MODULE(_lbpnet, m) {
    m.doc() = "Comparison-only pattern networks: training, binary inference and cost accounting";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("bilinear_sample", [](const Array& map, int channel, double x, double y) {
        return bilinear_sample(to_map(map), channel, x, y);
    });
    m.def("shifted_relu", [](double x, int n) { return shifted_relu(x, n); });

    m.def("init_patterns", [](std::uint64_t seed, int out, int n, int area, double sigma) {
        return from_patterns(init_patterns(seed, out, n, area, sigma));
    }, py::arg("seed"), py::arg("out_channels"), py::arg("n_points"), py::arg("area") = 5, py::arg("sigma") = 1.0);

    m.def("build_projection",
          [](std::uint64_t seed, int in, int n, int out, std::uint64_t stream) {
              const auto t = build_projection(seed, in, n, out, stream);
              py::array_t<std::uint32_t> a({out, n});
              std::copy(t.entries.begin(), t.entries.end(), a.mutable_data());
              return a;
          },
          py::arg("seed"), py::arg("in_channels"), py::arg("n_bits"), py::arg("out_channels"),
          py::arg("stream") = streams::kProjection);

    auto table = [](const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& t, int in) {
        if (t.ndim() != 2) throw ShapeError("projection must have shape (out, n)");
        ProjectionTable p;
        p.in_channels = in;
        p.out_channels = static_cast<int>(t.shape(0));
        p.n_bits = static_cast<int>(t.shape(1));
        p.entries.assign(t.data(), t.data() + t.size());
        return p;
    };

    m.def("lbp_forward_hard", [table](const Array& input, const Array& patterns,
                                      const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& proj) {
        const auto in = to_map(input);
        return to_array(lbp_forward_hard(in, to_patterns(patterns), table(proj, in.channels())));
    });
    m.def("lbp_forward_surrogate",
          [table](const Array& input, const Array& patterns,
                  const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& proj, double k) {
              const auto in = to_map(input);
              return to_array(lbp_forward_surrogate(in, to_patterns(patterns), table(proj, in.channels()), {k, {}}));
          },
          py::arg("input"), py::arg("patterns"), py::arg("projection"), py::arg("k") = 10.0 / 255.0);

    py::class_<Network>(m, "Network")
        .def_static("create", [](const std::string& cfg) { return Network::create(parse_config(cfg)); },
                    py::arg("config_json"))
        .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p); })
        .def("save", [](const Network& n, const std::filesystem::path& p) { save_checkpoint(n, p); })
        .def("config_json", [](const Network& n) { return to_json(n.config()).dump(); })
        .def("patterns", [](const Network& n, int b) { return from_patterns(n.blocks().at(b).patterns); })
        .def("set_patterns",
             [](Network& n, int b, const Array& a) {
                 auto ps = to_patterns(a);
                 auto& blk = n.blocks().at(b);
                 if (ps.size() != blk.patterns.size() || (!ps.empty() && ps[0].size() != blk.patterns[0].size())) {
                     throw ShapeError("pattern array does not match the block");
                 }
                 blk.patterns = std::move(ps);
             })
        .def_property_readonly("num_blocks", [](const Network& n) { return n.blocks().size(); })
        .def("forward_hard", [](const Network& n, const Array& img) { return to_array(n.forward_hard(to_map(img))); })
        .def("forward_surrogate",
             [](const Network& n, const Array& img) { return to_array(n.forward_surrogate(to_map(img))); })
        .def("predict", [](const Network& n, const Array& img) { return n.predict(to_map(img)); })
        .def("predict_scores", [](const Network& n, const Array& img) { return n.predict_scores(to_map(img)); });

    m.def("train",
          [](Network& net, const Array& images, const std::vector<int>& labels, const std::string& optim_json) {
              const auto ds = to_dataset(images, labels, net.config().classes);
              const auto o = optim_config_from_json(Json::parse(optim_json));
              std::vector<EpochMetrics> metrics;
              {
                  py::gil_scoped_release release;
                  metrics = train(net, ds, o);
              }
              py::list out;
              for (const auto& e : metrics) {
                  py::dict d;
                  d["epoch"] = e.epoch;
                  d["train_loss"] = e.train_loss;
                  d["train_error"] = e.train_error;
                  out.append(d);
              }
              return out;
          },
          py::arg("network"), py::arg("images"), py::arg("labels"), py::arg("optim_json") = "{}");
    m.def("evaluate", [](const Network& net, const Array& images, const std::vector<int>& labels) {
        return evaluate(net, to_dataset(images, labels, net.config().classes));
    });

    py::class_<PackedModel>(m, "PackedModel")
        .def_static("load", [](const std::filesystem::path& p) { return import_packed(p); })
        .def("save", [](const PackedModel& p, const std::filesystem::path& path) { export_packed(p, path); })
        .def("to_bytes", [](const PackedModel& p) {
            const auto b = serialize_packed(p);
            return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
        })
        .def_static("from_bytes",
                    [](const py::bytes& b) {
                        const std::string s = b;
                        return deserialize_packed(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
                    })
        .def_property_readonly("lbp_bits", &PackedModel::lbp_bits)
        .def_property_readonly("lbp_bytes", &PackedModel::lbp_bytes)
        .def_property_readonly("total_bytes", &PackedModel::total_bytes)
        .def("__eq__", [](const PackedModel& a, const PackedModel& b) { return a == b; });

    m.def("binarize", &binarize);
    m.def("rounded_network", &rounded_network);
    m.def("infer", [](const PackedModel& p, const Array& img) {
        const auto r = infer(p, to_map(img));
        return py::make_tuple(r.label, r.scores, layer_ops(r.layers));
    });
    m.def("packed_features", [](const PackedModel& p, const Array& img) {
        return to_array(packed_features(p, to_map(img)));
    });

    m.def("model_size", [](const std::string& cfg) { return model_size(parse_config(cfg)); });
    m.def("format_kilobytes", &format_kilobytes);
    m.def("cost_report",
          [](const std::string& cfg, bool as_executed) {
              const auto conv = as_executed ? CountConvention::as_executed : CountConvention::full_resolution;
              const auto c = parse_config(cfg);
              return to_json(make_report("model", count_ops(c, conv), CostTables{}, model_size(c))).dump();
          },
          py::arg("config_json"), py::arg("as_executed") = false);
    m.def("gate_ratio", [] { return mac_vs_compare_gate_ratio(CostTables{}); });
    m.def("energy_ratio", [] { return mac_vs_compare_energy_ratio(CostTables{}); });

    m.def("load_run_config", [](const std::filesystem::path& p) {
        const auto r = load_run_config(p);
        return py::make_tuple(to_json(r.network).dump(), to_json(r.optim).dump());
    });
}
