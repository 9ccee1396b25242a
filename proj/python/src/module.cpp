/* Copyright 2026 The blendnet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "blendnet/builders.hpp"
#include "blendnet/costmodel.hpp"
#include "blendnet/kernels.hpp"
#include "blendnet/model_io.hpp"
#include "blendnet/runtime.hpp"
#include "blendnet/verify.hpp"

namespace py = pybind11;
using namespace blend;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

RealTensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return RealTensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_array(const RealTensor& t) {
  py::array_t<double> out(std::vector<py::ssize_t>(t.shape.begin(), t.shape.end()));
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

CompileOptions options(std::optional<std::vector<std::string>> passes, int word_size, int frac_bits) {
  return {passes ? *passes : default_pass_list(), word_size, frac_bits};
}

}  // namespace

PYBIND11_MODULE(_blendnet, m) {
  m.doc() = "Graph compiler and fixed-point runtime for binary/fixed-point blended networks";

  static py::exception<Error> error(m, "BlendError", PyExc_ValueError);
  static py::exception<ModelIoError> io_error(m, "ModelIoError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ModelIoError& e) {
      PyErr_SetString(io_error.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  py::class_<Graph>(m, "Model")
      .def_readonly("arch", &Graph::arch)
      .def_readonly("compiled", &Graph::compiled)
      .def_readonly("word_size", &Graph::word_size)
      .def_readonly("frac_bits", &Graph::frac_bits)
      .def_property_readonly("num_nodes", [](const Graph& g) { return g.nodes.size(); })
      .def_property_readonly("node_names",
                             [](const Graph& g) {
                               std::vector<std::string> names;
                               for (const auto& n : g.nodes) names.push_back(n.name);
                               return names;
                             })
      .def_property_readonly("input_shape",
                             [](const Graph& g) { return g.node(g.input_ids().at(0)).attrs.shape; })
      .def("census", &Graph::census)
      .def("validate",
           [](const Graph& g) {
             std::vector<std::string> out;
             for (const auto& v : validate(g)) out.push_back(v.to_string());
             return out;
           })
      .def("to_bytes",
           [](const Graph& g) {
             const auto b = serialize_model(g);
             return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
           })
      .def_static("from_bytes",
                  [](const py::bytes& data) {
                    const std::string s = data;
                    return deserialize_model(
                        std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
                  })
      .def("save", [](const Graph& g, const std::filesystem::path& p) { save_model(g, p); })
      .def("__eq__", [](const Graph& a, const Graph& b) { return a == b; })
      .def("__copy__", [](const Graph& g) { return g; })
      .def("__repr__", [](const Graph& g) {
        return "<Model " + g.arch + ", " + std::to_string(g.nodes.size()) + " nodes" +
               (g.compiled ? ", compiled>" : ">");
      });

  m.def("known_archs", &known_archs);
  m.def("default_passes", &default_pass_list);
  m.def(
      "build",
      [](const std::string& arch, uint64_t seed, int classes) {
        Graph g = build_arch(arch, classes);
        random_init(g, seed);
        return g;
      },
      py::arg("arch"), py::arg("seed") = 0, py::arg("classes") = 10);
  m.def("load", [](const std::filesystem::path& p) { return load_model(p); }, py::arg("path"));

  m.def(
      "run_passes",
      [](const Graph& g, std::optional<std::vector<std::string>> passes) {
        Graph out = g;
        const PassReport r = passes ? run_pipeline(out, *passes) : run_pipeline(out);
        return py::make_tuple(out, to_python(r.to_json()));
      },
      py::arg("model"), py::arg("passes") = py::none(),
      "Returns (rewritten model, pass report). The input model is not modified.");

  m.def(
      "compile",
      [](const Graph& g, std::optional<std::vector<std::string>> passes, int word_size, int frac_bits) {
        CompileResult r = compile(g, options(std::move(passes), word_size, frac_bits));
        return py::make_tuple(std::move(r.graph), to_python(r.report.to_json()));
      },
      py::arg("model"), py::arg("passes") = py::none(), py::arg("word_size") = kDefaultWordSize,
      py::arg("frac_bits") = 8);

  m.def(
      "reference",
      [](const Graph& g, const Array& x) {
        const RealTensor in = to_tensor(x);
        py::gil_scoped_release nogil;
        const RealTensor y = reference_forward(g, in);
        py::gil_scoped_acquire gil;
        return to_array(y);
      },
      py::arg("model"), py::arg("x"), "Float64 oracle on an uncompiled model, input [C, H, W].");

  m.def(
      "execute",
      [](const Graph& g, const Array& x, int workers) {
        const RealTensor in = to_tensor(x);
        QuantStats stats;
        RealTensor y;
        {
          py::gil_scoped_release nogil;
          y = execute(topo_schedule(g), in, {workers, &stats, nullptr});
        }
        py::dict s;
        s["saturated"] = stats.saturated;
        s["accumulator_overflows"] = stats.accumulator_overflows;
        return py::make_tuple(to_array(y), s);
      },
      py::arg("model"), py::arg("x"), py::arg("workers") = 0,
      "Runs a compiled model on [C, H, W] or [N, C, H, W]; returns (output, quantization stats).");

  m.def(
      "count_ops", [](const Graph& g) { return to_python(count_ops(g).to_json()); }, py::arg("model"));
  m.def(
      "estimate_latency",
      [](const Graph& g, int lanes, int rows, int cols) {
        const HardwareProfile hw{lanes, rows, cols};
        return to_python(estimate_latency(g, hw).to_json(hw));
      },
      py::arg("model"), py::arg("bnn_lanes") = 48, py::arg("fp_rows") = 32, py::arg("fp_cols") = 32);

  m.def(
      "verify",
      [](const Graph& g, const std::string& mode, int seeds, double tol, int word_size, int frac_bits) {
        VerifySummary s;
        {
          py::gil_scoped_release nogil;
          s = verify_model(g, mode, seeds, tol, options(std::nullopt, word_size, frac_bits));
        }
        return to_python(s.to_json());
      },
      py::arg("model"), py::arg("mode") = "fusion", py::arg("seeds") = 100, py::arg("tol") = 1e-5,
      py::arg("word_size") = kDefaultWordSize, py::arg("frac_bits") = 8);

  m.def(
      "random_input", [](const Shape& shape, uint64_t seed, int frac) { return to_array(random_input(shape, seed, frac)); },
      py::arg("shape"), py::arg("seed"), py::arg("grid_frac") = 8);

  m.def(
      "threshold_from_bn",
      [](std::vector<double> gamma, std::vector<double> beta, std::vector<double> mu, std::vector<double> sigma2,
         double eps) {
        BNParams bn;
        bn.gamma = std::move(gamma);
        bn.beta = std::move(beta);
        bn.mu = std::move(mu);
        bn.sigma2 = std::move(sigma2);
        bn.eps = eps;
        const size_t c = bn.gamma.size();
        if (bn.beta.size() != c || bn.mu.size() != c || bn.sigma2.size() != c)
          throw Error("threshold_from_bn: parameter lengths differ");
        const ThresholdParams t = threshold_from_bn(bn);
        std::vector<std::string> dirs;
        for (auto d : t.direction) dirs.emplace_back(to_string(d));
        return py::make_tuple(t.tau, dirs);
      },
      py::arg("gamma"), py::arg("beta"), py::arg("mu"), py::arg("sigma2"), py::arg("eps") = kBnEps,
      "Per-channel (tau, direction) with sign(BN(y)) == +1 exactly when the threshold fires.");

  m.def(
      "binary_conv2d",
      [](py::array_t<int8_t, py::array::c_style | py::array::forcecast> x,
         py::array_t<int8_t, py::array::c_style | py::array::forcecast> w, int stride, int padding, int pad_bit,
         int word_size) {
        if (x.ndim() != 3 || w.ndim() != 4) throw Error("binary_conv2d: expected x [C,H,W] and w [Co,C,k,k]");
        const Shape xs{1, x.shape(0), x.shape(1), x.shape(2)};
        const Shape ws(w.shape(), w.shape() + 4);
        const auto px = pack_bits(std::span<const int8_t>(x.data(), static_cast<size_t>(x.size())), xs, word_size);
        const auto pw = pack_bits(std::span<const int8_t>(w.data(), static_cast<size_t>(w.size())), ws, word_size);
        const auto out = binary_conv2d(px, pw, stride, padding, pad_bit);
        const ConvGeometry g{xs[1], xs[2], xs[3], ws[0], static_cast<int>(ws[2]), stride, padding};
        py::array_t<int32_t> r({static_cast<py::ssize_t>(ws[0]), static_cast<py::ssize_t>(g.out_height()),
                                static_cast<py::ssize_t>(g.out_width())});
        std::copy(out.begin(), out.end(), r.mutable_data());
        return r;
      },
      py::arg("x"), py::arg("w"), py::arg("stride") = 1, py::arg("padding") = 0, py::arg("pad_bit") = 0,
      py::arg("word_size") = kDefaultWordSize, "Packed convolution of +-1 arrays.");
}
