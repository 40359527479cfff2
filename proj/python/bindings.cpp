#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dough/cli.hpp"

namespace py = pybind11;
using namespace dough;

namespace {

// Results cross the boundary as JSON text and come out as Python objects.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
  const std::string text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return json::parse(text);
}

PlatformModel platform_arg(const py::object& obj) {
  if (obj.is_none()) return zedboard_platform();
  if (py::isinstance<py::str>(obj)) return load_platform(obj.cast<std::string>());
  return parse_as<PlatformModel>(from_py(obj), "platform");
}

SearchBounds bounds_arg(const py::object& obj) {
  if (obj.is_none()) return {};
  return parse_as<SearchBounds>(from_py(obj), "bounds");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Overlay customization, scheduling and simulation for loop kernels on a CGRA";

  auto base = py::register_exception<Error>(m, "DoughError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<SemanticError>(m, "SemanticError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
  py::register_exception<UnschedulableError>(m, "UnschedulableError", base.ptr());
  py::register_exception<CapExceededError>(m, "CapExceededError", base.ptr());
  py::register_exception<SimulationError>(m, "SimulationError", base.ptr());

  py::class_<LoopKernel>(m, "Kernel")
      .def_readonly("name", &LoopKernel::name)
      .def_readonly("vars", &LoopKernel::vars)
      .def_readonly("bounds", &LoopKernel::bounds)
      .def_readonly("source", &LoopKernel::source)
      .def_property_readonly("depth", &LoopKernel::depth)
      .def("to_kdl", [](const LoopKernel& k) { return to_kdl(k); })
      .def("io_counts",
           [](const LoopKernel& k, const Factor& f) {
             const auto io = io_counts(k, f);
             return py::make_tuple(io.in, io.out);
           })
      .def("minimal_unroll", [](const LoopKernel& k) { return minimal_unroll(k); })
      .def("__repr__", [](const LoopKernel& k) { return "<Kernel " + k.name + ">"; });

  m.def("parse_kernel", [](const std::string& text, const std::string& name) { return parse_kernel(text, name); },
        py::arg("text"), py::arg("name") = "kernel");
  m.def("builtin_kernel", [](const std::string& spec) { return builtin_kernel_from_spec(spec); },
        py::arg("spec"), "Built-in benchmark, e.g. 'MM?size=8'.");
  m.def("load_kernel", &load_kernel, py::arg("arg"), "'builtin:SPEC' or a path to a .kdl file.");

  m.def("zedboard_platform", [] { return to_py(json(zedboard_platform())); });
  m.def("bram_blocks", [](Words depth, int width) { return bram_blocks(depth, width); });

  m.def(
      "customize",
      [](const LoopKernel& k, const py::object& platform, const std::string& method, const py::object& bounds) {
        const auto p = platform_arg(platform);
        const auto b = bounds_arg(bounds);
        CustomizationResult r;
        {
          py::gil_scoped_release release;
          if (method == "ts")
            r = customize_ts(k, p, b);
          else if (method == "es")
            r = customize_es(k, p, b);
          else
            throw InvalidArgument("method must be 'ts' or 'es'");
        }
        return to_py(json(r));
      },
      py::arg("kernel"), py::arg("platform") = py::none(), py::arg("method") = "ts", py::arg("bounds") = py::none());

  m.def("es_space_size", [](const LoopKernel& k, const py::object& bounds) { return es_space_size(k, bounds_arg(bounds)); },
        py::arg("kernel"), py::arg("bounds") = py::none());

  m.def(
      "schedule",
      [](const LoopKernel& k, const Factor& u, int rows, int cols) {
        if (!is_valid_unroll(k, u)) throw InvalidArgument("invalid unroll factor");
        const Dfg dfg = unroll(k, u);
        const Schedule s = ArraySweep(dfg).at(rows, cols);
        OverlayConfig probe;
        probe.rows = rows;
        probe.cols = cols;
        probe.imem_depth = std::max<Cycles>(s.length, 1);
        json dump = schedule_dump(s, emit_control_words(s, probe));
        dump["u"] = u;
        dump["kernel_name"] = k.name;
        dump["kernel_source"] = k.source;
        return to_py(dump);
      },
      py::arg("kernel"), py::arg("u"), py::arg("rows"), py::arg("cols"),
      "Schedule dump of one unrolled tile on a rows x cols array.");

  m.def(
      "verify",
      [](const LoopKernel& k, const py::object& design, const std::vector<std::uint64_t>& seeds,
         const py::object& platform) {
        const auto d = parse_as<EvaluatedDesign>(from_py(design), "design");
        if (!d.schedule) throw InvalidArgument("design has no schedule");
        const Dfg dfg = unroll(k, d.config.u, {std::size_t{1} << 22, d.config.overlay.data_width});
        const auto image = build_image(k, d.config, dfg, *d.schedule, platform_arg(platform).dma);
        return to_py(json(verify(k, image, seeds)));
      },
      py::arg("kernel"), py::arg("design"), py::arg("seeds") = std::vector<std::uint64_t>{0, 1, 2},
      py::arg("platform") = py::none(), "Simulates a design against the reference for each seed.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one command line in-process; returns (exit code, stdout, stderr).");
}
