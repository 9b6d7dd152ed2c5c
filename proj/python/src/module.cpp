#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "planout/dsl.hpp"
#include "planout/error.hpp"
#include "planout/interpreter.hpp"
#include "planout/ir.hpp"
#include "planout/service_api.hpp"
#include "planout/simulator.hpp"

namespace py = pybind11;
using namespace planout;

namespace {

// Values cross the boundary as JSON so ints, floats and bools keep their kinds.
Value to_value(const py::handle& obj) {
  // Leaked on purpose: destroying it after interpreter shutdown would crash.
  static auto* dumps = new py::object(py::module_::import("json").attr("dumps"));
  return from_json(nlohmann::json::parse((*dumps)(obj).cast<std::string>()));
}

py::object to_python(const nlohmann::json& j) {
  static auto* loads = new py::object(py::module_::import("json").attr("loads"));
  return (*loads)(j.dump());
}

Value::Map to_map(const py::object& obj) {
  if (obj.is_none()) return {};
  Value v = to_value(obj);
  if (!v.is_map()) throw Error(ErrorCode::InvalidArgument, "expected a dict");
  return v.as_map();
}

py::dict diagnostic_dict(const Diagnostic& d) {
  py::dict out;
  out["severity"] = d.is_error() ? "error" : "warning";
  out["message"] = d.message;
  out["offset"] = d.offset ? py::cast(*d.offset) : py::none();
  return out;
}

class Script {
 public:
  explicit Script(ScriptIR ir) : ir_(std::move(ir)) {}

  static Script from_source(const std::string& source) { return Script(parse_or_throw(source)); }
  static Script from_ir(const std::string& text) { return Script(deserialize(text)); }

  std::string ir() const { return serialize(ir_); }
  std::string source() const { return decompile(ir_); }
  std::vector<std::string> parameters() const { return list_parameters(ir_); }
  std::string digest() const { return script_digest(ir_); }

  py::list diagnostics() const {
    py::list out;
    for (const auto& d : validate(ir_)) out.append(diagnostic_dict(d));
    return out;
  }

  py::dict evaluate(const py::object& inputs, const py::object& overrides, const std::string& ns,
                    const std::string& exp) const {
    Inputs in = to_map(inputs);
    Overrides ov = to_map(overrides);
    Assignment a = [&] {
      py::gil_scoped_release release;
      return planout::evaluate(ir_, in, ov, SaltContext(ns, exp));
    }();
    py::dict params;  // keeps assignment order
    for (const auto& [k, v] : a.params()) params[py::str(k)] = to_python(to_json(v));
    py::dict out;
    out["in_experiment"] = a.in_experiment();
    out["params"] = params;
    return out;
  }

  py::object simulate(const std::vector<std::pair<std::string, std::int64_t>>& axes, const py::object& fixed_inputs,
                      const py::object& overrides, const std::vector<std::pair<std::string, std::string>>& pairs,
                      const std::string& ns, const std::string& exp, bool hashed_ids, int jobs) const {
    SimulationOptions opts;
    for (const auto& [name, count] : axes) opts.axes.push_back({name, count});
    opts.fixed_inputs = to_map(fixed_inputs);
    opts.overrides = to_map(overrides);
    opts.pairs = pairs;
    opts.context = SaltContext(ns, exp);
    opts.hashed_ids = hashed_ids;
    opts.jobs = jobs;
    std::string report;
    {
      py::gil_scoped_release release;
      report = report_json(planout::simulate(ir_, opts));
    }
    return to_python(nlohmann::json::parse(report));
  }

  bool operator==(const Script& other) const { return ir_ == other.ir_; }

 private:
  ScriptIR ir_;
};

}  // namespace

PYBIND11_MODULE(_planout, m) {
  m.doc() = "PlanOut scripts: compile, evaluate and simulate";

  static py::exception<Error> planout_error(m, "PlanoutError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::reinterpret_borrow<py::object>(planout_error)(py::str(e.what()));
      err.attr("code") = std::string(error_code_name(e.code()));
      err.attr("offset") = e.offset() ? py::cast(*e.offset()) : py::none();
      PyErr_SetObject(planout_error.ptr(), err.ptr());
    }
  });

  py::class_<Script>(m, "Script")
      .def_static("from_source", &Script::from_source, py::arg("source"))
      .def_static("from_ir", &Script::from_ir, py::arg("ir"))
      .def_property_readonly("ir", &Script::ir)
      .def_property_readonly("source", &Script::source)
      .def_property_readonly("parameters", &Script::parameters)
      .def_property_readonly("digest", &Script::digest)
      .def("diagnostics", &Script::diagnostics)
      .def("evaluate", &Script::evaluate, py::arg("inputs"), py::arg("overrides") = py::none(),
           py::arg("namespace") = "default", py::arg("experiment") = "default")
      .def("simulate", &Script::simulate, py::arg("axes"), py::arg("fixed_inputs") = py::none(),
           py::arg("overrides") = py::none(),
           py::arg("pairs") = std::vector<std::pair<std::string, std::string>>{}, py::arg("namespace") = "default",
           py::arg("experiment") = "default", py::arg("hashed_ids") = false, py::arg("jobs") = 1)
      .def("__eq__", &Script::operator==)
      .def("__repr__", [](const Script& s) { return "<planout.Script " + s.digest().substr(0, 12) + ">"; });

  m.def("check", [](const std::string& source) {
    py::list out;
    auto parsed = parse(source);
    if (auto* diags = std::get_if<std::vector<Diagnostic>>(&parsed)) {
      for (const auto& d : *diags) out.append(diagnostic_dict(d));
    } else {
      for (const auto& d : validate(std::get<ScriptIR>(parsed))) out.append(diagnostic_dict(d));
    }
    return out;
  }, py::arg("source"), "Syntax and validation diagnostics for DSL source.");

  m.def("parse_overrides", [](const std::string& raw) { return to_python(to_json(Value(parse_override_string(raw)))); },
        py::arg("raw"));
  m.def("format_overrides", [](const py::object& overrides) { return format_override_string(to_map(overrides)); },
        py::arg("overrides"));
}
