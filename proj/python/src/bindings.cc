#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lt/error.h"
#include "lt/runtime.h"
#include "lt/tensor.h"

namespace py = pybind11;
using lt::LazyTensor;

namespace {

lt::Device Dev(int ordinal) { return lt::Device{ordinal}; }

lt::DType ParseDType(const std::string& name) {
  if (name == "f32") return lt::DType::kF32;
  if (name == "i64") return lt::DType::kI64;
  if (name == "pred") return lt::DType::kPred;
  throw lt::Error(lt::ErrorCode::kInvalidAttrs, "unknown dtype " + name);
}

lt::ExecutionMode ParseMode(const std::string& name) {
  if (name == "lazy") return lt::ExecutionMode::kLazy;
  if (name == "eager") return lt::ExecutionMode::kEager;
  throw lt::Error(lt::ErrorCode::kInvalidAttrs, "unknown mode " + name);
}

py::dict MetricsDict(const lt::MetricsSnapshot& m) {
  py::dict d;
  d["compile_count"] = m.compile_count;
  d["cache_hit_count"] = m.cache_hit_count;
  d["graphs_executed"] = m.graphs_executed;
  d["kernel_dispatches"] = m.kernel_dispatches;
  d["eager_fallback_dispatches"] = m.eager_fallback_dispatches;
  d["eager_dispatches"] = m.eager_dispatches;
  d["peak_buffer_slots"] = m.peak_buffer_slots;
  d["aliased_outputs"] = m.aliased_outputs;
  return d;
}

LazyTensor FromList(const py::sequence& values, const lt::Dims& dims, int device,
                    const std::string& dtype) {
  lt::Storage storage;
  switch (ParseDType(dtype)) {
    case lt::DType::kF32:
      storage = values.cast<std::vector<float>>();
      break;
    case lt::DType::kI64:
      storage = values.cast<std::vector<int64_t>>();
      break;
    case lt::DType::kPred:
      storage = values.cast<std::vector<uint8_t>>();
      break;
  }
  return lt::FromHost(std::move(storage), dims, Dev(device));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Lazy tensor runtime bindings";

  auto error = py::register_exception<lt::Error>(m, "Error", PyExc_RuntimeError);
  (void)error;

  py::class_<LazyTensor>(m, "Tensor")
      .def_property_readonly("uid", &LazyTensor::uid)
      .def_property_readonly("shape", [](const LazyTensor& t) { return t.dims(); })
      .def_property_readonly("dtype",
                             [](const LazyTensor& t) { return lt::DTypeName(t.dtype()); })
      .def_property_readonly("device",
                             [](const LazyTensor& t) { return t.device().ordinal; })
      .def_property_readonly("is_view", &LazyTensor::is_view)
      .def_property_readonly("is_pending", &LazyTensor::is_pending)
      .def("tolist", [](const LazyTensor& t) { return lt::ToHost(t); })
      .def("item", [](const LazyTensor& t) { return lt::Item(t); })
      .def("add_",
           [](LazyTensor& t, const LazyTensor& r, std::optional<double> alpha) -> LazyTensor& {
             return t.add_(r, alpha);
           },
           py::arg("other"), py::arg("alpha") = py::none(), py::return_value_policy::reference)
      .def("add_", py::overload_cast<double>(&LazyTensor::add_),
           py::return_value_policy::reference)
      .def("sub_", py::overload_cast<const LazyTensor&>(&LazyTensor::sub_),
           py::return_value_policy::reference)
      .def("sub_", py::overload_cast<double>(&LazyTensor::sub_),
           py::return_value_policy::reference)
      .def("mul_", py::overload_cast<const LazyTensor&>(&LazyTensor::mul_),
           py::return_value_policy::reference)
      .def("mul_", py::overload_cast<double>(&LazyTensor::mul_),
           py::return_value_policy::reference)
      .def("assign_", py::overload_cast<const LazyTensor&>(&LazyTensor::assign_),
           py::return_value_policy::reference)
      .def("assign_", py::overload_cast<double>(&LazyTensor::assign_),
           py::return_value_policy::reference)
      // t += x updates t in place, exactly like add_.
      .def("__iadd__", [](LazyTensor& t, const LazyTensor& r) { return t.add_(r); })
      .def("__iadd__", [](LazyTensor& t, double r) { return t.add_(r); })
      .def("__add__", [](const LazyTensor& a, const LazyTensor& b) { return lt::Add(a, b); })
      .def("__add__", [](const LazyTensor& a, double b) { return lt::Add(a, b); })
      .def("__sub__", [](const LazyTensor& a, const LazyTensor& b) { return lt::Sub(a, b); })
      .def("__sub__", [](const LazyTensor& a, double b) { return lt::Sub(a, b); })
      .def("__mul__", [](const LazyTensor& a, const LazyTensor& b) { return lt::Mul(a, b); })
      .def("__mul__", [](const LazyTensor& a, double b) { return lt::Mul(a, b); })
      .def("__truediv__", [](const LazyTensor& a, const LazyTensor& b) { return lt::Div(a, b); })
      .def("__truediv__", [](const LazyTensor& a, double b) { return lt::Div(a, b); })
      .def("__neg__", [](const LazyTensor& a) { return lt::Neg(a); })
      .def("__matmul__", [](const LazyTensor& a, const LazyTensor& b) { return lt::MatMul(a, b); })
      .def("__repr__", [](const LazyTensor& t) { return lt::ToString(t); });

  m.def("from_list", &FromList, py::arg("values"), py::arg("shape"), py::arg("device") = 0,
        py::arg("dtype") = "f32");
  m.def("full",
        [](const lt::Dims& dims, double value, int device, const std::string& dtype) {
          return lt::Full(dims, value, Dev(device), ParseDType(dtype));
        },
        py::arg("shape"), py::arg("value"), py::arg("device") = 0, py::arg("dtype") = "f32");
  m.def("randn",
        [](const lt::Dims& dims, uint64_t seed, int device) {
          return lt::Randn(dims, seed, Dev(device));
        },
        py::arg("shape"), py::arg("seed"), py::arg("device") = 0);

  m.def("add",
        [](const LazyTensor& a, const LazyTensor& b, std::optional<double> alpha) {
          return lt::Add(a, b, alpha);
        },
        py::arg("a"), py::arg("b"), py::arg("alpha") = py::none());
  m.def("maximum", py::overload_cast<const LazyTensor&, const LazyTensor&>(&lt::Maximum));
  m.def("maximum", py::overload_cast<const LazyTensor&, double>(&lt::Maximum));
  m.def("relu", &lt::Relu);
  m.def("matmul", &lt::MatMul);
  m.def("sum", &lt::Sum, py::arg("t"), py::arg("dims"));
  m.def("sum_all", &lt::SumAll);
  m.def("view", &lt::View, py::arg("t"), py::arg("shape"));
  m.def("permute", &lt::Permute, py::arg("t"), py::arg("perm"));
  m.def("narrow", &lt::Narrow, py::arg("t"), py::arg("dim"), py::arg("start"),
        py::arg("length"));
  m.def("argsort", &lt::Argsort, py::arg("t"), py::arg("dim") = -1);
  m.def("nonzero_count", &lt::NonzeroCount);

  m.def("sync", &lt::SyncTensor);
  m.def("mark_step", [](int device, bool wait) { lt::MarkStep(Dev(device), wait); },
        py::arg("device") = 0, py::arg("wait") = true);
  m.def("metrics", [](int device) { return MetricsDict(lt::Metrics(Dev(device))); },
        py::arg("device") = 0);
  m.def("pending_ir", [](int device) { return lt::Context(Dev(device)).PendingIrText(); },
        py::arg("device") = 0);
  m.def("set_mode",
        [](int device, const std::string& mode) { lt::SetExecutionMode(Dev(device), ParseMode(mode)); },
        py::arg("device"), py::arg("mode"));
  m.def("get_mode",
        [](int device) { return std::string(lt::ModeName(lt::GetExecutionMode(Dev(device)))); },
        py::arg("device") = 0);
  m.def("set_donation", &lt::SetDonationEnabled);
  m.def("donation_enabled", &lt::DonationEnabled);
}
