#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>

#include "kadmm/dataset.hpp"
#include "kadmm/errors.hpp"
#include "kadmm/features.hpp"
#include "kadmm/graph_projection.hpp"
#include "kadmm/model.hpp"
#include "kadmm/prox.hpp"
#include "kadmm/solver.hpp"

namespace py = pybind11;
using namespace kadmm;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Views a 1-D or 2-D float64 array; 1-D arrays become a single column.
ConstMatrixView view(const Array& a) {
  if (a.ndim() == 1)
    return {std::span<const double>(a.data(), static_cast<std::size_t>(a.shape(0))),
            static_cast<std::size_t>(a.shape(0)), 1};
  if (a.ndim() != 2) throw DimensionError("expected a 1-D or 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
  return {std::span<const double>(a.data(), rows * cols), rows, cols};
}

Array toNumpy(const DenseMatrix& m) {
  Array out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

py::dict reportDict(const IterationReport& r) {
  py::dict d;
  d["iteration"] = r.iteration;
  d["objective"] = r.objective;
  d["primal_residual_o"] = r.primalResidualO;
  d["primal_residual_w"] = r.primalResidualW;
  d["converged"] = r.converged;
  py::dict phases;
  phases["transform"] = r.phases.transform;
  phases["graph_projection_loop"] = r.phases.graphProjectionLoop;
  phases["prox"] = r.phases.prox;
  phases["communication"] = r.phases.communication;
  phases["barrier"] = r.phases.barrier;
  phases["prediction"] = r.phases.prediction;
  d["phases"] = phases;
  return d;
}

}  // namespace

PYBIND11_MODULE(_kadmm, m) {
  m.doc() = "Block-splitting ADMM for random-feature kernel machines";

  static py::exception<Error> error(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", error.ptr());
  py::register_exception<LabelError>(m, "LabelError", error.ptr());
  py::register_exception<ModelFormatError>(m, "ModelFormatError", error.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", error.ptr());
  py::register_exception<IoError>(m, "IoError", error.ptr());

  py::enum_<LossKind>(m, "Loss")
      .value("squared", LossKind::squared)
      .value("hinge", LossKind::hinge)
      .value("absolute", LossKind::absolute);

  m.def("prox_hinge", &proxHinge, py::arg("v"), py::arg("y"), py::arg("lam"));
  m.def("prox_squared", &proxSquared, py::arg("v"), py::arg("y"), py::arg("lam"));
  m.def("prox_absolute", &proxAbsolute, py::arg("v"), py::arg("y"), py::arg("lam"));
  m.def(
      "prox_loss",
      [](const Array& a, const Array& y, LossKind loss, double scale) {
        return toNumpy(proxLossMatrix(view(a), view(y), LossSpec{loss}, scale));
      },
      py::arg("a"), py::arg("y"), py::arg("loss"), py::arg("scale"));

  py::class_<TransformDescriptor>(m, "Transform")
      .def(py::init(&TransformDescriptor::gaussian), py::arg("features"), py::arg("blocks") = 1,
           py::arg("sigma") = 1.0, py::arg("seed") = 0)
      .def_property_readonly("features", &TransformDescriptor::features)
      .def_property_readonly("blocks", &TransformDescriptor::blocks)
      .def_readonly("sigma", &TransformDescriptor::sigma)
      .def_readonly("seed", &TransformDescriptor::seed)
      .def_readonly("col_offsets", &TransformDescriptor::colOffsets)
      .def(
          "block", [](const TransformDescriptor& d, const Array& x, std::size_t j) {
            return toNumpy(transform(d, view(x), j));
          },
          py::arg("x"), py::arg("j"))
      .def(
          "all", [](const TransformDescriptor& d, const Array& x) { return toNumpy(transformAll(d, view(x))); },
          py::arg("x"))
      .def(
          "approximation",
          [](const TransformDescriptor& d, const Array& x, std::size_t pairs, std::uint64_t seed) {
            const auto s = approximationReport(d, view(x), pairs, seed);
            return py::dict(py::arg("max_abs_err") = s.maxAbsErr, py::arg("rms_err") = s.rmsErr,
                            py::arg("pairs") = s.pairs);
          },
          py::arg("x"), py::arg("pairs") = 1000, py::arg("seed") = 0);

  m.def(
      "graph_project",
      [](const Array& z, const Array& rhsW, const Array& rhsO) {
        const auto cache = buildCache(view(z));
        auto p = graphProject(cache, view(z), view(rhsW), view(rhsO));
        return py::make_tuple(toNumpy(p.weights), toNumpy(p.outputs));
      },
      py::arg("z"), py::arg("rhs_w"), py::arg("rhs_o"));

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init([](const TransformDescriptor& transform, LossKind loss, double rho, double lambda,
                       std::size_t maxIter, std::size_t rows, std::size_t threads, double tol) {
             SolverConfig c;
             c.transform = transform;
             c.loss.kind = loss;
             c.rho = rho;
             c.lambda = lambda;
             c.maxIter = maxIter;
             c.rowSplits = rows;
             c.threads = threads;
             c.tol = tol;
             c.validate();
             return c;
           }),
           py::arg("transform"), py::arg("loss") = LossKind::squared, py::arg("rho") = 1.0,
           py::arg("lam") = 1e-3, py::arg("max_iter") = 100, py::arg("rows") = 1, py::arg("threads") = 1,
           py::arg("tol") = 0.0)
      .def_readwrite("rho", &SolverConfig::rho)
      .def_readwrite("lam", &SolverConfig::lambda)
      .def_readwrite("max_iter", &SolverConfig::maxIter)
      .def_readwrite("rows", &SolverConfig::rowSplits)
      .def_readwrite("threads", &SolverConfig::threads)
      .def_readwrite("tol", &SolverConfig::tol)
      .def_readwrite("transform", &SolverConfig::transform);

  py::class_<Model>(m, "Model")
      .def_property_readonly("weights", [](const Model& model) { return toNumpy(model.weights); })
      .def_readonly("input_dim", &Model::inputDim)
      .def_readonly("transform", &Model::transform)
      .def_property_readonly("classes", [](const Model& model) { return model.labels.classLabels; })
      .def("scores", [](const Model& model, const Array& x) { return toNumpy(predict(model, view(x))); },
           py::arg("x"))
      .def("predict", [](const Model& model, const Array& x) { return predictLabels(model, view(x)); }, py::arg("x"))
      .def("save", [](const Model& model, const std::string& path) { saveModel(path, model); }, py::arg("path"))
      .def_static("load", &loadModel, py::arg("path"));

  m.def(
      "solve",
      [](const SolverConfig& config, const Array& x, const py::object& y, const py::object& classes) {
        LabelEncoding encoding = LabelEncoding::regression();
        DenseMatrix targets;
        if (!classes.is_none() || config.loss.kind == LossKind::hinge) {
          const Array labels = y.cast<Array>();
          const auto flat = view(labels).data;
          encoding = classes.is_none() ? LabelEncoding::oneVsAll(flat)
                                       : LabelEncoding{LabelMode::oneVsAll, classes.cast<std::vector<double>>(), 1};
          std::sort(encoding.classLabels.begin(), encoding.classLabels.end());
          targets = encodeLabels(flat, encoding);
        } else {
          targets = DenseMatrix(view(y.cast<Array>()));
          encoding = LabelEncoding::regression(targets.cols());
        }
        SolveResult result;
        {
          py::gil_scoped_release release;
          result = solve(config, view(x), targets, encoding);
        }
        py::list reports;
        for (const auto& r : result.reports) reports.append(reportDict(r));
        return py::make_tuple(std::move(result.model), reports);
      },
      py::arg("config"), py::arg("x"), py::arg("y"), py::arg("classes") = py::none(),
      "Train on (x, y). Hinge loss or an explicit class list encodes y one-vs-all; otherwise y holds "
      "regression targets. Returns (model, reports).");

  m.def(
      "objective",
      [](const Model& model, const Array& x, const Array& y, double lambda) {
        return objective(model, view(x), view(y), lambda);
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("lam"));

  m.def(
      "memory_estimate",
      [](double n, double d, double mOut, double s, double rows, double cols, double threads, double nodes) {
        const auto e = memoryEstimate(MemoryShape{n, d, mOut, s, rows, cols, threads, nodes});
        return py::dict(py::arg("floats_per_process") = e.floatsPerProcess,
                        py::arg("floats_per_node") = e.floatsPerNode,
                        py::arg("bytes_per_process") = e.bytesPerProcess(),
                        py::arg("bytes_per_node") = e.bytesPerNode());
      },
      py::arg("n"), py::arg("d"), py::arg("m"), py::arg("s"), py::arg("rows") = 1, py::arg("cols") = 1,
      py::arg("threads") = 1, py::arg("nodes") = 1);
}
