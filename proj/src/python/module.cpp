#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "faclearn/bench.hpp"
#include "faclearn/cost_model.hpp"
#include "faclearn/datagen.hpp"
#include "faclearn/di_metadata.hpp"
#include "faclearn/errors.hpp"
#include "faclearn/estimator.hpp"
#include "faclearn/factorized_ops.hpp"
#include "faclearn/matrix_io.hpp"
#include "faclearn/trainers.hpp"

namespace py = pybind11;
using namespace faclearn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

SparseMatrix from_numpy(const Array& a) {
  if (a.ndim() == 1) {
    return SparseMatrix::from_dense(static_cast<std::size_t>(a.shape(0)), 1, {a.data(), static_cast<std::size_t>(a.size())});
  }
  if (a.ndim() != 2) throw std::invalid_argument("expected a 1-D or 2-D array");
  return SparseMatrix::from_dense(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                                  {a.data(), static_cast<std::size_t>(a.size())});
}

Array to_numpy(const SparseMatrix& m) {
  Array out({m.rows(), m.cols()});
  const auto dense = m.to_dense();
  std::copy(dense.begin(), dense.end(), out.mutable_data());
  return out;
}

ExecContext context(unsigned threads) {
  ExecContext ctx;
  ctx.threads = threads;
  return ctx;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Factorized linear algebra and learning over data-integration metadata";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  py::class_<OpTrace>(m, "OpTrace")
      .def_readonly("multiply_adds", &OpTrace::multiply_adds)
      .def_readonly("bytes_read", &OpTrace::bytes_read)
      .def_readonly("bytes_written", &OpTrace::bytes_written)
      .def_readonly("wall_time", &OpTrace::wall_time);

  py::class_<SparseMatrix>(m, "SparseMatrix")
      .def(py::init([](const Array& a) { return from_numpy(a); }), py::arg("dense"))
      .def_static(
          "from_csr",
          [](std::size_t rows, std::size_t cols, std::vector<std::size_t> indptr, std::vector<std::size_t> indices,
             std::vector<double> data) {
            return SparseMatrix::from_csr(rows, cols, std::move(indptr), std::move(indices), std::move(data));
          },
          py::arg("rows"), py::arg("cols"), py::arg("indptr"), py::arg("indices"), py::arg("data"))
      .def_static("identity", &SparseMatrix::identity)
      .def_property_readonly("shape", [](const SparseMatrix& s) { return py::make_tuple(s.rows(), s.cols()); })
      .def_property_readonly("nnz", &SparseMatrix::nnz)
      .def_property_readonly("indptr", [](const SparseMatrix& s) {
        return std::vector<std::size_t>(s.row_ptr().begin(), s.row_ptr().end());
      })
      .def_property_readonly("indices", [](const SparseMatrix& s) {
        return std::vector<std::size_t>(s.col_idx().begin(), s.col_idx().end());
      })
      .def_property_readonly("data", [](const SparseMatrix& s) {
        return std::vector<double>(s.values().begin(), s.values().end());
      })
      .def("to_numpy", &to_numpy)
      .def("__repr__", [](const SparseMatrix& s) { return "<SparseMatrix " + s.shape_string() + ">"; });

  m.def("spmm", [](const SparseMatrix& a, const SparseMatrix& b, unsigned threads) {
    return spmm(a, b, context(threads));
  }, py::arg("a"), py::arg("b"), py::arg("threads") = 1);
  m.def("transpose", [](const SparseMatrix& a) { return transpose(a); });
  m.def("read_matrix", [](const std::filesystem::path& p) { return read_matrix(p); });
  m.def("write_matrix", [](const std::filesystem::path& p, const SparseMatrix& s) { write_matrix(p, s); });

  py::enum_<JoinType>(m, "JoinType")
      .value("INNER", JoinType::kInner)
      .value("LEFT", JoinType::kLeft)
      .value("OUTER", JoinType::kOuter)
      .value("UNION", JoinType::kUnion);

  py::class_<FactorizedTable>(m, "FactorizedTable")
      .def(py::init([](std::vector<SparseMatrix> sources, std::vector<SparseMatrix> mappings,
                       std::vector<SparseMatrix> indicators, JoinType join, std::size_t rows, std::size_t cols) {
             return FactorizedTable{std::move(sources), std::move(mappings), std::move(indicators), join, rows, cols};
           }),
           py::arg("sources"), py::arg("mappings"), py::arg("indicators"), py::arg("join_type"),
           py::arg("target_rows"), py::arg("target_cols"))
      .def_readonly("sources", &FactorizedTable::sources)
      .def_readonly("mappings", &FactorizedTable::mappings)
      .def_readonly("indicators", &FactorizedTable::indicators)
      .def_readonly("join_type", &FactorizedTable::join_type)
      .def_readonly("target_rows", &FactorizedTable::target_rows)
      .def_readonly("target_cols", &FactorizedTable::target_cols);

  m.def("validate", [](const FactorizedTable& ft) {
    std::vector<std::string> out;
    for (const auto& v : validate(ft).violations) out.push_back(v.kind + ": " + v.message);
    return out;
  }, "Violations as 'kind: message' strings; empty when valid.");
  m.def("materialize", [](const FactorizedTable& ft, unsigned threads) { return materialize(ft, context(threads)); },
        py::arg("table"), py::arg("threads") = 1);
  m.def("load_dataset", [](const std::filesystem::path& p) { return load_dataset(p).table; });
  m.def("redundancy_stats", [](const FactorizedTable& ft) {
    const auto s = redundancy_stats(ft);
    py::dict d;
    d["tuple_ratios"] = s.tuple_ratios;
    d["feature_ratios"] = s.feature_ratios;
    d["sparsity_T"] = s.sparsity_T;
    d["rho_c"] = s.rho_c;
    return d;
  });

  py::class_<TargetHandle>(m, "TargetHandle")
      .def_static("materialized", &TargetHandle::materialized)
      .def_static("factorized", &TargetHandle::factorized)
      .def_property_readonly("is_factorized", &TargetHandle::is_factorized)
      .def_property_readonly("shape", [](const TargetHandle& t) { return py::make_tuple(t.rows(), t.cols()); })
      .def("to_matrix", [](const TargetHandle& t) { return t.to_matrix(); });

  m.def("lmm", [](const TargetHandle& t, const SparseMatrix& x, unsigned threads) {
    return lmm(t, x, context(threads));
  }, py::arg("t"), py::arg("x"), py::arg("threads") = 1);
  m.def("rmm", [](const SparseMatrix& x, const TargetHandle& t, unsigned threads) {
    return rmm(x, t, context(threads));
  }, py::arg("x"), py::arg("t"), py::arg("threads") = 1);
  m.def("transpose_lmm", [](const TargetHandle& t, const SparseMatrix& x, unsigned threads) {
    return transpose_lmm(t, x, context(threads));
  }, py::arg("t"), py::arg("x"), py::arg("threads") = 1);
  m.def("row_sum", [](const TargetHandle& t) { return row_sum_t(t); });
  m.def("col_sum", [](const TargetHandle& t) { return col_sum_t(t); });
  m.def("square", [](const TargetHandle& t) { return elementwise_t(t, ScalarFn::square()); });
  m.def("scale", [](const TargetHandle& t, double s) { return elementwise_t(t, ScalarFn::scale(s)); });

  py::enum_<ModelKind>(m, "Model")
      .value("LINREG", ModelKind::kLinearRegression)
      .value("LOGREG", ModelKind::kLogisticRegression)
      .value("KMEANS", ModelKind::kKMeans)
      .value("GNMF", ModelKind::kGaussianNmf);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("clusters", &TrainConfig::clusters)
      .def_readwrite("rank", &TrainConfig::rank)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("parameters", &TrainResult::parameters)
      .def_readonly("losses", &TrainResult::losses)
      .def_readonly("trace", &TrainResult::trace)
      .def_readonly("wall_time", &TrainResult::wall_time)
      .def("to_json", [](const TrainResult& r, const std::string& id) { return r.to_json(id).dump(); },
           py::arg("dataset_id") = "");

  m.def("train", [](ModelKind model, const TargetHandle& t, std::optional<SparseMatrix> labels,
                    const TrainConfig& cfg, unsigned threads) {
    return train(model, t, labels ? &*labels : nullptr, cfg, context(threads));
  }, py::arg("model"), py::arg("t"), py::arg("labels") = py::none(), py::arg("config") = TrainConfig{},
        py::arg("threads") = 1);
  m.def("linreg_gradient", [](const TargetHandle& t, const SparseMatrix& y, const DenseMatrix& w) {
    return linreg_gradient(t, y, w);
  });
  m.def("stable_learning_rate", &stable_learning_rate);

  m.def("model_cost", [](ModelKind model, const FactorizedTable& ft, const TrainConfig& cfg) {
    return model_cost(model, TableDescriptor::from(ft), cfg).to_json().dump();
  }, "Cost profile as a JSON string.");

  py::class_<GenSpec>(m, "GenSpec")
      .def(py::init<>())
      .def_readwrite("id", &GenSpec::id)
      .def_readwrite("target_rows", &GenSpec::target_rows)
      .def_readwrite("n_sources", &GenSpec::n_sources)
      .def_readwrite("sparsity", &GenSpec::sparsity)
      .def_readwrite("rho_c", &GenSpec::rho_c)
      .def_readwrite("join_type", &GenSpec::join_type)
      .def_readwrite("seed", &GenSpec::seed);
  m.def("generate", [](const GenSpec& s) { return generate(s).table; });

  m.def("features", [](const FactorizedTable& ft, ModelKind model, const TrainConfig& cfg, double parallelism,
                       double bandwidth) {
    const auto f = extract_features(TableDescriptor::from(ft), model, cfg, {parallelism, bandwidth, "python"});
    return std::vector<double>(f.begin(), f.end());
  }, py::arg("table"), py::arg("model"), py::arg("config") = TrainConfig{}, py::arg("parallelism") = 1.0,
        py::arg("bandwidth") = 1e10);
  m.def("feature_names", [] {
    std::vector<std::string> out;
    for (auto n : feature_names()) out.emplace_back(n);
    return out;
  });
}
