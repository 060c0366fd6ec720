#include "mllkm/data.hpp"
#include "mllkm/kernels.hpp"
#include "mllkm/model.hpp"
#include "mllkm/pipeline.hpp"
#include "mllkm/sdca.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace mllkm;

namespace {

Dataset to_dataset(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y) {
  return Dataset(Matrix(x), Vector(y));
}

struct TrainResult {
  MllkmModel model;
  double objective;
  int outer_iterations;
  bool converged;
  double seconds;
};

TrainResult train(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y, const std::string& family,
                  const std::string& scope, std::vector<double> gammas, double C, int epochs, std::size_t budget,
                  std::size_t batch, std::uint64_t seed, bool standardize, bool reprocess) {
  TrainOptions options;
  options.candidates = CandidateSpec{parse_family(family), parse_scope(scope), std::move(gammas)};
  options.candidates.validate();
  options.mkl.C = C;
  options.mkl.epochs = epochs;
  options.mkl.budget = budget;
  options.mkl.batch = batch;
  options.mkl.seed = seed;
  options.mkl.reprocess = reprocess;
  options.mkl.validate();
  options.standardize = standardize;
  TrainOutcome outcome = [&] {
    py::gil_scoped_release release;
    return train_mllkm(to_dataset(x, y), options);
  }();
  return {std::move(outcome.model), outcome.result.objective, outcome.result.outer_iterations,
          outcome.result.converged, outcome.seconds};
}

Vector predict_labels(const Vector& scores) { return scores.unaryExpr([](double s) { return MllkmModel::label_of(s); }); }

}  // namespace

PYBIND11_MODULE(_mllkm, m) {
  m.doc() = "Multiple locally linear kernel machine";

  py::class_<MllkmModel>(m, "Model")
      .def_property_readonly("dim", &MllkmModel::dim)
      .def_property_readonly("num_anchors", [](const MllkmModel& model) { return model.anchors().size(); })
      .def_property_readonly("support_vectors", [](const MllkmModel& model) { return model.info().support_vectors; })
      .def_property_readonly("converged", [](const MllkmModel& model) { return model.info().converged; })
      .def("decision_function", &MllkmModel::scores, py::arg("x"))
      .def("predict", [](const MllkmModel& model, const Matrix& x) { return predict_labels(model.scores(x)); },
           py::arg("x"))
      .def("map_evaluations",
           [](const MllkmModel& model, const Eigen::RowVectorXd& x) {
             std::size_t count = 0;
             model.score(x, &count);
             return count;
           },
           py::arg("x"), "Number of conformal maps evaluated to score one sample.")
      .def("to_json", &model_to_json)
      .def_static("from_json", &model_from_json, py::arg("text"))
      .def("save", [](const MllkmModel& model, const std::filesystem::path& path) { save_model(model, path); },
           py::arg("path"))
      .def_static("load", &load_model, py::arg("path"));

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("model", &TrainResult::model)
      .def_readonly("objective", &TrainResult::objective)
      .def_readonly("outer_iterations", &TrainResult::outer_iterations)
      .def_readonly("converged", &TrainResult::converged)
      .def_readonly("seconds", &TrainResult::seconds);

  m.def("train", &train, py::arg("x"), py::arg("y"), py::arg("family") = "gauss", py::arg("scope") = "global",
        py::arg("gammas") = log_gamma_grid(0.01, 10.0, 5), py::arg("C") = 100.0, py::arg("epochs") = 10,
        py::arg("budget") = 64, py::arg("batch") = 8, py::arg("seed") = 0, py::arg("standardize") = true,
        py::arg("reprocess") = false, "Train a model on dense features and labels in {-1, +1}.");

  py::class_<LinearModel>(m, "LinearModel")
      .def_readonly("w", &LinearModel::w)
      .def_readonly("bias", &LinearModel::bias)
      .def_readonly("support_vectors", &LinearModel::support_vectors)
      .def("decision_function", [](const LinearModel& model, const Matrix& x) {
        Vector out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = model.score(x.row(i));
        return out;
      });

  m.def(
      "train_linear",
      [](const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y, double C, int epochs,
         std::uint64_t seed, bool standardize, bool bias) {
        SdcaConfig config;
        config.C = C;
        config.epochs = epochs;
        config.seed = seed;
        return train_linear_baseline(to_dataset(x, y), config, standardize, bias);
      },
      py::arg("x"), py::arg("y"), py::arg("C") = 100.0, py::arg("epochs") = 10, py::arg("seed") = 0,
      py::arg("standardize") = true, py::arg("bias") = false, "Linear-kernel SVM trained by the same SDCA solver.");

  m.def(
      "sdca",
      [](const Vector& y, const SquareMatrix& K, double C, int epochs, std::uint64_t seed, double tolerance) {
        SdcaConfig config;
        config.C = C;
        config.epochs = epochs;
        config.seed = seed;
        config.stall_tolerance = tolerance;
        const DualState state = sdca(y, K, config);
        return py::make_tuple(state.alpha, state.yhat, state.epochs);
      },
      py::arg("y"), py::arg("K"), py::arg("C") = 1.0, py::arg("epochs") = 10, py::arg("seed") = 0,
      py::arg("tolerance") = 1e-3, "Box-constrained SVM dual; returns (alpha, yhat, epochs).");
  m.def("dual_objective", &dual_objective, py::arg("alpha"), py::arg("y"), py::arg("K"));

  m.def(
      "kernel_eval",
      [](const std::string& family, const std::string& scope, double gamma, const Vector& center,
         const Eigen::RowVectorXd& x1, const Eigen::RowVectorXd& x2) {
        return kernel_eval(ConformalMap(parse_family(family), parse_scope(scope), gamma, center), x1, x2);
      },
      py::arg("family"), py::arg("scope"), py::arg("gamma"), py::arg("center"), py::arg("x1"), py::arg("x2"));
  m.def("log_gamma_grid", &log_gamma_grid, py::arg("lo"), py::arg("hi"), py::arg("count"));

  m.def(
      "load_libsvm",
      [](const std::filesystem::path& path) {
        const Dataset d = load_libsvm(path);
        return py::make_tuple(d.features(), d.labels());
      },
      py::arg("path"));
  m.def(
      "gen_piecewise",
      [](long n, int segments, std::uint64_t seed) {
        const Dataset d = gen_piecewise(n, segments, seed);
        return py::make_tuple(d.features(), d.labels());
      },
      py::arg("n"), py::arg("segments"), py::arg("seed") = 0);

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
}
