#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "acfkit/acf.hpp"
#include "acfkit/error.hpp"
#include "acfkit/metrics.hpp"
#include "acfkit/pipeline.hpp"
#include "acfkit/segnet.hpp"
#include "acfkit/signal.hpp"
#include "acfkit/vote.hpp"

namespace py = pybind11;
using namespace acfkit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array (channels x frames)");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_acfkit, m) {
  m.doc() = "Channel-delay correlation features, segment classifier and plurality-vote analysis";

  static py::exception<Error> error_type(m, "AcfkitError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object code = py::str(std::string(to_string(e.code())));
      PyErr_SetObject(error_type.ptr(), py::make_tuple(py::str(e.what()), code).ptr());
    }
  });

  m.def("standardize", [](const Array& x) { return to_array(standardize_rows(to_matrix(x))); }, py::arg("x"),
        "Zero-mean, unit-variance rows.");

  m.def(
      "acf_matrix",
      [](const Array& x, std::size_t max_delay, const std::string& method) {
        const auto acf = compute_acf(to_matrix(x), AcfConfig{max_delay}, acf_method_from_string(method));
        return to_array(acf.rows());
      },
      py::arg("x"), py::arg("max_delay") = AcfConfig{}.max_delay_frames, py::arg("method") = "fast",
      "Rows are ordered channel pairs (i outer, j inner); columns are delays 0..max_delay.");

  m.def(
      "model_forward",
      [](const Array& input, std::uint64_t init_seed) {
        const Matrix x = to_matrix(input);
        ModelParams params(ModelConfig{}, x.rows(), x.cols(), init_seed);
        return model_forward(params, x);
      },
      py::arg("input"), py::arg("init_seed") = kDefaultSeed,
      "Class probabilities of a freshly initialized default network.");

  m.def("exact_pv_recall", [](double p0, std::size_t n) { return exact_pv_recall({p0, n}); }, py::arg("p0"),
        py::arg("n"));
  m.def("brute_force_pv_recall", [](double p0, std::size_t n) { return brute_force_pv_recall({p0, n}); },
        py::arg("p0"), py::arg("n"));
  m.def("theorem_margin", [](double p0, std::size_t n) { return theorem_margin({p0, n}); }, py::arg("p0"),
        py::arg("n"));
  m.def(
      "pv_decide",
      [](std::vector<int> predictions, std::uint64_t seed) { return pv_decide({std::move(predictions), seed}); },
      py::arg("predictions"), py::arg("tie_break_seed") = 0);
  m.def(
      "monte_carlo_session_eval",
      [](double p0, std::size_t n, std::size_t trials, std::uint64_t seed, unsigned threads) {
        const auto est = monte_carlo_session_eval({p0, n}, trials, seed, threads);
        py::dict out;
        out["trials"] = est.trials;
        out["successes"] = est.successes;
        out["recall"] = est.recall;
        out["ci"] = py::make_tuple(est.ci.low, est.ci.high);
        return out;
      },
      py::arg("p0"), py::arg("n"), py::arg("trials") = 100000, py::arg("seed") = kDefaultSeed,
      py::arg("threads") = 1);
  m.def(
      "vote_report_json",
      [](const std::string& mode, double p0, std::size_t n, std::size_t trials, std::uint64_t seed) {
        VoteCommand cmd;
        cmd.mode = vote_mode_from_string(mode);
        cmd.p0 = p0;
        cmd.n = n;
        cmd.trials = trials;
        cmd.seed = seed;
        return cmd_vote(cmd).report.dump();
      },
      py::arg("mode"), py::arg("p0") = 0.6, py::arg("n") = 3, py::arg("trials") = 100000,
      py::arg("seed") = kDefaultSeed);

  m.def(
      "auc_roc",
      [](const std::vector<int>& labels, const std::vector<double>& scores, int positive) {
        return auc_roc(labels, scores, positive);
      },
      py::arg("labels"), py::arg("scores"), py::arg("positive_class") = 0);
  m.def(
      "uar",
      [](const std::vector<int>& labels, const std::vector<int>& preds) { return uar(confusion(labels, preds)); },
      py::arg("labels"), py::arg("predictions"));
  m.def(
      "f1_per_class",
      [](const std::vector<int>& labels, const std::vector<int>& preds) {
        return f1_per_class(confusion(labels, preds)).f1;
      },
      py::arg("labels"), py::arg("predictions"));
  m.def(
      "confusion",
      [](const std::vector<int>& labels, const std::vector<int>& preds) { return confusion(labels, preds).counts; },
      py::arg("labels"), py::arg("predictions"), "Counts indexed [true][predicted]; class 0 is depressed.");
  m.def("chance_f1", &chance_f1, py::arg("prevalence"));
  m.def("majority_f1", &majority_f1, py::arg("prevalence"));
}
