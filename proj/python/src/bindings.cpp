#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cbo/acquisition.hpp"
#include "cbo/bench.hpp"
#include "cbo/error.hpp"
#include "cbo/evaluators.hpp"
#include "cbo/gp.hpp"
#include "cbo/optimizer.hpp"
#include "cbo/search_space.hpp"
#include "cbo/serialization.hpp"

namespace py = pybind11;
using namespace cbo;

namespace {

std::vector<double> ToVec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

PYBIND11_MODULE(_cbopt, m) {
  m.doc() = "Constrained Bayesian optimization of training time under a metric constraint.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<FitError>(m, "FitError", base.ptr());
  py::register_exception<AcquisitionError>(m, "AcquisitionError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::enum_<Scale>(m, "Scale").value("linear", Scale::kLinear).value("log", Scale::kLog);
  py::enum_<ParamKind>(m, "ParamKind")
      .value("continuous", ParamKind::kContinuous)
      .value("integer", ParamKind::kInteger)
      .value("categorical", ParamKind::kCategorical);
  py::enum_<Task>(m, "Task").value("regression", Task::kRegression).value("classification", Task::kClassification);
  py::enum_<Mode>(m, "Mode").value("cbo", Mode::kCbo).value("penalized_bo", Mode::kPenalizedBo);
  py::enum_<AcquisitionMode>(m, "AcquisitionMode")
      .value("cbo_joint", AcquisitionMode::kCboJoint)
      .value("penalized_ei", AcquisitionMode::kPenalizedEi);
  py::enum_<ProposalKind>(m, "ProposalKind")
      .value("default", ProposalKind::kDefault)
      .value("design", ProposalKind::kDesign)
      .value("model", ProposalKind::kModel)
      .value("fallback", ProposalKind::kFallback);

  // search space
  py::class_<ParamSpec>(m, "ParamSpec")
      .def_static("continuous", &ParamSpec::Continuous, py::arg("name"), py::arg("low"), py::arg("high"),
                  py::arg("scale") = Scale::kLinear)
      .def_static("integer", &ParamSpec::Integer, py::arg("name"), py::arg("low"), py::arg("high"),
                  py::arg("scale") = Scale::kLinear)
      .def_static("categorical", &ParamSpec::Categorical, py::arg("name"), py::arg("categories"))
      .def("with_default", [](ParamSpec p, ParamValue v) { return std::move(p).WithDefault(std::move(v)); })
      .def_readonly("name", &ParamSpec::name)
      .def_readonly("kind", &ParamSpec::kind)
      .def_readonly("low", &ParamSpec::low)
      .def_readonly("high", &ParamSpec::high)
      .def_readonly("categories", &ParamSpec::categories)
      .def_readonly("scale", &ParamSpec::scale)
      .def_readonly("default", &ParamSpec::default_value);

  py::class_<SearchSpace>(m, "SearchSpace")
      .def(py::init<std::vector<ParamSpec>>(), py::arg("params"))
      .def_property_readonly("params", &SearchSpace::params)
      .def_property_readonly("dim", &SearchSpace::dim)
      .def("encode", &SearchSpace::Encode, py::arg("values"))
      .def("decode", [](const SearchSpace& s, const std::vector<double>& u) { return s.Decode(u); }, py::arg("u"))
      .def("default_config", &SearchSpace::DefaultConfig)
      .def("to_json", [](const SearchSpace& s) { return ToJson(s).dump(); })
      .def_static("from_json", [](const std::string& text) { return SearchSpaceFromJson(nlohmann::json::parse(text)); });

  m.def("sample", &Sample, py::arg("space"), py::arg("n"), py::arg("seed"));
  m.def("sample_unit_cube", &SampleUnitCube, py::arg("dim"), py::arg("n"), py::arg("seed"));

  // GP surrogate
  py::class_<KernelParams>(m, "KernelParams")
      .def(py::init([](double s, std::vector<double> l, double n) { return KernelParams{s, std::move(l), n}; }),
           py::arg("signal_variance"), py::arg("lengthscales"), py::arg("noise_variance"))
      .def_readwrite("signal_variance", &KernelParams::signal_variance)
      .def_readwrite("lengthscales", &KernelParams::lengthscales)
      .def_readwrite("noise_variance", &KernelParams::noise_variance)
      .def("validate", &KernelParams::Validate)
      .def_readonly_static("noise_floor", &KernelParams::kNoiseFloor);

  m.def("kernel_matern52",
        [](const std::vector<double>& a, const std::vector<double>& b, const KernelParams& p) {
          return KernelMatern52(a, b, p);
        },
        py::arg("x1"), py::arg("x2"), py::arg("params"));
  m.def("log_marginal_likelihood",
        [](const std::vector<UnitPoint>& X, const std::vector<double>& y, const KernelParams& p) {
          return LogMarginalLikelihood(X, y, p);
        },
        py::arg("X"), py::arg("y"), py::arg("params"));
  m.def("log_marginal_likelihood_with_gradient",
        [](const std::vector<UnitPoint>& X, const std::vector<double>& y, const KernelParams& p) {
          const auto r = LogMarginalLikelihoodWithGradient(X, y, p);
          return py::make_tuple(r.value, ToVec(r.gradient));
        },
        py::arg("X"), py::arg("y"), py::arg("params"),
        "LML and its gradient w.r.t. (log σ², log ℓ_1..d, log σ_n²).");

  py::class_<GpModel>(m, "GpModel")
      .def_static("condition",
                  [](const std::vector<UnitPoint>& X, const std::vector<double>& y, const KernelParams& p) {
                    return GpModel::Condition(X, y, p);
                  },
                  py::arg("X"), py::arg("y"), py::arg("params"))
      .def("predict",
           [](const GpModel& g, const std::vector<double>& x) {
             const auto p = g.Predict(x);
             return py::make_tuple(p.mean, p.variance);
           },
           py::arg("x"), "Posterior (mean, variance) in the original target units.")
      .def_property_readonly("params", &GpModel::params)
      .def_property_readonly("y_mean", &GpModel::y_mean)
      .def_property_readonly("y_std", &GpModel::y_std)
      .def_property_readonly("jitter", &GpModel::jitter)
      .def_property_readonly("dim", &GpModel::dim)
      .def("__len__", &GpModel::size);

  m.def("fit",
        [](const std::vector<UnitPoint>& X, const std::vector<double>& y, std::uint64_t seed, int restarts,
           int max_iterations) { return Fit(X, y, seed, FitOptions{restarts, max_iterations}); },
        py::arg("X"), py::arg("y"), py::arg("seed") = 0, py::arg("restarts") = 8, py::arg("max_iterations") = 200);

  // acquisition
  m.def("expected_improvement", &ExpectedImprovement, py::arg("mean"), py::arg("stddev"), py::arg("f_best"));
  m.def("probability_of_feasibility", &ProbabilityOfFeasibility, py::arg("mean_c"), py::arg("stddev_c"));
  m.def("penalized_objective", &PenalizedObjective, py::arg("y_f"), py::arg("y_c"), py::arg("inv_two_rho"));
  m.def("joint_acquisition",
        [](const GpModel& f, const GpModel* c, std::optional<double> f_best, AcquisitionMode mode,
           const std::vector<double>& x) { return JointAcquisition({&f, c, f_best, mode}, x); },
        py::arg("objective_model"), py::arg("constraint_model"), py::arg("f_best"),
        py::arg("mode") = AcquisitionMode::kCboJoint, py::arg("x"));
  m.def("maximize_acquisition",
        [](const std::function<double(std::vector<double>)>& fn, std::size_t dim, std::uint64_t seed,
           std::size_t candidates) {
          MaximizeOptions opts;
          opts.candidates = candidates;
          return MaximizeAcquisition(
              [&](std::span<const double> x) { return fn({x.begin(), x.end()}); }, dim, seed, opts);
        },
        py::arg("fn"), py::arg("dim"), py::arg("seed") = 0, py::arg("candidates") = 1024);

  // transforms
  m.def("transform_objective", &TransformObjective, py::arg("raw_runtime"), py::arg("baseline_runtime"));
  m.def("transform_constraint",
        [](Task t, double metric, double threshold) { return TransformConstraint(t, metric, threshold).y_c; },
        py::arg("task"), py::arg("raw_metric"), py::arg("threshold"));
  m.def("raw_feasible", &RawFeasible, py::arg("task"), py::arg("raw_metric"), py::arg("threshold"));
  m.def("mix_seed", &MixSeed, py::arg("seed"), py::arg("salt"));

  // evaluators
  py::class_<EvaluationResult>(m, "EvaluationResult")
      .def(py::init([](double runtime, double metric) {
             EvaluationResult r;
             r.runtime_seconds = runtime;
             r.metric = metric;
             return r;
           }),
           py::arg("runtime_seconds"), py::arg("metric"))
      .def_static("failed", &EvaluationResult::Failed, py::arg("why"), py::arg("runtime") = 0.0,
                  py::arg("metric") = std::numeric_limits<double>::quiet_NaN())
      .def_readonly("runtime_seconds", &EvaluationResult::runtime_seconds)
      .def_readonly("metric", &EvaluationResult::metric)
      .def_readonly("diagnostic", &EvaluationResult::diagnostic)
      .def_readonly("cpu_seconds", &EvaluationResult::cpu_seconds)
      .def_readonly("runtime_reported", &EvaluationResult::runtime_reported)
      .def_property_readonly("ok", &EvaluationResult::ok);

  m.def("synthetic_problems", &SyntheticProblemNames);
  m.def("synthetic_space", [](const std::string& name) { return GetSyntheticProblem(name).space; });
  m.def("evaluate_synthetic",
        [](const std::string& name, const ParamValues& values, std::uint64_t noise_seed, double noise_scale) {
          return EvaluateSynthetic(GetSyntheticProblem(name), values, noise_seed, noise_scale);
        },
        py::arg("problem"), py::arg("values"), py::arg("noise_seed") = 0, py::arg("noise_scale") = 0.01);
  m.def("grid_optimum",
        [](const std::string& name, std::size_t resolution) {
          const auto g = GridSearchOptimum(GetSyntheticProblem(name), resolution);
          return py::make_tuple(g.x, g.objective, g.metric);
        },
        py::arg("problem"), py::arg("resolution") = 1000, "(x, objective, metric) of the best feasible grid point.");
  m.def("evaluate_external", &EvaluateExternal, py::arg("command"), py::arg("values"),
        py::arg("timeout_seconds") = std::nullopt, py::call_guard<py::gil_scoped_release>());

  // optimizer
  py::class_<ProblemSpec>(m, "ProblemSpec")
      .def(py::init([](SearchSpace space, Task task, double threshold, std::size_t budget, std::size_t n_init,
                       std::optional<double> baseline_runtime, std::optional<double> baseline_metric) {
             ProblemSpec p;
             p.space = std::move(space);
             p.task = task;
             p.threshold = threshold;
             p.budget = budget;
             p.n_init = n_init;
             p.baseline_runtime = baseline_runtime;
             p.baseline_metric = baseline_metric;
             p.Validate();
             return p;
           }),
           py::arg("space"), py::arg("task"), py::arg("threshold"), py::arg("budget") = 50, py::arg("n_init") = 0,
           py::arg("baseline_runtime") = std::nullopt, py::arg("baseline_metric") = std::nullopt)
      .def_readonly("space", &ProblemSpec::space)
      .def_readonly("task", &ProblemSpec::task)
      .def_readonly("threshold", &ProblemSpec::threshold)
      .def_readonly("budget", &ProblemSpec::budget)
      .def_property_readonly("initial_design_size", &ProblemSpec::InitialDesignSize);

  py::class_<Observation>(m, "Observation")
      .def_readonly("iteration", &Observation::iteration)
      .def_readonly("x", &Observation::x)
      .def_readonly("values", &Observation::values)
      .def_readonly("raw_runtime", &Observation::raw_runtime)
      .def_readonly("raw_metric", &Observation::raw_metric)
      .def_readonly("y_f", &Observation::y_f)
      .def_readonly("y_c", &Observation::y_c)
      .def_readonly("failed", &Observation::failed)
      .def_readonly("diagnostic", &Observation::diagnostic)
      .def_property_readonly("feasible", &Observation::feasible);

  py::class_<Proposal>(m, "Proposal")
      .def_readonly("values", &Proposal::values)
      .def_readonly("x", &Proposal::x)
      .def_readonly("kind", &Proposal::kind)
      .def_readonly("acquisition_value", &Proposal::acquisition_value)
      .def_readonly("note", &Proposal::note);

  py::class_<Optimizer>(m, "Optimizer")
      .def(py::init<ProblemSpec, Mode, std::uint64_t>(), py::arg("problem"), py::arg("mode") = Mode::kCbo,
           py::arg("seed") = 0)
      .def("ask", &Optimizer::Ask)
      .def("tell", &Optimizer::Tell, py::arg("values"), py::arg("result"))
      .def_property_readonly("done", &Optimizer::Done)
      .def_property_readonly("observations", [](const Optimizer& o) { return o.state().observations; })
      .def("incumbent",
           [](const Optimizer& o) -> std::optional<Observation> {
             const auto* inc = o.Incumbent();
             return inc ? std::optional<Observation>(*inc) : std::nullopt;
           })
      .def("recommend",
           [](const Optimizer& o) -> std::optional<Observation> {
             const auto r = o.Recommend();
             return r ? std::optional<Observation>(o.state().observations[r->index]) : std::nullopt;
           })
      .def("penalty_weight", &Optimizer::PenaltyWeight)
      .def("snapshot", [](const Optimizer& o) { return ToJson(o.state()).dump(); })
      .def_static("restore",
                  [](const std::string& text) { return Optimizer(OptimizerStateFromJson(nlohmann::json::parse(text))); });

  py::class_<TraceRecord>(m, "TraceRecord")
      .def_readonly("observation", &TraceRecord::observation)
      .def_readonly("kind", &TraceRecord::kind)
      .def_readonly("cumulative_runtime", &TraceRecord::cumulative_runtime)
      .def_readonly("best_iteration", &TraceRecord::best_iteration)
      .def_readonly("best_runtime", &TraceRecord::best_runtime)
      .def_readonly("best_metric", &TraceRecord::best_metric)
      .def_readonly("best_feasible", &TraceRecord::best_feasible);

  m.def("run",
        [](const ProblemSpec& problem, Mode mode, std::uint64_t seed,
           const std::function<EvaluationResult(const ParamValues&, std::size_t)>& evaluator) {
          return Run(problem, mode, seed, evaluator).records;
        },
        py::arg("problem"), py::arg("mode"), py::arg("seed"), py::arg("evaluator"),
        "Full ask/tell loop with a Python evaluator(values, iteration) -> EvaluationResult.");

  // benchmark runs
  m.def("run_config",
        [](const std::string& config_json, std::string out_dir) {
          auto cfg = ParseRunConfig(config_json);
          if (!out_dir.empty()) cfg.output_dir = out_dir;
          ExperimentResult r;
          {
            py::gil_scoped_release release;
            r = RunExperiment(cfg);
          }
          return py::make_tuple(r.summary_csv, r.trace_files);
        },
        py::arg("config_json"), py::arg("out_dir") = "",
        "Runs a benchmark config and returns (summary_csv, trace_files).");
}
