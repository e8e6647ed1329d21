#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cbo/acquisition.hpp"
#include "cbo/evaluators.hpp"
#include "cbo/search_space.hpp"

namespace cbo {

enum class Mode {
  /// Independent GPs on runtime and constraint, EI × PoF acquisition.
  kCbo,
  /// Unconstrained BO on the quadratically penalized runtime.
  kPenalizedBo,
};

std::string ToString(Mode mode);
Mode ParseMode(const std::string& text);
std::string ToString(Task task);
Task ParseTask(const std::string& text);

/// Minimize training time subject to a predictive-performance bound.
struct ProblemSpec {
  Task task = Task::kRegression;
  /// c₀ in raw metric units: mse ceiling or accuracy floor.
  double threshold = 1.0;
  /// τ_b in seconds; measured by the first (default) evaluation when absent.
  std::optional<double> baseline_runtime;
  /// Raw metric of the default configuration; measured when absent.
  std::optional<double> baseline_metric;
  SearchSpace space;
  std::size_t budget = 50;
  /// Initial design size including the default point; 0 means max(4, 2·dim).
  std::size_t n_init = 0;

  std::size_t InitialDesignSize() const;
  void Validate() const;
};

/// log τ − log τ_b. Throws InvalidArgument for non-positive inputs.
double TransformObjective(double raw_runtime, double baseline_runtime);

struct ConstraintValue {
  /// ≤ 0 exactly when the raw metric satisfies the threshold.
  double y_c = 0.0;
  /// Set when a non-positive metric was clamped to 1e-12 before the log.
  bool clamped = false;
};

/// Regression: log m − log c₀. Classification: log c₀ − log m. A NaN metric
/// yields NaN (the caller marks the observation failed).
ConstraintValue TransformConstraint(Task task, double raw_metric, double threshold);

/// The raw-units test: m ≤ c₀ (regression) or m ≥ c₀ (classification).
bool RawFeasible(Task task, double raw_metric, double threshold);

struct Observation {
  std::size_t iteration = 0;
  UnitPoint x;
  ParamValues values;
  double raw_runtime = 0.0;
  double raw_metric = 0.0;
  double y_f = 0.0;
  double y_c = 0.0;
  bool failed = false;
  bool metric_clamped = false;
  std::string diagnostic;

  bool feasible() const { return !failed && y_c <= 0.0; }
};

enum class ProposalKind { kDefault, kDesign, kModel, kFallback };
std::string ToString(ProposalKind kind);

struct Proposal {
  ParamValues values;
  UnitPoint x;
  ProposalKind kind = ProposalKind::kDefault;
  /// Acquisition value at x for model-based proposals.
  std::optional<double> acquisition_value;
  std::string note;
};

struct OptimizerState {
  ProblemSpec problem;
  Mode mode = Mode::kCbo;
  std::uint64_t seed = 0;
  std::vector<Observation> observations;
  /// Index into observations of the best feasible point.
  std::optional<std::size_t> incumbent;
  /// Effective τ_b (configured, or the first measured runtime).
  std::optional<double> baseline_runtime;
  std::optional<double> baseline_metric;
};

/// Training sets and fitted models behind one model-based proposal.
struct TrainingData {
  std::vector<UnitPoint> X;
  std::vector<double> y;
};

struct Surrogates {
  AcquisitionMode mode = AcquisitionMode::kCboJoint;
  std::optional<GpModel> objective;
  std::optional<GpModel> constraint;
  std::optional<double> f_best;

  /// Borrows the models; valid while this object is alive and unmoved.
  AcquisitionContext Context() const;
};

/// The answer a mode would report after its observations so far. CBO reports
/// its incumbent; penalized BO reports its minimum penalized value, which may
/// be infeasible.
struct Recommendation {
  std::size_t index = 0;
  bool feasible = false;
};

/// Ask-tell constrained BO loop. Single owner; not thread-safe.
class Optimizer {
 public:
  Optimizer(ProblemSpec problem, Mode mode, std::uint64_t seed);
  explicit Optimizer(OptimizerState state);

  /// Next configuration to evaluate. Deterministic given the state.
  Proposal Ask() const;

  /// Records an evaluation of `values`. Throws InvalidArgument when the values
  /// are outside the search space.
  void Tell(const ParamValues& values, const EvaluationResult& result);

  const OptimizerState& state() const { return state_; }
  const ProblemSpec& problem() const { return state_.problem; }
  bool Done() const { return state_.observations.size() >= state_.problem.budget; }
  const Observation* Incumbent() const;
  std::optional<Recommendation> Recommend() const;

  /// Penalty weight 1/(2ρ) = max(1, range of observed y_f).
  double PenaltyWeight() const;

  /// Data the objective GP is fitted on: y_f of successful trials (CBO), or
  /// penalized values with failed trials imputed as worst + 1 (penalized BO).
  TrainingData ObjectiveTrainingData() const;
  /// Data the constraint GP is fitted on (CBO only): y_c of successful trials.
  std::optional<TrainingData> ConstraintTrainingData() const;

  /// Fits the surrogates the next model-based proposal would use. Throws
  /// FitError when there is too little data.
  Surrogates FitSurrogates() const;

 private:
  std::vector<UnitPoint> DesignPoints() const;
  Proposal ModelProposal(std::size_t iteration) const;
  void UpdateIncumbent();

  OptimizerState state_;
  std::vector<UnitPoint> design_;
};

struct TraceRecord {
  Observation observation;
  ProposalKind kind = ProposalKind::kDefault;
  std::optional<double> acquisition_value;
  double cumulative_runtime = 0.0;
  /// Mode's recommendation after this observation.
  std::optional<std::size_t> best_iteration;
  double best_runtime = 0.0;
  double best_metric = 0.0;
  bool best_feasible = false;
  std::optional<double> cpu_seconds;
};

struct TrialTrace {
  Mode mode = Mode::kCbo;
  std::uint64_t seed = 0;
  Task task = Task::kRegression;
  double threshold = 0.0;
  std::optional<double> baseline_runtime;
  std::optional<double> baseline_metric;
  std::vector<TraceRecord> records;
};

/// Evaluates one configuration; `iteration` is the 0-based trial index.
using Evaluator = std::function<EvaluationResult(const ParamValues& values, std::size_t iteration)>;

/// Runs ask/tell until the budget is spent. Evaluator exceptions become failed
/// observations.
TrialTrace Run(const ProblemSpec& problem, Mode mode, std::uint64_t seed,
               const Evaluator& evaluator);

/// SplitMix64 combination used to derive per-purpose seeds.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t salt);

}  // namespace cbo
