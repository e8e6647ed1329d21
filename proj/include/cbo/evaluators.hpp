#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbo/search_space.hpp"

namespace cbo {

enum class Task {
  /// Metric is an error (e.g. mse); feasible when metric <= threshold.
  kRegression,
  /// Metric is a score (e.g. accuracy); feasible when metric >= threshold.
  kClassification,
};

enum class EvalStatus { kOk, kFailed };

/// Outcome of training one configuration.
struct EvaluationResult {
  double runtime_seconds = 0.0;
  double metric = 0.0;
  EvalStatus status = EvalStatus::kOk;
  std::string diagnostic;
  /// Child CPU time (user + system), diagnostics only.
  std::optional<double> cpu_seconds;
  /// True when runtime_seconds came from the evaluator rather than our clock.
  bool runtime_reported = false;

  bool ok() const { return status == EvalStatus::kOk; }
  static EvaluationResult Failed(std::string why, double runtime = 0.0,
                                 double metric = std::numeric_limits<double>::quiet_NaN());
};

/// Deterministic constrained test problem over a continuous box.
///
/// Runtime is exp(objective(x)) so it stays positive; the metric is
/// constraint_metric(x) verbatim, compared against `threshold` per `task`.
struct SyntheticProblem {
  std::string name;
  SearchSpace space;
  Task task = Task::kRegression;
  double threshold = 1.0;
  std::function<double(std::span<const double>)> objective;
  std::function<double(std::span<const double>)> constraint_metric;

  /// Raw parameter values in space order.
  std::vector<double> RawPoint(const ParamValues& values) const;
  bool Feasible(double metric) const;
};

/// Bundled problems: "gardner1" and "energy_tradeoff".
const SyntheticProblem& GetSyntheticProblem(const std::string& name);
std::vector<std::string> SyntheticProblemNames();

/// runtime = exp(objective(x))·(1 + ε), ε ~ N(0, noise_scale²) from noise_seed.
EvaluationResult EvaluateSynthetic(const SyntheticProblem& problem, const ParamValues& values,
                                   std::uint64_t noise_seed, double noise_scale = 0.01);

struct GridOptimum {
  std::vector<double> x;
  double objective = 0.0;
  double metric = 0.0;
  std::size_t resolution = 0;
};

/// Feasible minimum of the objective over a resolution^dim inclusive grid.
GridOptimum GridSearchOptimum(const SyntheticProblem& problem, std::size_t resolution);

/// Literal token replaced by the params-file path in external commands.
inline constexpr std::string_view kParamsPlaceholder = "{params_file}";

/// Runs `command_template` through /bin/sh with {params_file} pointing at a
/// temporary JSON object of `values`. Wallclock is measured with a monotonic
/// clock from spawn to exit. The final non-empty stdout line must be
/// {"metric": number, "runtime_seconds": optional number}; a reported runtime
/// overrides the measured one. Every failure mode maps to EvalStatus::kFailed.
EvaluationResult EvaluateExternal(const std::string& command_template, const ParamValues& values,
                                  std::optional<double> timeout_seconds = std::nullopt);

}  // namespace cbo
