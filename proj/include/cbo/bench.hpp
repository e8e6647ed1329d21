#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cbo/error.hpp"
#include "cbo/optimizer.hpp"

namespace cbo {

/// Trace files carry this schema tag and major version; readers reject others.
inline constexpr std::string_view kTraceSchema = "cbo-trace";
inline constexpr int kTraceMajorVersion = 1;
inline constexpr int kTraceMinorVersion = 0;

/// Config problem error with a location: line/column for syntax errors, a JSON
/// pointer for schema errors.
class ConfigError : public Error {
 public:
  ConfigError(std::string message, std::size_t line = 0, std::size_t column = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ", column " + std::to_string(column) +
                             ": " + message
                       : message),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct SyntheticSource {
  std::string name;
  double noise_scale = 0.01;
};

struct ExternalSource {
  std::string command;
  SearchSpace space;
  Task task = Task::kRegression;
  double threshold = 0.0;
  std::optional<double> baseline_runtime;
  std::optional<double> baseline_metric;
  /// Per-trial limit; defaults to 10× the baseline runtime once known.
  std::optional<double> timeout_seconds;
};

struct RunConfig {
  std::string name;
  std::variant<SyntheticSource, ExternalSource> problem;
  std::vector<Mode> modes{Mode::kCbo, Mode::kPenalizedBo};
  std::size_t budget = 50;
  std::size_t n_init = 0;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "cbo_out";
  /// Worker threads for synthetic problems; 0 picks the hardware concurrency.
  std::size_t threads = 0;

  bool is_external() const { return std::holds_alternative<ExternalSource>(problem); }
  void Validate() const;
};

RunConfig ParseRunConfig(const std::string& text);
RunConfig LoadRunConfig(const std::filesystem::path& path);
ProblemSpec MakeProblemSpec(const RunConfig& config);

/// One (mode, seed) line of the comparison table.
struct ComparisonRow {
  std::string problem;
  Task task = Task::kRegression;
  double threshold = 0.0;
  std::optional<double> baseline_metric;
  Mode mode = Mode::kCbo;
  std::uint64_t seed = 0;
  double best_trial_runtime = 0.0;
  double cumulative_runtime = 0.0;
  /// NaN when the run produced no usable observation.
  double incumbent_metric = 0.0;
  bool feasible = false;
  std::size_t failed_trials = 0;
};

ComparisonRow Summarize(const std::string& problem, const TrialTrace& trace);

struct TraceHeader {
  std::string problem;
  Mode mode = Mode::kCbo;
  std::uint64_t seed = 0;
  Task task = Task::kRegression;
  double threshold = 0.0;
  std::size_t budget = 0;
  std::optional<double> baseline_runtime;
  std::optional<double> baseline_metric;
};

/// JSONL: one header line, then one line per trial.
void WriteTrace(std::ostream& os, const std::string& problem, const TrialTrace& trace);

/// Per-iteration columns needed for plotting.
struct PlotRow {
  std::size_t iteration = 0;
  std::optional<double> incumbent_metric;
  double cumulative_runtime = 0.0;
  bool feasible = false;
};

struct LoadedTrace {
  TraceHeader header;
  std::vector<PlotRow> rows;
  std::size_t warnings = 0;
};

/// Throws Error for a missing/invalid header or an unknown major version;
/// malformed record lines are skipped and counted in `warnings`.
LoadedTrace ReadTrace(std::istream& is);

struct ExperimentResult {
  std::vector<ComparisonRow> rows;
  std::vector<std::filesystem::path> trace_files;
  std::filesystem::path summary_csv;
  std::filesystem::path summary_txt;
};

/// Executes every (mode × seed) run and writes traces plus the summary.
ExperimentResult RunExperiment(const RunConfig& config);

void WriteSummaryCsv(std::ostream& os, const std::vector<ComparisonRow>& rows);
std::vector<ComparisonRow> ReadSummaryCsv(std::istream& is);
/// Row-level table with violation markers.
std::string RenderSummaryText(const std::vector<ComparisonRow>& rows);

struct ModeAggregate {
  std::string problem;
  Mode mode = Mode::kCbo;
  std::size_t runs = 0;
  double median_best_trial_runtime = 0.0;
  double median_cumulative_runtime = 0.0;
  double median_incumbent_metric = 0.0;
  double violation_rate = 0.0;
};

/// Groups by (problem, mode). Medians skip NaN metrics.
std::vector<ModeAggregate> Aggregate(const std::vector<ComparisonRow>& rows);

/// Cross-seed comparison table. Throws Error("no runs") when rows is empty.
std::string RenderReport(const std::vector<ComparisonRow>& rows);

std::string FormatNumber(double v);

}  // namespace cbo
