#include "cbo/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cbo/serialization.hpp"

namespace cbo {
namespace {

using nlohmann::json;

constexpr std::uint64_t kNoiseSalt = 0x4015'e000'0000'0005ULL;

// Schema checks report the JSON pointer of the offending field.
const json& Field(const json& obj, const std::string& ptr, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError("missing field " + ptr + "/" + key);
  }
  return obj[key];
}

template <typename T>
T As(const json& j, const std::string& ptr) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("wrong type at " + ptr);
  }
}

double PositiveNumber(const json& j, const std::string& ptr) {
  if (!j.is_number() || !(j.get<double>() > 0.0)) {
    throw ConfigError(ptr + " must be a positive number");
  }
  return j.get<double>();
}

std::optional<double> OptionalPositive(const json& obj, const std::string& ptr, const char* key) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  return PositiveNumber(obj[key], ptr + "/" + key);
}

double Median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseDouble(const std::string& s) {
  if (s.empty() || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw Error("not a number: '" + s + "'");
  return v;
}

std::string Pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string RenderTable(const std::vector<std::vector<std::string>>& table) {
  std::vector<std::size_t> widths;
  for (const auto& row : table) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : table) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += c + 1 == row.size() ? row[c] : Pad(row[c], widths[c] + 2);
    }
    os << line << '\n';
  }
  return os.str();
}

std::string SanitizeName(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = '_';
  }
  return s;
}

}  // namespace

std::string FormatNumber(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

void RunConfig::Validate() const {
  if (modes.empty()) throw ConfigError("at least one mode is required (/modes)");
  if (seeds.empty()) throw ConfigError("at least one seed is required (/seeds)");
  if (const auto* ext = std::get_if<ExternalSource>(&problem)) {
    if (ext->command.find(kParamsPlaceholder) == std::string::npos) {
      throw ConfigError("/problem/external/command must contain {params_file}");
    }
    if (!(ext->threshold > 0.0)) throw ConfigError("/problem/external/threshold must be positive");
  }
  try {
    MakeProblemSpec(*this).Validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

RunConfig ParseRunConfig(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    if (auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
    throw ConfigError(what, line, column);
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");

  RunConfig cfg;
  try {
    cfg.name = root.value("name", std::string("experiment"));
    const json& problem = Field(root, "", "problem");
    if (problem.contains("synthetic")) {
      SyntheticSource src;
      src.name = As<std::string>(problem["synthetic"], "/problem/synthetic");
      GetSyntheticProblem(src.name);
      if (problem.contains("noise_scale")) {
        const json& ns = problem["noise_scale"];
        if (!ns.is_number() || ns.get<double>() < 0.0) {
          throw ConfigError("/problem/noise_scale must be a non-negative number");
        }
        src.noise_scale = ns.get<double>();
      }
      if (!root.contains("name")) cfg.name = src.name;
      cfg.problem = src;
    } else if (problem.contains("external")) {
      const json& e = problem["external"];
      const std::string ptr = "/problem/external";
      ExternalSource src;
      src.command = As<std::string>(Field(e, ptr, "command"), ptr + "/command");
      try {
        src.space = SearchSpaceFromJson(Field(e, ptr, "space"));
      } catch (const InvalidArgument& err) {
        throw ConfigError(ptr + "/space: " + err.what());
      }
      src.task = ParseTask(As<std::string>(Field(e, ptr, "task"), ptr + "/task"));
      src.threshold = PositiveNumber(Field(e, ptr, "threshold"), ptr + "/threshold");
      src.baseline_runtime = OptionalPositive(e, ptr, "baseline_runtime");
      src.baseline_metric = OptionalPositive(e, ptr, "baseline_metric");
      src.timeout_seconds = OptionalPositive(e, ptr, "timeout_seconds");
      cfg.problem = std::move(src);
    } else {
      throw ConfigError("/problem needs either 'synthetic' or 'external'");
    }

    if (root.contains("modes")) {
      cfg.modes.clear();
      for (const auto& m : root["modes"]) cfg.modes.push_back(ParseMode(As<std::string>(m, "/modes")));
    }
    cfg.budget = As<std::size_t>(root.value("budget", json(50)), "/budget");
    cfg.n_init = As<std::size_t>(root.value("n_init", json(0)), "/n_init");
    if (root.contains("seeds")) {
      const json& s = root["seeds"];
      if (s.is_number_unsigned()) {
        for (std::uint64_t i = 0; i < s.get<std::uint64_t>(); ++i) cfg.seeds.push_back(i);
      } else {
        cfg.seeds = As<std::vector<std::uint64_t>>(s, "/seeds");
      }
    } else {
      cfg.seeds = {0};
    }
    cfg.output_dir = root.value("output_dir", std::string("cbo_out"));
    cfg.threads = As<std::size_t>(root.value("threads", json(0)), "/threads");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  cfg.Validate();
  return cfg;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseRunConfig(ss.str());
}

ProblemSpec MakeProblemSpec(const RunConfig& config) {
  ProblemSpec p;
  if (const auto* s = std::get_if<SyntheticSource>(&config.problem)) {
    const auto& sp = GetSyntheticProblem(s->name);
    p.task = sp.task;
    p.threshold = sp.threshold;
    p.space = sp.space;
  } else {
    const auto& e = std::get<ExternalSource>(config.problem);
    p.task = e.task;
    p.threshold = e.threshold;
    p.space = e.space;
    p.baseline_runtime = e.baseline_runtime;
    p.baseline_metric = e.baseline_metric;
  }
  p.budget = config.budget;
  p.n_init = config.n_init;
  return p;
}

ComparisonRow Summarize(const std::string& problem, const TrialTrace& trace) {
  ComparisonRow row;
  row.problem = SanitizeName(problem);
  row.task = trace.task;
  row.threshold = trace.threshold;
  row.baseline_metric = trace.baseline_metric;
  row.mode = trace.mode;
  row.seed = trace.seed;
  row.incumbent_metric = std::numeric_limits<double>::quiet_NaN();
  row.best_trial_runtime = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : trace.records) row.failed_trials += r.observation.failed ? 1 : 0;
  if (!trace.records.empty()) {
    const auto& last = trace.records.back();
    row.cumulative_runtime = last.cumulative_runtime;
    if (last.best_iteration) {
      row.best_trial_runtime = last.best_runtime;
      row.incumbent_metric = last.best_metric;
      row.feasible = last.best_feasible;
    }
  }
  return row;
}

void WriteTrace(std::ostream& os, const std::string& problem, const TrialTrace& trace) {
  json header;
  header["record"] = "header";
  header["schema"] = kTraceSchema;
  header["schema_version"] =
      std::to_string(kTraceMajorVersion) + "." + std::to_string(kTraceMinorVersion);
  header["problem"] = problem;
  header["mode"] = ToString(trace.mode);
  header["seed"] = trace.seed;
  header["task"] = ToString(trace.task);
  header["threshold"] = trace.threshold;
  header["budget"] = trace.records.size();
  header["baseline_runtime"] = trace.baseline_runtime ? json(*trace.baseline_runtime) : json(nullptr);
  header["baseline_metric"] = trace.baseline_metric ? json(*trace.baseline_metric) : json(nullptr);
  os << header.dump() << '\n';
  for (const auto& r : trace.records) {
    json j = ToJson(r.observation);
    j["record"] = "trial";
    j["kind"] = ToString(r.kind);
    j["acquisition_value"] = r.acquisition_value ? json(*r.acquisition_value) : json(nullptr);
    j["cumulative_runtime"] = r.cumulative_runtime;
    if (r.best_iteration) {
      j["best_iteration"] = *r.best_iteration;
      j["best_runtime"] = std::isfinite(r.best_runtime) ? json(r.best_runtime) : json(nullptr);
      j["best_metric"] = std::isfinite(r.best_metric) ? json(r.best_metric) : json(nullptr);
    } else {
      j["best_iteration"] = nullptr;
      j["best_runtime"] = nullptr;
      j["best_metric"] = nullptr;
    }
    j["best_feasible"] = r.best_feasible;
    if (r.cpu_seconds) j["cpu_seconds"] = *r.cpu_seconds;
    os << j.dump() << '\n';
  }
}

LoadedTrace ReadTrace(std::istream& is) {
  LoadedTrace out;
  std::string line;
  if (!std::getline(is, line)) throw Error("empty trace file");
  const json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object() || header.value("schema", "") != kTraceSchema) {
    throw Error("trace file does not start with a cbo-trace header");
  }
  const std::string version = header.value("schema_version", "");
  const int major = std::atoi(version.substr(0, version.find('.')).c_str());
  if (version.empty() || major != kTraceMajorVersion) {
    throw Error("unsupported trace schema version '" + version + "'");
  }
  auto& h = out.header;
  h.problem = header.value("problem", "");
  h.mode = ParseMode(header.value("mode", ""));
  h.seed = header.value("seed", std::uint64_t{0});
  h.task = ParseTask(header.value("task", "regression"));
  h.threshold = header.value("threshold", 0.0);
  h.budget = header.value("budget", std::size_t{0});
  if (header.contains("baseline_runtime") && header["baseline_runtime"].is_number()) {
    h.baseline_runtime = header["baseline_runtime"].get<double>();
  }
  if (header.contains("baseline_metric") && header["baseline_metric"].is_number()) {
    h.baseline_metric = header["baseline_metric"].get<double>();
  }

  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    try {
      if (j.is_discarded() || !j.is_object() || j.value("record", "") != "trial") {
        throw Error("not a trial record");
      }
      PlotRow row;
      row.iteration = j.at("iteration").get<std::size_t>();
      row.cumulative_runtime = j.at("cumulative_runtime").get<double>();
      if (j.contains("best_metric") && j["best_metric"].is_number()) {
        row.incumbent_metric = j["best_metric"].get<double>();
      }
      row.feasible = j.at("best_feasible").get<bool>();
      out.rows.push_back(row);
    } catch (const std::exception& e) {
      spdlog::warn("skipping malformed trace line {}: {}", line_no, e.what());
      ++out.warnings;
    }
  }
  return out;
}

ExperimentResult RunExperiment(const RunConfig& config) {
  config.Validate();
  const ProblemSpec spec = MakeProblemSpec(config);
  const auto trace_dir = config.output_dir / "traces";
  std::filesystem::create_directories(trace_dir);

  struct Job {
    Mode mode;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Mode m : config.modes) {
    for (std::uint64_t s : config.seeds) jobs.push_back({m, s});
  }
  std::vector<TrialTrace> traces(jobs.size());

  auto run_job = [&](std::size_t i) {
    const Job& job = jobs[i];
    spdlog::info("running {} seed {}", ToString(job.mode), job.seed);
    Evaluator evaluator;
    if (const auto* s = std::get_if<SyntheticSource>(&config.problem)) {
      const SyntheticProblem& problem = GetSyntheticProblem(s->name);
      const double noise = s->noise_scale;
      const std::uint64_t noise_seed = MixSeed(job.seed, kNoiseSalt);
      evaluator = [&problem, noise, noise_seed](const ParamValues& v, std::size_t iteration) {
        return EvaluateSynthetic(problem, v, MixSeed(noise_seed, iteration), noise);
      };
    } else {
      const auto& ext = std::get<ExternalSource>(config.problem);
      auto baseline = std::make_shared<std::optional<double>>(ext.baseline_runtime);
      evaluator = [&ext, baseline](const ParamValues& v, std::size_t) {
        std::optional<double> timeout = ext.timeout_seconds;
        if (!timeout && *baseline) timeout = 10.0 * **baseline;
        EvaluationResult r = EvaluateExternal(ext.command, v, timeout);
        if (!*baseline && r.runtime_seconds > 0.0 && std::isfinite(r.runtime_seconds)) {
          *baseline = r.runtime_seconds;
        }
        return r;
      };
    }
    traces[i] = Run(spec, job.mode, job.seed, evaluator);
  };

  // Wallclock measurements of external trials must not contend with each other.
  std::size_t workers = config.is_external() ? 1 : config.threads;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
          try {
            run_job(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  ExperimentResult result;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto path = trace_dir / (ToString(jobs[i].mode) + "_seed" + std::to_string(jobs[i].seed) + ".jsonl");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    WriteTrace(out, config.name, traces[i]);
    result.trace_files.push_back(path);
    result.rows.push_back(Summarize(config.name, traces[i]));
  }
  result.summary_csv = config.output_dir / "summary.csv";
  result.summary_txt = config.output_dir / "summary.txt";
  {
    std::ofstream csv(result.summary_csv, std::ios::binary);
    WriteSummaryCsv(csv, result.rows);
    std::ofstream txt(result.summary_txt, std::ios::binary);
    txt << RenderSummaryText(result.rows);
  }
  return result;
}

void WriteSummaryCsv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "problem,task,threshold,baseline_metric,mode,seed,best_trial_runtime,"
        "cumulative_runtime,incumbent_metric,feasible,failed_trials\n";
  for (const auto& r : rows) {
    os << r.problem << ',' << ToString(r.task) << ',' << FormatNumber(r.threshold) << ','
       << (r.baseline_metric ? FormatNumber(*r.baseline_metric) : "") << ',' << ToString(r.mode)
       << ',' << r.seed << ',' << FormatNumber(r.best_trial_runtime) << ','
       << FormatNumber(r.cumulative_runtime) << ',' << FormatNumber(r.incumbent_metric) << ','
       << (r.feasible ? 1 : 0) << ',' << r.failed_trials << '\n';
  }
}

std::vector<ComparisonRow> ReadSummaryCsv(std::istream& is) {
  std::vector<ComparisonRow> rows;
  std::string line;
  if (!std::getline(is, line)) return rows;
  if (line.rfind("problem,task,threshold", 0) != 0) throw Error("not a cbo summary file");
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = SplitCsv(line);
    if (cells.size() != 11) {
      throw Error("summary line " + std::to_string(line_no) + ": expected 11 columns");
    }
    try {
      ComparisonRow r;
      r.problem = cells[0];
      r.task = ParseTask(cells[1]);
      r.threshold = ParseDouble(cells[2]);
      if (!cells[3].empty()) r.baseline_metric = ParseDouble(cells[3]);
      r.mode = ParseMode(cells[4]);
      r.seed = std::stoull(cells[5]);
      r.best_trial_runtime = ParseDouble(cells[6]);
      r.cumulative_runtime = ParseDouble(cells[7]);
      r.incumbent_metric = ParseDouble(cells[8]);
      r.feasible = cells[9] == "1";
      r.failed_trials = std::stoull(cells[10]);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error("summary line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::string RenderSummaryText(const std::vector<ComparisonRow>& rows) {
  std::vector<std::vector<std::string>> table{{"problem", "mode", "seed", "best_trial_time",
                                               "cumulative_time", "metric", "constraint"}};
  for (const auto& r : rows) {
    table.push_back({r.problem, ToString(r.mode), std::to_string(r.seed),
                     FormatNumber(r.best_trial_runtime), FormatNumber(r.cumulative_runtime),
                     FormatNumber(r.incumbent_metric), r.feasible ? "met" : "VIOLATED"});
  }
  return RenderTable(table);
}

std::vector<ModeAggregate> Aggregate(const std::vector<ComparisonRow>& rows) {
  std::map<std::pair<std::string, int>, std::vector<const ComparisonRow*>> groups;
  std::vector<std::pair<std::string, int>> order;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.problem, static_cast<int>(r.mode));
    if (!groups.contains(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<ModeAggregate> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    ModeAggregate a;
    a.problem = key.first;
    a.mode = g.front()->mode;
    a.runs = g.size();
    std::vector<double> best, cumulative, metric;
    std::size_t violations = 0;
    for (const auto* r : g) {
      best.push_back(r->best_trial_runtime);
      cumulative.push_back(r->cumulative_runtime);
      metric.push_back(r->incumbent_metric);
      violations += r->feasible ? 0 : 1;
    }
    a.median_best_trial_runtime = Median(best);
    a.median_cumulative_runtime = Median(cumulative);
    a.median_incumbent_metric = Median(metric);
    a.violation_rate = static_cast<double>(violations) / static_cast<double>(g.size());
    out.push_back(a);
  }
  return out;
}

std::string RenderReport(const std::vector<ComparisonRow>& rows) {
  if (rows.empty()) throw Error("no runs in summary");
  std::ostringstream os;
  const auto aggregates = Aggregate(rows);
  std::string current;
  std::vector<std::vector<std::string>> table;
  auto flush = [&] {
    if (!table.empty()) os << RenderTable(table) << '\n';
    table.clear();
  };
  for (const auto& a : aggregates) {
    if (a.problem != current) {
      flush();
      current = a.problem;
      const auto& first = *std::find_if(rows.begin(), rows.end(),
                                        [&](const ComparisonRow& r) { return r.problem == current; });
      const char* metric_name = first.task == Task::kRegression ? "mse" : "acc";
      os << "Problem: " << current << " (" << ToString(first.task) << ", " << metric_name
         << (first.task == Task::kRegression ? " <= " : " >= ") << FormatNumber(first.threshold)
         << ", baseline " << metric_name << " "
         << (first.baseline_metric ? FormatNumber(*first.baseline_metric) : "n/a") << ")\n";
      table.push_back({"mode", "runs", "median_best_time", "median_cumulative_time",
                       std::string("median_") + metric_name, "violation_rate", ""});
    }
    const auto& first = *std::find_if(rows.begin(), rows.end(),
                                      [&](const ComparisonRow& r) { return r.problem == current; });
    const double m = a.median_incumbent_metric;
    const bool median_ok = !std::isnan(m) && RawFeasible(first.task, m, first.threshold);
    std::ostringstream rate;
    rate << std::fixed << std::setprecision(2) << a.violation_rate;
    table.push_back({ToString(a.mode), std::to_string(a.runs),
                     FormatNumber(a.median_best_trial_runtime),
                     FormatNumber(a.median_cumulative_runtime), FormatNumber(m), rate.str(),
                     median_ok ? "" : "[violated]"});
  }
  flush();
  return os.str();
}

}  // namespace cbo
