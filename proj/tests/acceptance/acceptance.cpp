// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbo/acquisition.hpp"
#include "cbo/bench.hpp"
#include "cbo/evaluators.hpp"
#include "cbo/gp.hpp"
#include "cbo/optimizer.hpp"

namespace fs = std::filesystem;
using namespace cbo;
using nlohmann::json;

namespace {

const std::string kData = CBO_TEST_DATA_DIR;
const std::string kFixtures = CBO_FIXTURE_DIR;
const std::string kTool = CBO_TOOL_PATH;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void Require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

fs::path Scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cbo-acceptance-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> ReadJsonl(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

// 1. EI vs Monte Carlo, PoF vs erf, joint = product.
Outcome AnalyticOracles() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr int kSamples = 1'000'000;
  const double means[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  const double sds[] = {0.5, 0.75, 1.0, 1.5, 2.0};
  const double bests[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  int ei_bad = 0;
  double worst_z = 0.0;
  for (double mu : means) {
    for (double sd : sds) {
      for (double fb : bests) {
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < kSamples; ++i) {
          const double imp = std::max(0.0, fb - (mu + sd * normal(rng)));
          sum += imp;
          sum2 += imp * imp;
        }
        const double mean = sum / kSamples;
        const double se = std::sqrt((sum2 / kSamples - mean * mean) / kSamples);
        const double z = std::abs(ExpectedImprovement(mu, sd, fb) - mean) / se;
        worst_z = std::max(worst_z, z);
        if (z > 3.0) ++ei_bad;
      }
    }
  }
  o.Require(ei_bad == 0, std::to_string(ei_bad) + " EI grid points outside 3 SE");

  double pof_err = 0.0;
  for (double m = -6.0; m <= 6.0; m += 0.01) {
    for (double s : {0.05, 0.3, 1.0, 2.5, 7.0}) {
      const double oracle = 0.5 * (1.0 + std::erf((-m / s) / std::sqrt(2.0)));
      pof_err = std::max(pof_err, std::abs(ProbabilityOfFeasibility(m, s) - oracle));
    }
  }
  o.Require(pof_err <= 1e-12, "PoF error");

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<UnitPoint> X;
  std::vector<double> yf, yc;
  for (int i = 0; i < 15; ++i) {
    X.push_back({u(rng), u(rng)});
    yf.push_back(std::sin(4 * X.back()[0]) + X.back()[1]);
    yc.push_back(X.back()[0] - 0.5);
  }
  const GpModel fgp = Fit(X, yf, 1);
  const GpModel cgp = Fit(X, yc, 2);
  double joint_err = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const UnitPoint x{u(rng), u(rng)};
    const double fb = -1.0 + 2.0 * u(rng);
    const auto pf = fgp.Predict(x);
    const auto pc = cgp.Predict(x);
    const double product = ExpectedImprovement(pf.mean, std::sqrt(pf.variance), fb) *
                           ProbabilityOfFeasibility(pc.mean, std::sqrt(pc.variance));
    joint_err = std::max(joint_err,
                         std::abs(JointAcquisition({&fgp, &cgp, fb, AcquisitionMode::kCboJoint}, x) - product));
  }
  o.Require(joint_err <= 1e-12, "joint != EI*PoF");
  const double t = Seconds(start);
  o.Require(t < 30.0, "runtime >= 30 s");
  o.detail << "EI max |z| = " << worst_z << " over 125 points; PoF max err = " << pof_err
           << "; joint max err = " << joint_err << "; " << t << " s";
  return o;
}

// 2. Matérn value, interpolation, LML gradient, non-negative variance.
Outcome GpCorrectness() {
  Outcome o;
  const auto start = Clock::now();
  const KernelParams unit{1.7, {0.25}, 1e-3};
  const double k = KernelMatern52(std::vector{0.5}, std::vector{0.75}, unit);
  const double expect = 1.7 * (1.0 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0));
  o.Require(std::abs(k - expect) <= 1e-12, "Matérn value");

  std::vector<UnitPoint> X;
  std::vector<double> y;
  for (int i = 0; i < 8; ++i) {
    X.push_back({i / 7.0});
    y.push_back(std::sin(2 * M_PI * i / 7.0));
  }
  const GpModel m = Fit(X, y, 0);
  double interp = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    interp = std::max(interp, std::abs(m.Predict(X[i]).mean - y[i]) / m.y_std());
  }
  o.Require(interp <= 1e-6, "interpolation");

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<UnitPoint> X3;
  std::vector<double> y3;
  for (int i = 0; i < 20; ++i) {
    X3.push_back({u(rng), u(rng), u(rng)});
    y3.push_back(std::cos(3 * X3.back()[0]) + X3.back()[1] * X3.back()[2]);
  }
  double grad_rel = 0.0;
  for (const KernelParams& p : {KernelParams{0.8, {0.3, 0.5, 1.2}, 1e-3}, KernelParams{2.0, {1.0, 0.2, 0.6}, 0.05}}) {
    const auto g = LogMarginalLikelihoodWithGradient(X3, y3, p);
    const Eigen::VectorXd theta = p.ToLog();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double h = 1e-5;
      Eigen::VectorXd a = theta, b = theta;
      a(i) += h;
      b(i) -= h;
      const double fd = (LogMarginalLikelihood(X3, y3, KernelParams::FromLog(a)) -
                         LogMarginalLikelihood(X3, y3, KernelParams::FromLog(b))) / (2 * h);
      grad_rel = std::max(grad_rel, std::abs(fd - g.gradient(i)) / std::max(1.0, std::abs(fd)));
    }
  }
  o.Require(grad_rel <= 1e-4, "LML gradient");

  const GpModel m3 = Fit(X3, y3, 5);
  int negative = 0;
  for (int i = 0; i < 10000; ++i) {
    if (m3.Predict(UnitPoint{u(rng), u(rng), u(rng)}).variance < 0.0) ++negative;
  }
  o.Require(negative == 0, "negative variance");
  const double t = Seconds(start);
  o.Require(t < 60.0, "runtime >= 60 s");
  o.detail << "kernel err = " << std::abs(k - expect) << "; interpolation err = " << interp
           << "; LML grad rel err = " << grad_rel << "; negative variances = " << negative << "; "
           << t << " s";
  return o;
}

// 3. Constraint sign vs the raw comparison, and τ_b parity.
Outcome TransformConsistency() {
  Outcome o;
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> expo(-3.0, 3.0);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const double c0 = std::pow(10.0, expo(rng));
    const double m = std::pow(10.0, expo(rng));
    for (Task t : {Task::kRegression, Task::kClassification}) {
      if ((TransformConstraint(t, m, c0).y_c <= 0.0) != RawFeasible(t, m, c0)) ++mismatches;
    }
  }
  o.Require(mismatches == 0, "sign mismatch");
  int parity = 0;
  for (int i = 0; i < 1000; ++i) {
    const double tb = std::pow(10.0, expo(rng));
    if (TransformObjective(tb, tb) != 0.0) ++parity;
  }
  o.Require(parity == 0, "transform_objective(tb, tb) != 0");
  o.detail << "20000 sign checks, " << mismatches << " mismatches; parity failures = " << parity;
  return o;
}

// 4. Penalty leaves feasible points untouched and grows with violation.
Outcome PenaltyContract() {
  Outcome o;
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> w(0.0, 10.0);
  int changed = 0, not_increasing = 0;
  for (int i = 0; i < 10000; ++i) {
    const double yf = u(rng);
    const double weight = w(rng);
    const double yc_feasible = -std::abs(u(rng));
    if (PenalizedObjective(yf, yc_feasible, weight) != yf) ++changed;
    const double a = std::abs(u(rng)) + 1e-3;
    const double b = a + 1e-3 + std::abs(u(rng));
    const double wp = weight + 0.1;
    if (!(PenalizedObjective(yf, b, wp) > PenalizedObjective(yf, a, wp))) ++not_increasing;
  }
  o.Require(changed == 0, "feasible input changed");
  o.Require(not_increasing == 0, "not strictly increasing");
  o.detail << "10000 feasible inputs unchanged: " << (changed == 0)
           << "; 10000 infeasible pairs strictly increasing: " << (not_increasing == 0);
  return o;
}

RunConfig SyntheticConfig(const std::string& problem, const fs::path& out, std::size_t seeds,
                          std::size_t budget) {
  RunConfig cfg;
  cfg.name = problem;
  cfg.problem = SyntheticSource{problem, 0.01};
  cfg.budget = budget;
  for (std::uint64_t s = 0; s < seeds; ++s) cfg.seeds.push_back(s);
  cfg.output_dir = out;
  return cfg;
}

// 5. gardner1 at desk scale: feasibility, optimality gap, CBO vs penalized BO.
Outcome EndToEnd() {
  Outcome o;
  const auto start = Clock::now();
  const json fixture = json::parse(ReadFile(fs::path(kFixtures) / "synthetic_optima.json"));
  const auto& problem = GetSyntheticProblem("gardner1");
  const double optimum = fixture["gardner1"]["objective"].get<double>();
  const auto grid = GridSearchOptimum(problem, fixture["gardner1"]["resolution"].get<std::size_t>());
  o.Require(std::abs(grid.objective - optimum) <= 1e-9, "C++ grid optimum disagrees with fixture");

  const auto dir = Scratch("e2e");
  const auto result = RunExperiment(SyntheticConfig("gardner1", dir, 20, 50));

  std::size_t cbo_feasible = 0, cbo_close = 0, cbo_runs = 0;
  std::size_t cbo_violations = 0, pen_violations = 0, pen_runs = 0;
  for (const auto& path : result.trace_files) {
    const auto lines = ReadJsonl(path);
    const auto& header = lines.front();
    const auto& last = lines.back();
    const bool feasible = last["best_feasible"].get<bool>();
    if (header["mode"] == "cbo") {
      ++cbo_runs;
      cbo_violations += feasible ? 0 : 1;
      if (feasible) {
        ++cbo_feasible;
        const auto it = last["best_iteration"];
        const auto& best = *std::find_if(lines.begin() + 1, lines.end(),
                                         [&](const json& r) { return r["iteration"] == it; });
        const std::vector<double> x{best["params"]["x"].get<double>(), best["params"]["y"].get<double>()};
        const double f = problem.objective(x);
        if (std::abs(f - optimum) <= 0.05 * std::abs(optimum)) ++cbo_close;
      }
    } else {
      ++pen_runs;
      pen_violations += feasible ? 0 : 1;
    }
  }
  const double feasible_rate = static_cast<double>(cbo_feasible) / cbo_runs;
  const double close_rate = static_cast<double>(cbo_close) / cbo_runs;
  const double cbo_vr = static_cast<double>(cbo_violations) / cbo_runs;
  const double pen_vr = static_cast<double>(pen_violations) / pen_runs;
  o.Require(cbo_runs == 20 && pen_runs == 20, "run count");
  o.Require(feasible_rate >= 0.95, "(a) CBO feasible rate < 95%");
  o.Require(close_rate >= 0.80, "(b) CBO within 5% of optimum < 80%");
  o.Require(cbo_vr <= pen_vr, "(c) CBO violation rate > penalized BO");

  // Same comparison on the other bundled problem, whose unconstrained optimum is infeasible.
  const auto dir2 = Scratch("e2e-tradeoff");
  const auto tradeoff = RunExperiment(SyntheticConfig("energy_tradeoff", dir2, 20, 50));
  double cbo_vr2 = 0.0, pen_vr2 = 0.0;
  for (const auto& agg : Aggregate(tradeoff.rows)) {
    (agg.mode == Mode::kCbo ? cbo_vr2 : pen_vr2) = agg.violation_rate;
  }
  o.Require(cbo_vr2 <= pen_vr2, "(c) energy_tradeoff: CBO violation rate > penalized BO");

  const double t = Seconds(start);
  o.Require(t < 600.0, "runtime >= 10 min");
  o.detail << "gardner1: CBO feasible " << feasible_rate * 100 << "%, within 5% of " << optimum << " in "
           << close_rate * 100 << "%, violation rate CBO " << cbo_vr << " vs penalized " << pen_vr
           << "; energy_tradeoff violation rate CBO " << cbo_vr2 << " vs penalized " << pen_vr2 << "; "
           << t << " s";
  fs::remove_all(dir);
  fs::remove_all(dir2);
  return o;
}

// 6. NaN metrics and nonzero exits never abort a run.
Outcome Robustness() {
  Outcome o;
  const auto dir = Scratch("robust");
  RunConfig cfg;
  cfg.name = "flaky";
  ExternalSource ext;
  ext.command = "python3 " + kData + "/echo_param.py {params_file}";
  ext.space = SearchSpace({ParamSpec::Continuous("x", 0.0, 6.0).WithDefault(1.0),
                           ParamSpec::Continuous("y", 0.0, 1.0).WithDefault(0.5)});
  ext.task = Task::kRegression;
  ext.threshold = 3.0;
  cfg.problem = ext;
  cfg.budget = 16;
  cfg.seeds = {0};
  cfg.output_dir = dir;
  const auto result = RunExperiment(cfg);
  std::size_t nan_failures = 0, exit_failures = 0, total_records = 0, runs = 0;
  for (const auto& path : result.trace_files) {
    const auto lines = ReadJsonl(path);
    ++runs;
    total_records += lines.size() - 1;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (!lines[i]["failed"].get<bool>()) continue;
      const auto diag = lines[i]["diagnostic"].get<std::string>();
      if (diag.find("non-finite metric") != std::string::npos) ++nan_failures;
      if (diag.find("status 1") != std::string::npos) ++exit_failures;
    }
  }
  o.Require(runs == 2 && total_records == 2 * cfg.budget, "runs did not reach budget");
  o.Require(nan_failures > 0, "no NaN trial recorded");
  o.Require(exit_failures > 0, "no nonzero-exit trial recorded");
  o.detail << runs << " runs reached budget " << cfg.budget << "; NaN failures recorded = " << nan_failures
           << ", nonzero-exit failures recorded = " << exit_failures;
  fs::remove_all(dir);
  return o;
}

// 7. Two CLI runs with the same config write byte-identical traces.
Outcome Determinism() {
  Outcome o;
  const auto dir = Scratch("determinism");
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({"problem": {"synthetic": "gardner1"}, "modes": ["cbo", "penalized_bo"],
               "budget": 20, "seeds": [0, 1, 2]})";
  }
  for (const char* run : {"a", "b"}) {
    const std::string cmd = kTool + " run " + (dir / "config.json").string() + " --out " +
                            (dir / run).string() + " > /dev/null";
    o.Require(std::system(cmd.c_str()) == 0, std::string("cli run ") + run);
  }
  std::size_t compared = 0, identical = 0;
  for (const auto& e : fs::directory_iterator(dir / "a" / "traces")) {
    ++compared;
    const auto other = dir / "b" / "traces" / e.path().filename();
    if (fs::exists(other) && ReadFile(e.path()) == ReadFile(other)) ++identical;
  }
  o.Require(compared == 6 && identical == compared, "traces differ");
  o.detail << identical << "/" << compared << " trace files byte-identical";
  fs::remove_all(dir);
  return o;
}

// 8. Sleep-timed mock evaluator and the reported-runtime override.
Outcome ExternalProtocol() {
  Outcome o;
  const auto timed = EvaluateExternal("sh " + kData + "/sleep_then_report.sh {params_file}", {{"x", 1.0}});
  o.Require(timed.ok(), "timed status");
  o.Require(timed.runtime_seconds >= 0.2 && timed.runtime_seconds <= 0.3, "timed runtime outside [0.2, 0.3]");
  o.Require(!timed.runtime_reported, "timed runtime should be measured");
  const auto reported = EvaluateExternal("sh " + kData + "/reported_runtime.sh {params_file}", {{"x", 1.0}});
  o.Require(reported.ok() && reported.runtime_reported && reported.runtime_seconds == 3.25,
            "reported runtime override");
  o.detail << "measured " << timed.runtime_seconds << " s for a 0.2 s sleep; override gave "
           << reported.runtime_seconds << " s";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"1 analytic oracles (EI/PoF/joint)", AnalyticOracles},
      {"2 GP correctness", GpCorrectness},
      {"3 transform consistency", TransformConsistency},
      {"4 quadratic penalty contract", PenaltyContract},
      {"5 end-to-end synthetic benchmark", EndToEnd},
      {"6 robustness to failed trials", Robustness},
      {"7 determinism of CLI traces", Determinism},
      {"8 external protocol round trip", ExternalProtocol},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.name << ": " << o.detail.str() << std::endl;
  }
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criterion(s) failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
