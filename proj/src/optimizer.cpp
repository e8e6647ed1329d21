#include "cbo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "cbo/error.hpp"

namespace cbo {
namespace {

constexpr std::uint64_t kDesignSalt = 0x5eed'de51'90a1'0001ULL;
constexpr std::uint64_t kObjectiveFitSalt = 0x0b1e'c71e'0000'0002ULL;
constexpr std::uint64_t kConstraintFitSalt = 0xc0a5'7a11'0000'0003ULL;
constexpr std::uint64_t kAcquisitionSalt = 0xacc0'0000'0000'0004ULL;
constexpr double kMetricClamp = 1e-12;

}  // namespace

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string ToString(Mode mode) { return mode == Mode::kCbo ? "cbo" : "penalized_bo"; }

Mode ParseMode(const std::string& text) {
  if (text == "cbo") return Mode::kCbo;
  if (text == "penalized_bo") return Mode::kPenalizedBo;
  throw InvalidArgument("unknown mode '" + text + "' (expected cbo or penalized_bo)");
}

std::string ToString(Task task) {
  return task == Task::kRegression ? "regression" : "classification";
}

Task ParseTask(const std::string& text) {
  if (text == "regression") return Task::kRegression;
  if (text == "classification") return Task::kClassification;
  throw InvalidArgument("unknown task '" + text + "' (expected regression or classification)");
}

std::string ToString(ProposalKind kind) {
  switch (kind) {
    case ProposalKind::kDefault: return "default";
    case ProposalKind::kDesign: return "design";
    case ProposalKind::kModel: return "model";
    case ProposalKind::kFallback: return "fallback";
  }
  return "unknown";
}

std::size_t ProblemSpec::InitialDesignSize() const {
  return n_init != 0 ? n_init : std::max<std::size_t>(4, 2 * space.dim());
}

void ProblemSpec::Validate() const {
  if (!(std::isfinite(threshold) && threshold > 0.0)) {
    throw InvalidArgument("threshold must be a positive number");
  }
  if (baseline_runtime && !(std::isfinite(*baseline_runtime) && *baseline_runtime > 0.0)) {
    throw InvalidArgument("baseline runtime must be positive");
  }
  if (space.dim() == 0) throw InvalidArgument("search space is empty");
  const std::size_t init = InitialDesignSize();
  if (init < 2) throw InvalidArgument("n_init must be >= 2");
  if (budget < init) throw InvalidArgument("budget must be >= n_init");
}

double TransformObjective(double raw_runtime, double baseline_runtime) {
  if (!(raw_runtime > 0.0) || !std::isfinite(raw_runtime)) {
    throw InvalidArgument("runtime must be positive and finite");
  }
  if (!(baseline_runtime > 0.0) || !std::isfinite(baseline_runtime)) {
    throw InvalidArgument("baseline runtime must be positive and finite");
  }
  return std::log(raw_runtime) - std::log(baseline_runtime);
}

bool RawFeasible(Task task, double raw_metric, double threshold) {
  return task == Task::kRegression ? raw_metric <= threshold : raw_metric >= threshold;
}

ConstraintValue TransformConstraint(Task task, double raw_metric, double threshold) {
  if (!(threshold > 0.0) || !std::isfinite(threshold)) {
    throw InvalidArgument("threshold must be positive and finite");
  }
  if (std::isnan(raw_metric)) return {std::numeric_limits<double>::quiet_NaN(), false};
  ConstraintValue out;
  double m = raw_metric;
  if (m <= 0.0) {
    m = kMetricClamp;
    out.clamped = true;
  }
  out.y_c = task == Task::kRegression ? std::log(m) - std::log(threshold)
                                      : std::log(threshold) - std::log(m);
  // Adjacent metrics can share a rounded log; keep the sign on the raw test's side.
  const bool feasible = RawFeasible(task, raw_metric, threshold);
  if (feasible && out.y_c > 0.0) out.y_c = 0.0;
  if (!feasible && out.y_c <= 0.0) out.y_c = std::numeric_limits<double>::denorm_min();
  return out;
}

Optimizer::Optimizer(ProblemSpec problem, Mode mode, std::uint64_t seed) {
  problem.Validate();
  state_.problem = std::move(problem);
  state_.mode = mode;
  state_.seed = seed;
  state_.baseline_runtime = state_.problem.baseline_runtime;
  state_.baseline_metric = state_.problem.baseline_metric;
  design_ = DesignPoints();
}

Optimizer::Optimizer(OptimizerState state) : state_(std::move(state)) {
  state_.problem.Validate();
  design_ = DesignPoints();
  UpdateIncumbent();
}

std::vector<UnitPoint> Optimizer::DesignPoints() const {
  // One sequence serves both the initial design and model-failure fallbacks.
  return SampleUnitCube(state_.problem.space.dim(), std::max<std::size_t>(state_.problem.budget, 1),
                        MixSeed(state_.seed, kDesignSalt));
}

Proposal Optimizer::Ask() const {
  if (Done()) throw InvalidArgument("evaluation budget is exhausted");
  const std::size_t t = state_.observations.size();
  const auto& space = state_.problem.space;
  if (t == 0) {
    Proposal p;
    p.values = space.DefaultConfig();
    p.x = space.Encode(p.values);
    p.kind = ProposalKind::kDefault;
    return p;
  }
  if (t < state_.problem.InitialDesignSize()) {
    Proposal p;
    p.values = space.Decode(design_[t - 1]);
    p.x = space.Encode(p.values);
    p.kind = ProposalKind::kDesign;
    return p;
  }
  try {
    return ModelProposal(t);
  } catch (const Error& e) {
    spdlog::warn("iteration {}: {}; using a low-discrepancy point instead", t, e.what());
    Proposal p;
    p.values = space.Decode(design_[t - 1]);
    p.x = space.Encode(p.values);
    p.kind = ProposalKind::kFallback;
    p.note = e.what();
    return p;
  }
}

AcquisitionContext Surrogates::Context() const {
  AcquisitionContext ctx;
  ctx.mode = mode;
  ctx.objective_model = objective ? &*objective : nullptr;
  ctx.constraint_model = constraint ? &*constraint : nullptr;
  ctx.f_best = f_best;
  return ctx;
}

TrainingData Optimizer::ObjectiveTrainingData() const {
  TrainingData out;
  if (state_.mode == Mode::kCbo) {
    for (const auto& o : state_.observations) {
      if (o.failed) continue;
      out.X.push_back(o.x);
      out.y.push_back(o.y_f);
    }
    return out;
  }
  const double w = PenaltyWeight();
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& o : state_.observations) {
    if (!o.failed) worst = std::max(worst, PenalizedObjective(o.y_f, o.y_c, w));
  }
  for (const auto& o : state_.observations) {
    if (o.failed && !std::isfinite(worst)) continue;
    out.X.push_back(o.x);
    out.y.push_back(o.failed ? worst + 1.0 : PenalizedObjective(o.y_f, o.y_c, w));
  }
  return out;
}

std::optional<TrainingData> Optimizer::ConstraintTrainingData() const {
  if (state_.mode != Mode::kCbo) return std::nullopt;
  TrainingData out;
  for (const auto& o : state_.observations) {
    if (o.failed) continue;
    out.X.push_back(o.x);
    out.y.push_back(o.y_c);
  }
  return out;
}

Surrogates Optimizer::FitSurrogates() const {
  const std::size_t t = state_.observations.size();
  const auto objective = ObjectiveTrainingData();
  Surrogates s;
  s.objective = Fit(objective.X, objective.y, MixSeed(MixSeed(state_.seed, kObjectiveFitSalt), t));
  if (state_.mode == Mode::kCbo) {
    const auto constraint = *ConstraintTrainingData();
    s.constraint = Fit(constraint.X, constraint.y, MixSeed(MixSeed(state_.seed, kConstraintFitSalt), t));
    s.mode = AcquisitionMode::kCboJoint;
    if (const Observation* inc = Incumbent()) s.f_best = inc->y_f;
  } else {
    const double w = PenaltyWeight();
    for (const auto& o : state_.observations) {
      if (o.failed) continue;
      const double v = PenalizedObjective(o.y_f, o.y_c, w);
      if (!s.f_best || v < *s.f_best) s.f_best = v;
    }
    if (!s.f_best) throw FitError("no successful observations to model");
    s.mode = AcquisitionMode::kPenalizedEi;
  }
  return s;
}

Proposal Optimizer::ModelProposal(std::size_t iteration) const {
  const Surrogates s = FitSurrogates();
  const AcquisitionContext ctx = s.Context();
  const UnitPoint u = MaximizeAcquisition(
      ctx, state_.problem.space.dim(), MixSeed(MixSeed(state_.seed, kAcquisitionSalt), iteration));
  Proposal p;
  p.values = state_.problem.space.Decode(u);
  p.x = state_.problem.space.Encode(p.values);
  p.kind = ProposalKind::kModel;
  p.acquisition_value = JointAcquisition(ctx, u);
  return p;
}

void Optimizer::Tell(const ParamValues& values, const EvaluationResult& result) {
  if (Done()) throw InvalidArgument("evaluation budget is exhausted");
  Observation o;
  o.iteration = state_.observations.size();
  o.x = state_.problem.space.Encode(values);
  o.values = values;
  o.raw_runtime = result.runtime_seconds;
  o.raw_metric = result.metric;
  o.diagnostic = result.diagnostic;
  o.failed = !result.ok();

  const bool runtime_ok = std::isfinite(o.raw_runtime) && o.raw_runtime > 0.0;
  if (!runtime_ok && !o.failed) {
    o.failed = true;
    o.diagnostic = "non-positive or non-finite runtime";
  }
  if (runtime_ok && !state_.baseline_runtime) state_.baseline_runtime = o.raw_runtime;
  if (o.iteration == 0 && !state_.baseline_metric && std::isfinite(o.raw_metric)) {
    state_.baseline_metric = o.raw_metric;
  }

  o.y_f = runtime_ok ? TransformObjective(o.raw_runtime, *state_.baseline_runtime)
                     : std::numeric_limits<double>::quiet_NaN();
  const ConstraintValue c =
      TransformConstraint(state_.problem.task, o.raw_metric, state_.problem.threshold);
  o.y_c = c.y_c;
  o.metric_clamped = c.clamped;
  if (std::isnan(o.y_c) && !o.failed) {
    o.failed = true;
    o.diagnostic = "metric is NaN";
  }
  if (o.failed && o.diagnostic.empty()) o.diagnostic = "evaluation failed";
  if (o.failed) spdlog::info("iteration {} failed: {}", o.iteration, o.diagnostic);

  state_.observations.push_back(std::move(o));
  UpdateIncumbent();
}

void Optimizer::UpdateIncumbent() {
  state_.incumbent.reset();
  for (std::size_t i = 0; i < state_.observations.size(); ++i) {
    const auto& o = state_.observations[i];
    if (!o.feasible()) continue;
    if (!state_.incumbent || o.y_f < state_.observations[*state_.incumbent].y_f) {
      state_.incumbent = i;
    }
  }
}

const Observation* Optimizer::Incumbent() const {
  return state_.incumbent ? &state_.observations[*state_.incumbent] : nullptr;
}

double Optimizer::PenaltyWeight() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& o : state_.observations) {
    if (o.failed) continue;
    lo = std::min(lo, o.y_f);
    hi = std::max(hi, o.y_f);
  }
  return hi > lo ? std::max(1.0, hi - lo) : 1.0;
}

std::optional<Recommendation> Optimizer::Recommend() const {
  const auto& obs = state_.observations;
  std::optional<std::size_t> pick;
  if (state_.mode == Mode::kCbo) {
    pick = state_.incumbent;
    if (!pick) {
      // Nothing feasible yet: report the least-violating point.
      for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!obs[i].failed && (!pick || obs[i].y_c < obs[*pick].y_c)) pick = i;
      }
    }
  } else {
    const double w = PenaltyWeight();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (obs[i].failed) continue;
      const double v = PenalizedObjective(obs[i].y_f, obs[i].y_c, w);
      if (!pick || v < best) {
        pick = i;
        best = v;
      }
    }
  }
  if (!pick) return std::nullopt;
  return Recommendation{*pick, obs[*pick].feasible()};
}

TrialTrace Run(const ProblemSpec& problem, Mode mode, std::uint64_t seed,
               const Evaluator& evaluator) {
  Optimizer opt(problem, mode, seed);
  TrialTrace trace;
  trace.mode = mode;
  trace.seed = seed;
  trace.task = problem.task;
  trace.threshold = problem.threshold;
  double cumulative = 0.0;
  while (!opt.Done()) {
    const std::size_t t = opt.state().observations.size();
    const Proposal p = opt.Ask();
    EvaluationResult r;
    try {
      r = evaluator(p.values, t);
    } catch (const std::exception& e) {
      r = EvaluationResult::Failed(std::string("evaluator threw: ") + e.what());
    }
    opt.Tell(p.values, r);

    TraceRecord rec;
    rec.observation = opt.state().observations.back();
    rec.kind = p.kind;
    rec.acquisition_value = p.acquisition_value;
    rec.cpu_seconds = r.cpu_seconds;
    if (std::isfinite(rec.observation.raw_runtime) && rec.observation.raw_runtime > 0.0) {
      cumulative += rec.observation.raw_runtime;
    }
    rec.cumulative_runtime = cumulative;
    if (auto best = opt.Recommend()) {
      const auto& b = opt.state().observations[best->index];
      rec.best_iteration = b.iteration;
      rec.best_runtime = b.raw_runtime;
      rec.best_metric = b.raw_metric;
      rec.best_feasible = best->feasible;
    }
    trace.records.push_back(std::move(rec));
  }
  trace.baseline_runtime = opt.state().baseline_runtime;
  trace.baseline_metric = opt.state().baseline_metric;
  return trace;
}

}  // namespace cbo
