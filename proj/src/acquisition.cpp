#include "cbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cbo/error.hpp"

namespace cbo {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void RequireFinite(std::initializer_list<double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + ": non-finite input");
  }
}

double Flush(double v) { return v < kAcquisitionFlush ? 0.0 : v; }

struct Scored {
  UnitPoint x;
  double value;
};

// Compass search with a halving step; only strict improvements are accepted.
Scored Polish(const AcquisitionFn& fn, Scored start, const MaximizeOptions& opt) {
  double step = opt.initial_step;
  for (int it = 0; it < opt.local_steps && step >= opt.min_step; ++it) {
    bool improved = false;
    for (std::size_t d = 0; d < start.x.size() && !improved; ++d) {
      for (double sign : {1.0, -1.0}) {
        UnitPoint trial = start.x;
        trial[d] = std::clamp(trial[d] + sign * step, 0.0, 1.0);
        if (trial[d] == start.x[d]) continue;
        const double v = fn(trial);
        if (std::isfinite(v) && v > start.value) {
          start = {std::move(trial), v};
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return start;
}

}  // namespace

void AcquisitionContext::Validate() const {
  if (objective_model == nullptr && mode == AcquisitionMode::kPenalizedEi) {
    throw InvalidArgument("penalized EI needs an objective model");
  }
  if (mode == AcquisitionMode::kCboJoint && constraint_model == nullptr) {
    throw InvalidArgument("joint acquisition needs a constraint model");
  }
  if (mode == AcquisitionMode::kCboJoint && f_best && objective_model == nullptr) {
    throw InvalidArgument("joint acquisition with an incumbent needs an objective model");
  }
  if (mode == AcquisitionMode::kPenalizedEi && !f_best) {
    throw InvalidArgument("penalized EI needs at least one observation");
  }
}

double StandardNormalPdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double StandardNormalCdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double ExpectedImprovement(double mean, double stddev, double f_best) {
  RequireFinite({mean, stddev, f_best}, "expected improvement");
  if (stddev < 0.0) throw InvalidArgument("expected improvement: negative stddev");
  const double gap = f_best - mean;
  if (stddev == 0.0) return Flush(std::max(0.0, gap));
  const double z = gap / stddev;
  const double ei = gap * StandardNormalCdf(z) + stddev * StandardNormalPdf(z);
  return Flush(std::max(0.0, ei));
}

double ProbabilityOfFeasibility(double mean_c, double stddev_c) {
  RequireFinite({mean_c, stddev_c}, "probability of feasibility");
  if (stddev_c < 0.0) throw InvalidArgument("probability of feasibility: negative stddev");
  if (stddev_c == 0.0) return mean_c <= 0.0 ? 1.0 : 0.0;
  return Flush(StandardNormalCdf(-mean_c / stddev_c));
}

double PenalizedObjective(double y_f, double y_c, double inv_two_rho) {
  RequireFinite({y_f, y_c, inv_two_rho}, "penalized objective");
  if (inv_two_rho < 0.0) throw InvalidArgument("penalty weight must be non-negative");
  const double violation = std::max(0.0, y_c);
  return y_f + inv_two_rho * violation * violation;
}

double JointAcquisition(const AcquisitionContext& ctx, std::span<const double> x) {
  ctx.Validate();
  if (ctx.mode == AcquisitionMode::kPenalizedEi) {
    const Prediction p = ctx.objective_model->Predict(x);
    return ExpectedImprovement(p.mean, std::sqrt(p.variance), *ctx.f_best);
  }
  const Prediction c = ctx.constraint_model->Predict(x);
  const double pof = ProbabilityOfFeasibility(c.mean, std::sqrt(c.variance));
  if (!ctx.f_best) return pof;
  if (pof == 0.0) return 0.0;
  const Prediction f = ctx.objective_model->Predict(x);
  return Flush(ExpectedImprovement(f.mean, std::sqrt(f.variance), *ctx.f_best) * pof);
}

UnitPoint MaximizeAcquisition(const AcquisitionFn& fn, std::size_t dim, std::uint64_t seed,
                              const MaximizeOptions& options) {
  const auto points = SampleUnitCube(dim, std::max<std::size_t>(options.candidates, 1), seed);
  std::vector<double> values(points.size());
  std::transform(points.begin(), points.end(), values.begin(), fn);

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isfinite(values[i])) order.push_back(i);
  }
  if (order.empty()) throw AcquisitionError("acquisition is non-finite at every candidate");
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(std::min(order.size(), std::max<std::size_t>(options.local_starts, 1)));
  // Starts are polished in candidate-index order so ties resolve to the lowest index.
  std::sort(order.begin(), order.end());

  std::optional<Scored> best;
  for (std::size_t idx : order) {
    Scored s = Polish(fn, {points[idx], values[idx]}, options);
    if (!best || s.value > best->value) best = std::move(s);
  }
  return best->x;
}

UnitPoint MaximizeAcquisition(const AcquisitionContext& ctx, std::size_t dim,
                              std::uint64_t seed, const MaximizeOptions& options) {
  ctx.Validate();
  return MaximizeAcquisition(
      [&ctx](std::span<const double> x) { return JointAcquisition(ctx, x); }, dim, seed,
      options);
}

}  // namespace cbo
