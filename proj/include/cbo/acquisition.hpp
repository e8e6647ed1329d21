#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "cbo/gp.hpp"

namespace cbo {

enum class AcquisitionMode {
  /// EI on the objective GP times PoF on the constraint GP.
  kCboJoint,
  /// EI on a single GP fitted to penalized objective values.
  kPenalizedEi,
};

/// Everything an acquisition needs at one iteration. The models are borrowed.
struct AcquisitionContext {
  const GpModel* objective_model = nullptr;
  const GpModel* constraint_model = nullptr;
  /// Best feasible transformed objective (CBO) or best penalized value.
  std::optional<double> f_best;
  AcquisitionMode mode = AcquisitionMode::kCboJoint;

  void Validate() const;
};

/// Acquisition values below this are flushed to zero.
inline constexpr double kAcquisitionFlush = 1e-300;

double StandardNormalPdf(double z);
double StandardNormalCdf(double z);

/// Minimization EI: (f_best − μ)Φ(z) + σφ(z), z = (f_best − μ)/σ.
/// With σ = 0 this is max(0, f_best − μ).
double ExpectedImprovement(double mean, double stddev, double f_best);

/// P(c(x) ≤ 0) = Φ(−μ_c/σ_c); a step function when σ_c = 0.
double ProbabilityOfFeasibility(double mean_c, double stddev_c);

/// f + w·max(0, c)², with w = 1/(2ρ).
double PenalizedObjective(double y_f, double y_c, double inv_two_rho);

/// Value of the context's acquisition at x. Before any feasible point exists,
/// CBO falls back to PoF alone.
double JointAcquisition(const AcquisitionContext& ctx, std::span<const double> x);

struct MaximizeOptions {
  std::size_t candidates = 1024;
  std::size_t local_starts = 5;
  int local_steps = 100;
  double initial_step = 0.1;
  double min_step = 1e-6;
};

using AcquisitionFn = std::function<double(std::span<const double>)>;

/// Scores `candidates` seeded Sobol' points, polishes the best `local_starts`
/// with a shrinking compass search, and returns the overall argmax. Ties go to
/// the lowest candidate index. Throws AcquisitionError if every candidate is
/// non-finite.
UnitPoint MaximizeAcquisition(const AcquisitionFn& fn, std::size_t dim, std::uint64_t seed,
                              const MaximizeOptions& options = {});
UnitPoint MaximizeAcquisition(const AcquisitionContext& ctx, std::size_t dim,
                              std::uint64_t seed, const MaximizeOptions& options = {});

}  // namespace cbo
