#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cbo/search_space.hpp"

namespace cbo {

/// Hyperparameters of an ARD Matérn 5/2 kernel plus Gaussian observation noise.
struct KernelParams {
  static constexpr double kNoiseFloor = 1e-8;

  double signal_variance = 1.0;
  std::vector<double> lengthscales;
  double noise_variance = 1e-2;

  /// Throws InvalidArgument unless every entry is finite and positive and the
  /// noise respects the floor.
  void Validate() const;

  /// [log σ², log ℓ_1, ..., log ℓ_d, log σ_n²]
  Eigen::VectorXd ToLog() const;
  static KernelParams FromLog(const Eigen::VectorXd& log_params);
};

/// k(r) = σ²(1 + √5 r + 5r²/3) exp(−√5 r), r the lengthscale-scaled distance.
double KernelMatern52(std::span<const double> x1, std::span<const double> x2,
                      const KernelParams& params);

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Value and gradient of the log evidence with respect to KernelParams::ToLog().
struct LmlWithGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// Gaussian log evidence −½yᵀα − Σ log L_ii − (n/2) log 2π. The targets are
/// used as given; Fit standardizes before calling this. Throws FitError when
/// the kernel matrix stays indefinite after jitter escalation.
double LogMarginalLikelihood(const std::vector<UnitPoint>& X, std::span<const double> y,
                             const KernelParams& params);
LmlWithGradient LogMarginalLikelihoodWithGradient(const std::vector<UnitPoint>& X,
                                                  std::span<const double> y,
                                                  const KernelParams& params);

struct FitOptions {
  int restarts = 8;
  int max_iterations = 200;
};

/// Zero-mean GP posterior on standardized targets. Immutable once built.
class GpModel {
 public:
  /// Posterior for fixed hyperparameters (no fitting).
  static GpModel Condition(const std::vector<UnitPoint>& X, std::span<const double> y,
                           const KernelParams& params);

  /// Predictive mean and variance of a noisy observation at x, in raw target
  /// units. The variance is clamped at zero.
  Prediction Predict(std::span<const double> x) const;

  const KernelParams& params() const { return params_; }
  const Eigen::MatrixXd& inputs() const { return X_; }
  const Eigen::VectorXd& targets() const { return y_raw_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  double y_mean() const { return y_mean_; }
  double y_std() const { return y_std_; }
  /// Diagonal jitter added on top of the noise to make the factorization succeed.
  double jitter() const { return jitter_; }
  std::size_t dim() const { return static_cast<std::size_t>(X_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(X_.rows()); }

  /// Standardized-scale kernel matrix K + (σ_n² + jitter)I that chol factors.
  Eigen::MatrixXd JitteredKernel() const;

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_raw_;
  double y_mean_ = 0.0;
  double y_std_ = 1.0;
  KernelParams params_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

/// Maximizes the log evidence over log-hyperparameters by projected L-BFGS from
/// `options.restarts` seeded starting points and conditions on the best.
/// Deterministic in (X, y, seed). Throws FitError with fewer than two points,
/// non-finite targets, or when no start yields a valid factorization.
GpModel Fit(const std::vector<UnitPoint>& X, std::span<const double> y, std::uint64_t seed,
            const FitOptions& options = {});

}  // namespace cbo
