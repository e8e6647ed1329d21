#include "cbo/gp.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "cbo/error.hpp"
#include "detail/lbfgs.hpp"

namespace cbo {
namespace {

constexpr double kSqrt5 = 2.2360679774997896964;
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kJitterSteps[] = {0.0, 1e-8, 1e-6, 1e-4};

// Log-space box for the evidence maximization.
constexpr double kMinSignal = 1e-3, kMaxSignal = 1e2;
constexpr double kMinLengthscale = 1e-3, kMaxLengthscale = 1e2;
constexpr double kMaxNoise = 1e1;

Eigen::MatrixXd ToMatrix(const std::vector<UnitPoint>& X) {
  if (X.empty()) return {};
  const auto dim = X.front().size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (X[i].size() != dim) throw InvalidArgument("training inputs have inconsistent dimension");
    for (std::size_t d = 0; d < dim; ++d) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = X[i][d];
  }
  return out;
}

double ScaledDistance(const double* a, const double* b, Eigen::Index stride_a, Eigen::Index stride_b,
                      const std::vector<double>& ls) {
  double r2 = 0.0;
  for (std::size_t d = 0; d < ls.size(); ++d) {
    const double t = (a[static_cast<Eigen::Index>(d) * stride_a] - b[static_cast<Eigen::Index>(d) * stride_b]) / ls[d];
    r2 += t * t;
  }
  return std::sqrt(r2);
}

double Matern52(double r, double sigma2) {
  const double s = kSqrt5 * r;
  return sigma2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

Eigen::MatrixXd KernelMatrix(const Eigen::MatrixXd& X, const KernelParams& p) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = p.signal_variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r = ScaledDistance(&X(i, 0), &X(j, 0), X.rows(), X.rows(), p.lengthscales);
      K(i, j) = K(j, i) = Matern52(r, p.signal_variance);
    }
  }
  return K;
}

struct Factorization {
  Eigen::MatrixXd L;
  double jitter = 0.0;
};

// Cholesky of K + σ_n² I, escalating diagonal jitter 1e-8 → 1e-6 → 1e-4.
Factorization Factor(const Eigen::MatrixXd& K, double noise) {
  for (double jitter : kJitterSteps) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += noise + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
  }
  throw FitError("kernel matrix is not positive definite after jitter escalation");
}

void CheckDims(const Eigen::MatrixXd& X, const KernelParams& params) {
  if (static_cast<std::size_t>(X.cols()) != params.lengthscales.size()) {
    throw InvalidArgument("kernel has " + std::to_string(params.lengthscales.size()) +
                          " lengthscales for inputs of dimension " + std::to_string(X.cols()));
  }
}

Eigen::VectorXd ToVector(std::span<const double> y) {
  return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

LmlWithGradient Evidence(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const KernelParams& p, bool with_gradient) {
  CheckDims(X, p);
  const Eigen::Index n = X.rows();
  if (y.size() != n) throw InvalidArgument("targets and inputs differ in length");
  const Eigen::MatrixXd K = KernelMatrix(X, p);
  const Factorization f = Factor(K, p.noise_variance);
  const auto L = f.L.triangularView<Eigen::Lower>();
  const auto U = f.L.transpose().triangularView<Eigen::Upper>();
  const Eigen::VectorXd alpha = U.solve(L.solve(y));

  LmlWithGradient out;
  out.value = -0.5 * y.dot(alpha) - f.L.diagonal().array().log().sum() -
              0.5 * static_cast<double>(n) * kLog2Pi;
  if (!with_gradient) return out;

  // ∂LML/∂θ = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ)
  Eigen::MatrixXd Kinv = Eigen::MatrixXd::Identity(n, n);
  L.solveInPlace(Kinv);
  U.solveInPlace(Kinv);
  const Eigen::MatrixXd W = alpha * alpha.transpose() - Kinv;

  const std::size_t dim = p.lengthscales.size();
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim + 2));
  out.gradient(0) = 0.5 * (W.array() * K.array()).sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r = ScaledDistance(&X(i, 0), &X(j, 0), n, n, p.lengthscales);
      // ∂k/∂log ℓ_d = σ² (5/3)(1 + √5 r) e^{−√5 r} (Δ_d/ℓ_d)²
      const double common = p.signal_variance * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
      for (std::size_t d = 0; d < dim; ++d) {
        const double t = (X(i, static_cast<Eigen::Index>(d)) - X(j, static_cast<Eigen::Index>(d))) / p.lengthscales[d];
        // Off-diagonal pair counted twice by symmetry; the ½ cancels.
        out.gradient(static_cast<Eigen::Index>(d) + 1) += W(i, j) * common * t * t;
      }
    }
  }
  out.gradient(static_cast<Eigen::Index>(dim) + 1) = 0.5 * p.noise_variance * W.trace();
  return out;
}

}  // namespace

void KernelParams::Validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(signal_variance)) throw InvalidArgument("signal variance must be positive");
  if (lengthscales.empty()) throw InvalidArgument("kernel needs at least one lengthscale");
  for (double l : lengthscales) {
    if (!positive(l)) throw InvalidArgument("lengthscales must be positive");
  }
  if (!std::isfinite(noise_variance) || noise_variance < kNoiseFloor) {
    throw InvalidArgument("noise variance must be >= 1e-8");
  }
}

Eigen::VectorXd KernelParams::ToLog() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(lengthscales.size() + 2));
  out(0) = std::log(signal_variance);
  for (std::size_t d = 0; d < lengthscales.size(); ++d) {
    out(static_cast<Eigen::Index>(d) + 1) = std::log(lengthscales[d]);
  }
  out(out.size() - 1) = std::log(noise_variance);
  return out;
}

KernelParams KernelParams::FromLog(const Eigen::VectorXd& log_params) {
  KernelParams p;
  p.signal_variance = std::exp(log_params(0));
  p.lengthscales.resize(static_cast<std::size_t>(log_params.size() - 2));
  for (std::size_t d = 0; d < p.lengthscales.size(); ++d) {
    p.lengthscales[d] = std::exp(log_params(static_cast<Eigen::Index>(d) + 1));
  }
  p.noise_variance = std::exp(log_params(log_params.size() - 1));
  return p;
}

double KernelMatern52(std::span<const double> x1, std::span<const double> x2,
                      const KernelParams& params) {
  if (x1.size() != x2.size() || x1.size() != params.lengthscales.size()) {
    throw InvalidArgument("kernel inputs and lengthscales differ in dimension");
  }
  return Matern52(ScaledDistance(x1.data(), x2.data(), 1, 1, params.lengthscales),
                  params.signal_variance);
}

double LogMarginalLikelihood(const std::vector<UnitPoint>& X, std::span<const double> y,
                             const KernelParams& params) {
  params.Validate();
  return Evidence(ToMatrix(X), ToVector(y), params, false).value;
}

LmlWithGradient LogMarginalLikelihoodWithGradient(const std::vector<UnitPoint>& X,
                                                  std::span<const double> y,
                                                  const KernelParams& params) {
  params.Validate();
  return Evidence(ToMatrix(X), ToVector(y), params, true);
}

GpModel GpModel::Condition(const std::vector<UnitPoint>& X, std::span<const double> y,
                           const KernelParams& params) {
  params.Validate();
  if (X.empty()) throw FitError("cannot condition a GP on zero points");
  if (X.size() != y.size()) throw InvalidArgument("targets and inputs differ in length");
  GpModel m;
  m.X_ = ToMatrix(X);
  CheckDims(m.X_, params);
  m.y_raw_ = ToVector(y);
  if (!m.y_raw_.allFinite()) throw FitError("GP targets must be finite");
  const auto n = static_cast<double>(y.size());
  m.y_mean_ = m.y_raw_.mean();
  const double var = (m.y_raw_.array() - m.y_mean_).square().sum() / n;
  m.y_std_ = std::sqrt(var);
  if (!(m.y_std_ > 1e-12 * std::max(1.0, std::abs(m.y_mean_)))) m.y_std_ = 1.0;
  m.params_ = params;

  const Eigen::VectorXd ys = (m.y_raw_.array() - m.y_mean_) / m.y_std_;
  const Factorization f = Factor(KernelMatrix(m.X_, params), params.noise_variance);
  m.chol_ = f.L;
  m.jitter_ = f.jitter;
  const auto L = m.chol_.triangularView<Eigen::Lower>();
  m.alpha_ = m.chol_.transpose().triangularView<Eigen::Upper>().solve(L.solve(ys));
  return m;
}

Eigen::MatrixXd GpModel::JitteredKernel() const {
  Eigen::MatrixXd K = KernelMatrix(X_, params_);
  K.diagonal().array() += params_.noise_variance + jitter_;
  return K;
}

Prediction GpModel::Predict(std::span<const double> x) const {
  if (x.size() != dim()) {
    throw InvalidArgument("query has dimension " + std::to_string(x.size()) + ", model has " +
                          std::to_string(dim()));
  }
  const Eigen::Index n = X_.rows();
  Eigen::VectorXd kstar(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kstar(i) = Matern52(ScaledDistance(&X_(i, 0), x.data(), n, 1, params_.lengthscales),
                        params_.signal_variance);
  }
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(kstar);
  const double prior = params_.signal_variance + params_.noise_variance;
  Prediction out;
  out.mean = y_mean_ + y_std_ * kstar.dot(alpha_);
  out.variance = std::max(0.0, y_std_ * y_std_ * (prior - v.squaredNorm()));
  return out;
}

GpModel Fit(const std::vector<UnitPoint>& X, std::span<const double> y, std::uint64_t seed,
            const FitOptions& options) {
  if (X.size() < 2) throw FitError("GP fitting needs at least 2 observations");
  if (X.size() != y.size()) throw InvalidArgument("targets and inputs differ in length");
  for (double v : y) {
    if (!std::isfinite(v)) throw FitError("GP targets must be finite");
  }
  const Eigen::MatrixXd Xm = ToMatrix(X);
  const auto dim = static_cast<std::size_t>(Xm.cols());
  if (dim == 0) throw InvalidArgument("GP inputs must have dimension >= 1");

  // Standardized targets, same constants Condition derives.
  const Eigen::VectorXd yr = ToVector(y);
  const double mean = yr.mean();
  double sd = std::sqrt((yr.array() - mean).square().sum() / static_cast<double>(yr.size()));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) sd = 1.0;
  const Eigen::VectorXd ys = (yr.array() - mean) / sd;

  const auto np = static_cast<Eigen::Index>(dim + 2);
  Eigen::VectorXd lower(np), upper(np);
  lower(0) = std::log(kMinSignal);
  upper(0) = std::log(kMaxSignal);
  lower.segment(1, static_cast<Eigen::Index>(dim)).setConstant(std::log(kMinLengthscale));
  upper.segment(1, static_cast<Eigen::Index>(dim)).setConstant(std::log(kMaxLengthscale));
  lower(np - 1) = std::log(KernelParams::kNoiseFloor);
  upper(np - 1) = std::log(kMaxNoise);

  auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    const LmlWithGradient e = Evidence(Xm, ys, KernelParams::FromLog(theta), true);
    grad = -e.gradient;
    return -e.value;
  };

  std::mt19937_64 rng(seed);
  auto log_uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng);
  };

  std::optional<detail::BoxedMinimum> best;
  for (int start = 0; start < std::max(1, options.restarts); ++start) {
    Eigen::VectorXd theta0(np);
    if (start == 0) {
      theta0(0) = 0.0;
      theta0.segment(1, static_cast<Eigen::Index>(dim)).setConstant(std::log(0.5));
      theta0(np - 1) = std::log(1e-2);
    } else {
      theta0(0) = log_uniform(1e-1, 1e1);
      for (std::size_t d = 0; d < dim; ++d) theta0(static_cast<Eigen::Index>(d) + 1) = log_uniform(1e-2, 1e1);
      theta0(np - 1) = log_uniform(1e-6, 1e-1);
    }
    auto result = detail::MinimizeBoxed(objective, theta0, lower, upper, options.max_iterations);
    if (std::isfinite(result.value) && (!best || result.value < best->value)) best = std::move(result);
  }
  if (!best) throw FitError("no hyperparameter start produced a valid kernel factorization");

  KernelParams params = KernelParams::FromLog(best->x);
  params.noise_variance = std::max(params.noise_variance, KernelParams::kNoiseFloor);
  return GpModel::Condition(X, y, params);
}

}  // namespace cbo
