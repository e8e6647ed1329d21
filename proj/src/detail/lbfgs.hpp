#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace cbo::detail {

struct BoxedMinimum {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

/// Objective returning f(x) and writing ∇f(x) into the second argument. May
/// return +inf (or throw) for points it cannot evaluate.
using DifferentiableFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// L-BFGS with projection onto [lower, upper] and Armijo backtracking.
inline BoxedMinimum MinimizeBoxed(const DifferentiableFn& f, Eigen::VectorXd x,
                                  const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                  int max_iterations, int memory = 8) {
  auto project = [&](const Eigen::VectorXd& v) { return v.cwiseMax(lower).cwiseMin(upper); };
  auto eval = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
    try {
      const double value = f(v, g);
      return std::isfinite(value) && g.allFinite() ? value
                                                   : std::numeric_limits<double>::infinity();
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  x = project(x);
  Eigen::VectorXd grad(x.size());
  double value = eval(x, grad);
  BoxedMinimum best{x, value, 0};
  if (!std::isfinite(value)) return best;

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  for (int it = 0; it < max_iterations; ++it) {
    best.iterations = it + 1;
    // Projected-gradient optimality test.
    if ((project(x - grad) - x).lpNorm<Eigen::Infinity>() < 1e-7) break;

    Eigen::VectorXd q = grad;
    std::vector<double> rho(s_hist.size());
    std::vector<double> a(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      rho[i] = 1.0 / y_hist[i].dot(s_hist[i]);
      a[i] = rho[i] * s_hist[i].dot(q);
      q -= a[i] * y_hist[i];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double b = rho[i] * y_hist[i].dot(q);
      q += (a[i] - b) * s_hist[i];
    }
    Eigen::VectorXd dir = -q;
    if (dir.dot(grad) >= 0.0) {
      dir = -grad;
      s_hist.clear();
      y_hist.clear();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(grad.norm(), 1e-12)) : 1.0;
    Eigen::VectorXd x_new;
    Eigen::VectorXd g_new(x.size());
    double v_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = project(x + step * dir);
      v_new = eval(x_new, g_new);
      if (std::isfinite(v_new) && v_new <= value + 1e-4 * grad.dot(x_new - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd yv = g_new - grad;
    const double rel_change = std::abs(value - v_new) / std::max({std::abs(value), std::abs(v_new), 1.0});
    x = x_new;
    grad = g_new;
    value = v_new;
    if (s.dot(yv) > 1e-12 * yv.squaredNorm()) {
      s_hist.push_back(s);
      y_hist.push_back(yv);
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    if (rel_change < 1e-12) break;
  }
  best.x = x;
  best.value = value;
  return best;
}

}  // namespace cbo::detail
