#include <doctest.h>

#include <cmath>
#include <random>

#include "cbo/acquisition.hpp"
#include "cbo/error.hpp"

using namespace cbo;

namespace {

GpModel SmallModel(double shift, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<UnitPoint> X;
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) {
    X.push_back({u(rng), u(rng)});
    y.push_back(std::sin(3 * X.back()[0]) + X.back()[1] + shift);
  }
  return Fit(X, y, seed);
}

}  // namespace

TEST_SUITE("acquisition") {
  TEST_CASE("expected improvement examples") {
    CHECK(ExpectedImprovement(0.0, 1.0, 0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
    CHECK(ExpectedImprovement(1.0, 0.0, 0.0) == 0.0);
    CHECK(ExpectedImprovement(-2.0, 0.0, 0.0) == 2.0);
    CHECK_THROWS_AS(ExpectedImprovement(std::nan(""), 1.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(ExpectedImprovement(0.0, -1.0, 0.0), InvalidArgument);
    CHECK(ExpectedImprovement(100.0, 1.0, 0.0) == 0.0);  // flushed underflow
  }

  TEST_CASE("probability of feasibility examples") {
    CHECK(ProbabilityOfFeasibility(0.0, 1.0) == 0.5);
    CHECK(ProbabilityOfFeasibility(-1.96, 1.0) == doctest::Approx(0.9750021048517796).epsilon(1e-14));
    CHECK(ProbabilityOfFeasibility(-0.1, 0.0) == 1.0);
    CHECK(ProbabilityOfFeasibility(0.1, 0.0) == 0.0);
    CHECK(ProbabilityOfFeasibility(0.0, 0.0) == 1.0);
    CHECK_THROWS_AS(ProbabilityOfFeasibility(INFINITY, 1.0), InvalidArgument);
  }

  TEST_CASE("penalized objective examples") {
    CHECK(PenalizedObjective(0.7, -0.3, 5.0) == 0.7);
    CHECK(PenalizedObjective(0.5, 2.0, 1.0) == 4.5);
    CHECK(PenalizedObjective(0.5, 2.0, 0.0) == 0.5);
    CHECK_THROWS_AS(PenalizedObjective(0.5, 2.0, -1.0), InvalidArgument);
  }

  TEST_CASE("monotonicity properties") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_real_distribution<double> s(0.0, 2.0);
    for (int i = 0; i < 5000; ++i) {
      const double mu = u(rng), sd = s(rng), fb = u(rng), d = std::abs(u(rng));
      CHECK(ExpectedImprovement(mu + d, sd, fb) <= ExpectedImprovement(mu, sd, fb));
      CHECK(ExpectedImprovement(mu, sd, fb + d) >= ExpectedImprovement(mu, sd, fb));
      CHECK(ExpectedImprovement(mu, sd, fb) >= 0.0);
      const double sd_pos = sd + 0.01;
      CHECK(ProbabilityOfFeasibility(mu + d, sd_pos) <= ProbabilityOfFeasibility(mu, sd_pos));
      const double pof = ProbabilityOfFeasibility(mu, sd);
      CHECK((pof >= 0.0 && pof <= 1.0));
    }
  }

  TEST_CASE("joint acquisition composes EI and PoF") {
    const GpModel f = SmallModel(0.0, 1);
    const GpModel c = SmallModel(-1.0, 2);
    AcquisitionContext ctx{&f, &c, 0.2, AcquisitionMode::kCboJoint};
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
      const UnitPoint x{u(rng), u(rng)};
      const auto pf = f.Predict(x);
      const auto pc = c.Predict(x);
      const double ei = ExpectedImprovement(pf.mean, std::sqrt(pf.variance), 0.2);
      const double pof = ProbabilityOfFeasibility(pc.mean, std::sqrt(pc.variance));
      const double joint = JointAcquisition(ctx, x);
      CHECK(std::abs(joint - ei * pof) <= 1e-12);
      CHECK(joint <= ei);
    }

    // No feasible point yet: PoF alone.
    AcquisitionContext cold{&f, &c, std::nullopt, AcquisitionMode::kCboJoint};
    const UnitPoint x{0.3, 0.3};
    const auto pc = c.Predict(x);
    CHECK(JointAcquisition(cold, x) == ProbabilityOfFeasibility(pc.mean, std::sqrt(pc.variance)));

    AcquisitionContext pen{&f, nullptr, 0.1, AcquisitionMode::kPenalizedEi};
    const auto pf = f.Predict(x);
    CHECK(JointAcquisition(pen, x) == ExpectedImprovement(pf.mean, std::sqrt(pf.variance), 0.1));
  }

  TEST_CASE("joint acquisition with certain (in)feasibility") {
    // Constraint model conditioned far below / above zero with tiny noise.
    std::vector<UnitPoint> X{{0.1}, {0.5}, {0.9}};
    const GpModel f = GpModel::Condition(X, std::vector{0.3, -0.1, 0.4}, {1.0, {0.3}, 1e-4});
    const GpModel feasible = GpModel::Condition(X, std::vector{-50.0, -50.0, -50.0}, {1.0, {0.3}, 1e-6});
    const GpModel infeasible = GpModel::Condition(X, std::vector{80.0, 80.0, 80.0}, {1.0, {0.3}, 1e-6});
    const UnitPoint x{0.4};
    const auto pf = f.Predict(x);
    const double ei = ExpectedImprovement(pf.mean, std::sqrt(pf.variance), 0.0);
    CHECK(JointAcquisition({&f, &feasible, 0.0, AcquisitionMode::kCboJoint}, x) == ei);
    CHECK(JointAcquisition({&f, &infeasible, 0.0, AcquisitionMode::kCboJoint}, x) == 0.0);
  }

  TEST_CASE("context validation") {
    const GpModel f = SmallModel(0.0, 1);
    CHECK_THROWS_AS(JointAcquisition({&f, nullptr, 0.0, AcquisitionMode::kCboJoint}, UnitPoint{0.1, 0.1}),
                    InvalidArgument);
    CHECK_THROWS_AS(JointAcquisition({&f, nullptr, std::nullopt, AcquisitionMode::kPenalizedEi},
                                     UnitPoint{0.1, 0.1}),
                    InvalidArgument);
  }

  TEST_CASE("maximizer behaviour") {
    SUBCASE("constant acquisition returns the first candidate") {
      const auto first = SampleUnitCube(3, 1, 77)[0];
      CHECK(MaximizeAcquisition([](std::span<const double>) { return 1.0; }, 3, 77) == first);
    }
    SUBCASE("single peak is located") {
      const UnitPoint p{0.31, 0.77, 0.05};
      auto fn = [&](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d) s -= (x[d] - p[d]) * (x[d] - p[d]);
        return s;
      };
      const auto best = MaximizeAcquisition(fn, 3, 5);
      for (std::size_t d = 0; d < 3; ++d) CHECK(std::abs(best[d] - p[d]) < 0.02);
      CHECK(MaximizeAcquisition(fn, 3, 5) == best);
    }
    SUBCASE("results stay in the unit cube") {
      auto fn = [](std::span<const double> x) { return x[0] * 10 - x[1] * 10; };
      const auto best = MaximizeAcquisition(fn, 2, 3);
      CHECK(best[0] == 1.0);
      CHECK(best[1] == 0.0);
    }
    SUBCASE("all non-finite is an acquisition failure") {
      CHECK_THROWS_AS(MaximizeAcquisition([](std::span<const double>) { return NAN; }, 2, 1),
                      AcquisitionError);
    }
  }
}
