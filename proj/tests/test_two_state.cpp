#include <doctest.h>

#include <random>

#include "latentbandit/belief.hpp"
#include "latentbandit/policies.hpp"
#include "latentbandit/reference_models.hpp"
#include "latentbandit/two_state.hpp"
#include "oracles.hpp"

using namespace latentbandit;

TEST_CASE("explore_commit_sample_size examples") {
  CHECK(explore_commit_sample_size(0.2, 0.5, 0.5, 1.96, 0.84) == 49);
  CHECK(explore_commit_sample_size(0.2, 0.05, 0.05, 1.96, 0.84) == 1);
  CHECK(explore_commit_sample_size(0.2, 0.5, 0.05, 1.96, 0.84) == 49);
  CHECK(explore_commit_sample_size(0.2, 0.05, 0.5, 1.96, 0.84) == 49);
  CHECK(explore_commit_sample_size(-0.2, 0.5, 0.5, 1.96, 0.84) == 49);
  CHECK_THROWS(explore_commit_sample_size(0.0, 0.5, 0.5, 1.96, 0.84));
  CHECK_THROWS(explore_commit_sample_size(0.2, std::nan(""), 0.5, 1.96, 0.84));
}

TEST_CASE("property: sample size is monotone in noise and gap") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const double d = u(rng), s1 = u(rng), s2 = u(rng);
    const int n = explore_commit_sample_size(d, s1, s2, 1.96, 0.84);
    CHECK(n >= 1);
    CHECK(explore_commit_sample_size(d, s1 * 1.5, s2, 1.96, 0.84) >= n);
    CHECK(explore_commit_sample_size(d * 1.5, s1, s2, 1.96, 0.84) <= n);
    CHECK(explore_commit_sample_size(d, s1, s2, 2.58, 0.84) >= n);
  }
}

TEST_CASE("GaussHermite integrates low-order moments exactly") {
  const GaussHermite rule(64);
  CHECK(rule.weights().sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rule.expectation([](double r) { return r; }, 1.3, 0.7) == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(rule.expectation([](double r) { return r * r; }, 1.3, 0.7) == doctest::Approx(1.3 * 1.3 + 0.49).epsilon(1e-12));
  CHECK(rule.expectation([](double r) { return std::pow(r, 4); }, 0.0, 1.0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("belief_forecast_two_state examples") {
  const RewardModel flat(Eigen::MatrixXd::Constant(3, 2, 1.0), Eigen::MatrixXd::Constant(3, 2, 0.5));
  for (double p : belief_forecast_two_state(0.3, flat, 50)) CHECK(p == doctest::Approx(0.3).epsilon(1e-12));

  const auto model = two_state_model();
  const auto certain = belief_forecast_two_state(1.0, model, 50);
  CHECK(certain.size() == 51);
  for (double p : certain) CHECK(p == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS(belief_forecast_two_state(0.5, five_state_model(), 10));
}

TEST_CASE("property: forecast trajectories stay in [0, 1] and match a Monte Carlo belief average") {
  const auto model = two_state_model();
  const int steps = 200;
  const auto forecast = belief_forecast_two_state(0.5, model, steps);
  for (double p : forecast) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }

  const int sims = 2000;
  std::vector<double> mc(steps + 1, 0.0);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto id = TransitionKernel::identity(2);
  const auto arms = all_arms(model);
  for (int k = 0; k < sims; ++k) {
    BeliefState b = BeliefState::uniform(2);
    mc[0] += b[0] / sims;
    for (int t = 1; t <= steps; ++t) {
      const Index arm = best_arm(model, 0, sample_state(b, u(rng)), arms);
      b = filter_reward(b, id, model, arm, 0, model.mean(arm, 0, 0) + model.std(arm, 0, 0) * z(rng));
      mc[t] += b[0] / sims;
    }
  }
  double worst = 0.0;
  for (int t = 0; t <= steps; ++t) worst = std::max(worst, std::abs(mc[t] - forecast[t]));
  CHECK(worst < 0.05);
}

TEST_CASE("explore_then_ps_tau examples") {
  // Free information: the informative arm pays as much as the best arm.
  Eigen::MatrixXd m(3, 2);
  m << 2.1, 2.05, 2.05, 2.1, 2.1, 1.9;
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(3, 2, 0.5);
  s.row(2).setConstant(0.05);
  CHECK(explore_then_ps_tau(RewardModel(m, s), 2, 1000) > 0);

  TwoStateFamily costly;
  costly.info_cost = 50.0;
  CHECK(explore_then_ps_tau(costly.model(), 2, 1000) == 0);

  const auto ec = explore_commit_model();
  const int tau = explore_then_ps_tau(ec, 2, 1000);
  const int n_e = explore_commit_sample_size(0.2, 0.05, 0.05, 1.96, 0.84);
  CHECK(tau > 0);
  CHECK(tau >= n_e / 2);

  const auto plan = explore_then_ps_plan(ec, 2, 1000);
  CHECK(plan.tau == tau);
  for (double v : plan.objective_by_tau) CHECK(v >= plan.objective - 1e-12);
}
