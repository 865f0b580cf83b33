#include <doctest.h>

#include <random>

#include "latentbandit/policies.hpp"
#include "latentbandit/reference_models.hpp"
#include "latentbandit/rollout.hpp"
#include "oracles.hpp"

using namespace latentbandit;

namespace {

Eigen::VectorXd naive_row(const RewardModel& m, Index h, const Eigen::VectorXd& p) {
  const Index S = m.num_states();
  std::vector<Index> best(S);
  for (Index b = 0; b < S; ++b) {
    Index a_best = 0;
    for (Index a = 1; a < m.num_arms(); ++a)
      if (m.mean(a, 0, b) > m.mean(a_best, 0, b)) a_best = a;
    best[b] = a_best;
  }
  Eigen::VectorXd row = Eigen::VectorXd::Zero(S);
  for (Index s = 0; s < S; ++s)
    for (Index b = 0; b < S; ++b)
      row(s) += p(b) * oracle::normal_pdf(m.mean(best[b], 0, h), m.mean(best[b], 0, s), m.std(best[b], 0, s));
  return row / row.sum();
}

RewardModel permuted(const RewardModel& m, const std::vector<Index>& perm) {
  Eigen::MatrixXd means(m.num_arms(), m.num_states()), stds(m.num_arms(), m.num_states());
  for (Index s = 0; s < m.num_states(); ++s) {
    means.col(perm[s]) = m.means().col(s);
    stds.col(perm[s]) = m.stds().col(s);
  }
  return RewardModel(means, stds);
}

}  // namespace

TEST_CASE("rollout_likelihood_matrix examples") {
  const RewardModel flat(Eigen::MatrixXd::Constant(3, 3, 1.0), Eigen::MatrixXd::Constant(3, 3, 0.5));
  const auto row = rollout_likelihood_matrix(flat, 0, 1, BeliefState::uniform(3));
  CHECK((row.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);

  Eigen::MatrixXd m(2, 2);
  m << 10.0, 0.0, 0.0, 10.0;
  const RewardModel far(m, Eigen::MatrixXd::Constant(2, 2, 0.5));
  CHECK(rollout_likelihood_matrix(far, 0, 1, BeliefState::uniform(2))(1) > 1.0 - 1e-12);

  const auto five = five_state_model();
  const Eigen::VectorXd p = BeliefState::uniform(5).probs();
  const auto lib = rollout_likelihood_matrix(five, 0, 1, BeliefState::uniform(5));
  CHECK((lib - naive_row(five, 1, p)).cwiseAbs().maxCoeff() <= 1e-12);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd q = oracle::random_simplex(5, rng);
    const Index h = trial % 5;
    CHECK((rollout_likelihood_matrix(five, 0, h, BeliefState(q)) - naive_row(five, h, q)).cwiseAbs().maxCoeff() <=
          1e-12);
  }
}

TEST_CASE("rollout_info_likelihood examples") {
  Eigen::MatrixXd m(2, 2);
  m << 2.0, 1.0, 1.5, 1.5;
  const RewardModel same(m, Eigen::MatrixXd::Constant(2, 2, 0.3));
  const BeliefState b(Eigen::Vector2d(0.3, 0.7));
  const auto unchanged = rollout_info_likelihood(same, 0, 1, 0, b);
  CHECK((unchanged.probs() - b.probs()).cwiseAbs().maxCoeff() < 1e-15);

  const auto model = two_state_model(0.01);
  CHECK(rollout_info_likelihood(model, 0, 2, 0, BeliefState::uniform(2))[0] >= 1.0 - 1e-6);

  Eigen::MatrixXd sym(2, 2);
  sym << 1.0, 2.0, 2.0, 1.0;
  const RewardModel symmetric(sym, Eigen::MatrixXd::Constant(2, 2, 0.8));
  const auto a = rollout_info_likelihood(symmetric, 0, 0, 0, BeliefState::uniform(2));
  const auto c = rollout_info_likelihood(symmetric, 0, 0, 1, BeliefState::uniform(2));
  CHECK(a[0] == doctest::Approx(c[1]).epsilon(1e-14));
}

TEST_CASE("reward_estimator: uninformative info arm cannot win") {
  Eigen::MatrixXd m(3, 2);
  m << 2.1, 2.05, 2.05, 2.1, 1.6, 1.6;
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(3, 2, 0.5);
  s.row(2).setConstant(0.01);
  const RewardModel model(m, s);
  const double r_u = single_step_regret_bound(model);
  const auto r = reward_estimator(BeliefState::uniform(2), model, TransitionKernel::identity(2), 0, 2, r_u, 500);
  CHECK(r.reward_ig <= r.reward_ps);
  CHECK_THROWS(reward_estimator(BeliefState::uniform(2), model, TransitionKernel::identity(2), 0, 0, r_u, 500));
}

TEST_CASE("reward_estimator on the two-state model favors information and agrees with Monte Carlo") {
  const auto model = two_state_model();
  const double r_u = single_step_regret_bound(model);
  const int horizon = 100;
  const auto r = reward_estimator(BeliefState::uniform(2), model, TransitionKernel::identity(2), 0, 2, r_u, horizon);
  CHECK(r.reward_ig - r.reward_ps > r_u);
  CHECK(r.horizon_used == horizon);

  // Monte Carlo: one real info pull then posterior sampling, against plain posterior sampling.
  std::mt19937_64 rng(99);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto id = TransitionKernel::identity(2);
  const int sims = 10000;
  double ig = 0.0, ps = 0.0;
  for (int k = 0; k < sims; ++k) {
    const Index truth = k % 2;
    for (int variant = 0; variant < 2; ++variant) {
      BeliefState b = BeliefState::uniform(2);
      double total = 0.0;
      if (variant == 0) {
        const double reward = model.mean(2, 0, truth) + model.std(2, 0, truth) * z(rng);
        b = filter_reward(b, id, model, 2, 0, reward);
        total -= r_u;
      }
      for (int t = 0; t < horizon; ++t) {
        const Index arm = best_arm(model, 0, sample_state(b, u(rng)), all_arms(model));
        total += model.mean(arm, 0, truth);
        b = filter_reward(b, id, model, arm, 0, model.mean(arm, 0, truth) + model.std(arm, 0, truth) * z(rng));
      }
      (variant == 0 ? ig : ps) += total / sims;
    }
  }
  CHECK(ig > ps);
  CHECK((ig - ps > 0) == (r.reward_ig - r.reward_ps > 0));
}

TEST_CASE("reward_estimator with horizon_cap 1 matches hand arithmetic") {
  const auto model = two_state_model(0.2);
  const double r_u = single_step_regret_bound(model);
  const auto r = reward_estimator(BeliefState::uniform(2), model, TransitionKernel::identity(2), 0, 2, r_u, 1);

  // argmax of the uniform belief is state 0, so the only hypothetical state is 1.
  const Index h = 1;
  const Index best[2] = {0, 1};
  auto row_from = [&](const double p[2], double out[2]) {
    for (int s = 0; s < 2; ++s) {
      out[s] = 0.0;
      for (int b = 0; b < 2; ++b)
        out[s] += p[b] * oracle::normal_pdf(model.mean(best[b], 0, h), model.mean(best[b], 0, s), 0.5);
    }
  };
  double pig[2] = {0.5 * oracle::normal_pdf(1.5, 1.7, 0.2), 0.5 * oracle::normal_pdf(1.5, 1.5, 0.2)};
  double z = pig[0] + pig[1];
  pig[0] /= z;
  pig[1] /= z;
  double row[2];
  row_from(pig, row);
  double p2[2] = {pig[0] * row[0], pig[1] * row[1]};
  z = p2[0] + p2[1];
  const double expect_ig = -r_u + (p2[0] * model.mean(0, 0, h) + p2[1] * model.mean(1, 0, h)) / z;

  const double pps[2] = {0.5, 0.5};
  row_from(pps, row);
  double q[2] = {0.5 * row[0], 0.5 * row[1]};
  z = q[0] + q[1];
  const double expect_ps = (q[0] * model.mean(0, 0, h) + q[1] * model.mean(1, 0, h)) / z;

  CHECK(r.reward_ig == doctest::Approx(expect_ig).epsilon(1e-12));
  CHECK(r.reward_ps == doctest::Approx(expect_ps).epsilon(1e-12));
  CHECK(r.horizon_used == 1);
}

TEST_CASE("property: reward_estimator is invariant to state relabeling") {
  std::mt19937_64 rng(41);
  const auto five = five_state_model(0.05);
  Eigen::MatrixXd k = Eigen::MatrixXd::Constant(5, 5, 0.01);
  k.diagonal().setConstant(0.96);
  const TransitionKernel kernel(k);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd p = oracle::random_simplex(5, rng);
    p(trial % 5) += 1.0;  // unique argmax
    p /= p.sum();
    std::vector<Index> perm = {0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::VectorXd q(5);
    for (Index s = 0; s < 5; ++s) q(perm[s]) = p(s);
    const RewardModel pm = permuted(five, perm);
    const BeliefState b(p), bq(q);
    const Index g = best_arm(five, 0, b.argmax(), all_arms(five));
    const double r_u = single_step_regret_bound(five);
    const auto a = reward_estimator(b, five, kernel, g, 4, r_u, 300);
    const auto c = reward_estimator(bq, pm, kernel, g, 4, r_u, 300);
    CHECK(a.reward_ig == doctest::Approx(c.reward_ig).epsilon(1e-9));
    CHECK(a.reward_ps == doctest::Approx(c.reward_ps).epsilon(1e-9));
  }
}
