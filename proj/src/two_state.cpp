#include "latentbandit/two_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "latentbandit/belief.hpp"

namespace latentbandit {
namespace {

void require_two_states(const RewardModel& model) {
  if (model.num_states() != 2) throw std::invalid_argument("two-state routine called on a model with != 2 states");
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const GaussHermite& default_rule() {
  static const GaussHermite rule(64);
  return rule;
}

}  // namespace

GaussHermite::GaussHermite(int nodes) {
  if (nodes < 1) throw std::invalid_argument("Gauss-Hermite rule needs at least one node");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(nodes, nodes);
  for (int i = 1; i < nodes; ++i) {
    jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(i / 2.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  nodes_ = solver.eigenvalues() * std::numbers::sqrt2;
  weights_ = solver.eigenvectors().row(0).transpose().array().square();
  weights_ /= weights_.sum();
}

int explore_commit_sample_size(double delta, double std1, double std2, double z_alpha, double z_beta) {
  if (delta == 0.0 || !std::isfinite(delta)) throw std::invalid_argument("sample size needs a non-zero mean shift");
  if (!(std1 > 0.0) || !(std2 > 0.0)) throw std::invalid_argument("sample size needs positive stds");
  const double z = z_alpha + z_beta;
  auto plays = [&](double std) {
    const double n = z * z * std * std / (delta * delta);
    // absorb round-off so exact products such as 49.000000000000007 stay at 49
    return static_cast<int>(std::ceil(n * (1.0 - 1e-12)));
  };
  return std::max(plays(std1), plays(std2));
}

double expected_posterior_step(const RewardModel& model, Index context, Index arm, Index truth, double p,
                               const GaussHermite& rule) {
  require_two_states(model);
  if (p <= 0.0 || p >= 1.0) return p;
  const Index other = 1 - truth;
  const double mt = model.mean(arm, context, truth), st = model.std(arm, context, truth);
  const double mo = model.mean(arm, context, other), so = model.std(arm, context, other);
  const double prior_logit = std::log(p) - std::log1p(-p);
  return rule.expectation(
      [&](double r) {
        return logistic(prior_logit + gaussian_log_likelihood(r, mt, st) - gaussian_log_likelihood(r, mo, so));
      },
      mt, st);
}

double expected_sampling_step(const RewardModel& model, Index context, Index truth, double p, const GaussHermite& rule) {
  require_two_states(model);
  const auto arms = all_arms(model);
  const Index arm_truth = best_arm(model, context, truth, arms);
  const Index arm_other = best_arm(model, context, 1 - truth, arms);
  return p * expected_posterior_step(model, context, arm_truth, truth, p, rule) +
         (1.0 - p) * expected_posterior_step(model, context, arm_other, truth, p, rule);
}

std::vector<double> belief_forecast_two_state(double p0, const RewardModel& model, int steps, Index context) {
  require_two_states(model);
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("p0 must be a probability");
  const auto& rule = default_rule();
  std::vector<double> path;
  path.reserve(static_cast<std::size_t>(std::max(steps, 0)) + 1);
  path.push_back(p0);
  double p = p0;
  for (int t = 0; t < steps; ++t) {
    const double drift = expected_sampling_step(model, context, 0, p, rule) - p;
    p = std::clamp(p + drift, 0.0, 1.0);
    path.push_back(p);
  }
  return path;
}

ExploreThenSamplePlan explore_then_ps_plan(const RewardModel& model, Index info_arm, int horizon, double p0,
                                           Index context) {
  require_two_states(model);
  if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
  const auto& rule = default_rule();
  const auto arms = all_arms(model);

  struct PerTruth {
    Index truth;
    double explore_cost;  // per informative pull
    double mistake_cost;  // per step spent on the other state's best arm
    double p;             // belief on truth after the pulls so far
  };
  std::vector<PerTruth> cases;
  for (Index truth = 0; truth < 2; ++truth) {
    const Index best_here = best_arm(model, context, truth, arms);
    const Index best_other = best_arm(model, context, 1 - truth, arms);
    const double top = model.mean(best_here, context, truth);
    cases.push_back({truth, top - model.mean(info_arm, context, truth), top - model.mean(best_other, context, truth),
                     truth == 0 ? p0 : 1.0 - p0});
  }

  auto sampling_regret = [&](const PerTruth& c, int steps) {
    double p = c.p;
    double regret = 0.0;
    for (int t = 0; t < steps; ++t) {
      if (p >= 1.0 || c.mistake_cost == 0.0) break;
      regret += (1.0 - p) * c.mistake_cost;
      p = expected_sampling_step(model, context, c.truth, p, rule);
    }
    return regret;
  };

  const double min_cost = 0.5 * (std::max(cases[0].explore_cost, 0.0) + std::max(cases[1].explore_cost, 0.0));
  ExploreThenSamplePlan plan;
  plan.objective = std::numeric_limits<double>::infinity();
  for (int tau = 0; tau <= horizon; ++tau) {
    if (min_cost > 0.0 && tau * min_cost > plan.objective) break;
    double objective = 0.0;
    bool settled = true;
    for (const auto& c : cases) {
      objective += 0.5 * (tau * c.explore_cost + sampling_regret(c, horizon - tau));
      settled = settled && c.p >= 1.0;
    }
    plan.objective_by_tau.push_back(objective);
    if (objective < plan.objective) {
      plan.objective = objective;
      plan.tau = tau;
    }
    if (settled) break;
    for (auto& c : cases) c.p = expected_posterior_step(model, context, info_arm, c.truth, c.p, rule);
  }
  return plan;
}

}  // namespace latentbandit
