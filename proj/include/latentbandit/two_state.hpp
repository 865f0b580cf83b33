#pragma once

#include <vector>

#include "latentbandit/types.hpp"

namespace latentbandit {

/// Physicists' Gauss-Hermite rule from the Golub-Welsch eigenproblem.
class GaussHermite {
 public:
  explicit GaussHermite(int nodes);

  /// E[f(R)] for R ~ N(mean, std^2).
  template <typename F>
  double expectation(F&& f, double mean, double std) const {
    double total = 0.0;
    for (Index i = 0; i < nodes_.size(); ++i) total += weights_(i) * f(mean + std * nodes_(i));
    return total;
  }

  const Eigen::VectorXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& weights() const { return weights_; }  // normalized to sum to 1

 private:
  Eigen::VectorXd nodes_;    // already scaled by sqrt(2)
  Eigen::VectorXd weights_;
};

/// Plays of the informative arm needed to separate its two state means:
/// max over both states of ceil((z_alpha + z_beta)^2 sigma_i^2 / delta^2).
int explore_commit_sample_size(double delta, double std1, double std2, double z_alpha, double z_beta);

/// Expected posterior on `truth` after one pull of `arm` when the reward is drawn
/// from `truth`'s distribution, starting from P(truth) = p. Two-state models only.
double expected_posterior_step(const RewardModel& model, Index context, Index arm, Index truth, double p,
                               const GaussHermite& rule);

/// Expected posterior after one posterior-sampling step: the played arm is the
/// best arm of a state drawn from the current belief.
double expected_sampling_step(const RewardModel& model, Index context, Index truth, double p, const GaussHermite& rule);

/// Trajectory of P_t(s0) under posterior sampling when s0 is the true state,
/// iterating P <- P + dP/dt with the Bayes increment averaged over the arm draw
/// and the reward distribution. Returns steps + 1 values, the first being p0.
std::vector<double> belief_forecast_two_state(double p0, const RewardModel& model, int steps, Index context = 0);

struct ExploreThenSamplePlan {
  int tau = 0;
  double objective = 0.0;
  std::vector<double> objective_by_tau;  // evaluated prefix; later entries cannot win
};

/// Minimizes, over tau in [0, horizon], the cost of tau informative pulls plus the
/// forecast posterior-sampling regret for the remaining steps, averaged over both
/// true states. tau = 0 means pure posterior sampling.
ExploreThenSamplePlan explore_then_ps_plan(const RewardModel& model, Index info_arm, int horizon, double p0 = 0.5,
                                           Index context = 0);

inline int explore_then_ps_tau(const RewardModel& model, Index info_arm, int horizon) {
  return explore_then_ps_plan(model, info_arm, horizon).tau;
}

}  // namespace latentbandit
