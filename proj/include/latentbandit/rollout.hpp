#pragma once

#include <span>
#include <vector>

#include "latentbandit/belief.hpp"

namespace latentbandit {

/// How a roll-out turns a belief into an accumulated reward.
enum class RolloutArmRule {
  /// Expected mean reward when the played state is drawn from the belief.
  kSampledExpectation,
  /// Mean reward of the best arm for the belief's argmax state.
  kGreedy,
};

struct RolloutOptions {
  double entropy_threshold = 1.0;
  RolloutArmRule arm_rule = RolloutArmRule::kSampledExpectation;
};

struct RolloutResult {
  double reward_ig = 0.0;  // averaged over the |S|-1 hypothetical states
  double reward_ps = 0.0;
  int horizon_used = 1;    // longest roll-out run over hypothetical states
  int simulated_info_pulls = 0;
};

/// Pseudo-likelihood row over states for a roll-out step where the latent state
/// is fixed at `hypothetical_state` and arms are chosen by posterior sampling.
///
/// L[a][s] is the density of mu(a, x, hypothetical) under arm a's distribution
/// in state s. Arms are weighted by the probability that sampling a state from
/// `policy_belief` selects them; the returned row is sum_a w_a L[a][.] normalized.
Eigen::VectorXd rollout_likelihood_matrix(const RewardModel& model, Index context, std::span<const Index> arms,
                                          Index hypothetical_state, const BeliefState& policy_belief);
Eigen::VectorXd rollout_likelihood_matrix(const RewardModel& model, Index context, Index hypothetical_state,
                                          const BeliefState& policy_belief);

/// Belief after a simulated pull of `info_arm` that returned its mean under
/// `hypothetical_state`: belief ⊙ density vector, normalized.
/// Throws DegenerateEvidence when no supported state explains the reward.
BeliefState rollout_info_likelihood(const RewardModel& model, Index context, Index info_arm, Index hypothetical_state,
                                    const BeliefState& policy_belief);

/// Compares occasional information gathering against plain posterior sampling
/// over the expected dwell time of every state except the belief's argmax.
///
/// `horizon_cap` bounds each roll-out (the steps left in the experiment).
RolloutResult reward_estimator(const BeliefState& belief, const RewardModel& model, const TransitionKernel& kernel,
                               Index context, std::span<const Index> arms, Index greedy_arm, Index info_arm, double r_u,
                               int horizon_cap, const RolloutOptions& options = {});

RolloutResult reward_estimator(const BeliefState& belief, const RewardModel& model, const TransitionKernel& kernel,
                               Index greedy_arm, Index info_arm, double r_u, int horizon_cap,
                               const RolloutOptions& options = {});

}  // namespace latentbandit
