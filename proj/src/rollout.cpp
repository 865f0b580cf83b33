#include "latentbandit/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace latentbandit {
namespace {

std::vector<Index> best_arm_per_state(const RewardModel& model, Index context, std::span<const Index> arms) {
  std::vector<Index> best(static_cast<std::size_t>(model.num_states()));
  for (Index s = 0; s < model.num_states(); ++s) best[static_cast<std::size_t>(s)] = best_arm(model, context, s, arms);
  return best;
}

// M[b][s] = density of mu(best(b), x, h) under best(b)'s distribution in state s.
Eigen::MatrixXd sampled_arm_likelihoods(const RewardModel& model, Index context, const std::vector<Index>& best,
                                        Index hypothetical) {
  const Index S = model.num_states();
  Eigen::MatrixXd m(S, S);
  for (Index b = 0; b < S; ++b) {
    const Index a = best[static_cast<std::size_t>(b)];
    const double reward = model.mean(a, context, hypothetical);
    for (Index s = 0; s < S; ++s) m(b, s) = gaussian_likelihood(reward, model.mean(a, context, s), model.std(a, context, s));
  }
  return m;
}

// Densities of mu(info, x, h) under the info arm in every state, scaled by the
// largest one among states the belief supports.
Eigen::VectorXd info_densities(const RewardModel& model, Index context, Index info_arm, Index hypothetical,
                               const Eigen::VectorXd& support) {
  const double reward = model.mean(info_arm, context, hypothetical);
  Eigen::VectorXd ll = reward_log_likelihoods(model, info_arm, context, reward);
  double peak = -std::numeric_limits<double>::infinity();
  for (Index s = 0; s < ll.size(); ++s) {
    if (support(s) > 0.0) peak = std::max(peak, ll(s));
  }
  if (!std::isfinite(peak)) peak = ll.maxCoeff();
  return (ll.array() - peak).exp().matrix();
}

// In-place filter step with a fixed likelihood row; falls back to pure
// propagation when the weighted mass vanishes.
void filter_step(Eigen::VectorXd& belief, const Eigen::MatrixXd& kernel_t, const Eigen::VectorXd& row,
                 Eigen::VectorXd& scratch) {
  scratch = belief.cwiseProduct(row);
  const double mass = scratch.sum();
  if (mass > 0.0 && std::isfinite(mass)) {
    belief.noalias() = kernel_t * scratch;
  } else {
    scratch = belief;
    belief.noalias() = kernel_t * scratch;
  }
  belief /= belief.sum();
}

double bits(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Index s = 0; s < p.size(); ++s) {
    if (p(s) > 0.0) h -= p(s) * std::log2(p(s));
  }
  return h;
}

Index argmax_lowest(const Eigen::VectorXd& p) {
  Index best = 0;
  for (Index s = 1; s < p.size(); ++s) {
    if (p(s) > p(best)) best = s;
  }
  return best;
}

}  // namespace

Eigen::VectorXd rollout_likelihood_matrix(const RewardModel& model, Index context, std::span<const Index> arms,
                                          Index hypothetical_state, const BeliefState& policy_belief) {
  const auto best = best_arm_per_state(model, context, arms);
  const Eigen::MatrixXd m = sampled_arm_likelihoods(model, context, best, hypothetical_state);
  Eigen::VectorXd row = m.transpose() * policy_belief.probs();
  const double total = row.sum();
  if (!(total > 0.0)) throw DegenerateEvidence("roll-out likelihood row vanished");
  return row / total;
}

Eigen::VectorXd rollout_likelihood_matrix(const RewardModel& model, Index context, Index hypothetical_state,
                                          const BeliefState& policy_belief) {
  const auto arms = all_arms(model);
  return rollout_likelihood_matrix(model, context, std::span<const Index>(arms), hypothetical_state, policy_belief);
}

BeliefState rollout_info_likelihood(const RewardModel& model, Index context, Index info_arm, Index hypothetical_state,
                                    const BeliefState& policy_belief) {
  const Eigen::VectorXd dens = info_densities(model, context, info_arm, hypothetical_state, policy_belief.probs());
  return BeliefState::normalized(policy_belief.probs().cwiseProduct(dens));
}

RolloutResult reward_estimator(const BeliefState& belief, const RewardModel& model, const TransitionKernel& kernel,
                               Index context, std::span<const Index> arms, Index greedy_arm, Index info_arm, double r_u,
                               int horizon_cap, const RolloutOptions& options) {
  if (info_arm == greedy_arm) throw std::invalid_argument("reward_estimator needs distinct greedy and info arms");
  const Index S = model.num_states();
  const Index anchor = belief.argmax();
  const auto best = best_arm_per_state(model, context, arms);
  const Eigen::MatrixXd kernel_t = kernel.matrix().transpose();
  horizon_cap = std::max(horizon_cap, 1);

  RolloutResult result;
  result.horizon_used = 0;
  double total_ig = 0.0;
  double total_ps = 0.0;
  Eigen::VectorXd p_ig(S), p_ps(S), scratch(S), row(S), values(S);

  const bool greedy = options.arm_rule == RolloutArmRule::kGreedy;
  auto value_of = [&](const Eigen::VectorXd& p) { return greedy ? values(argmax_lowest(p)) : values.dot(p); };
  // Under the greedy rule only the argmax state's arm is played.
  auto sampled_row = [&](const Eigen::MatrixXd& likelihoods, const Eigen::VectorXd& p) {
    if (greedy) {
      row = likelihoods.row(argmax_lowest(p)).transpose();
    } else {
      row.noalias() = likelihoods.transpose() * p;
    }
  };

  for (Index h = 0; h < S; ++h) {
    if (h == anchor) continue;
    const double dwell = expected_dwell_time(kernel, BeliefState::point_mass(S, h), static_cast<double>(horizon_cap));
    const int steps = std::clamp(static_cast<int>(std::lround(dwell)), 1, horizon_cap);
    result.horizon_used = std::max(result.horizon_used, steps);

    const Eigen::MatrixXd likelihoods = sampled_arm_likelihoods(model, context, best, h);
    for (Index b = 0; b < S; ++b) values(b) = model.mean(best[static_cast<std::size_t>(b)], context, h);

    p_ig = belief.probs();
    p_ps = belief.probs();
    double r_ig = -r_u;
    double r_ps = 0.0;

    auto info_pull = [&]() {
      const Eigen::VectorXd dens = info_densities(model, context, info_arm, h, p_ig);
      filter_step(p_ig, kernel_t, dens, scratch);
      ++result.simulated_info_pulls;
    };

    info_pull();
    for (int t = 0; t < steps; ++t) {
      if (bits(p_ig) >= options.entropy_threshold && r_ig - r_ps > r_u) {
        info_pull();
        r_ig -= r_u;
      } else {
        sampled_row(likelihoods, p_ig);
        filter_step(p_ig, kernel_t, row, scratch);
      }
      sampled_row(likelihoods, p_ps);
      filter_step(p_ps, kernel_t, row, scratch);

      r_ig += value_of(p_ig);
      r_ps += value_of(p_ps);
    }
    total_ig += r_ig;
    total_ps += r_ps;
  }
  const double others = static_cast<double>(S - 1);
  result.reward_ig = total_ig / others;
  result.reward_ps = total_ps / others;
  result.horizon_used = std::max(result.horizon_used, 1);
  return result;
}

RolloutResult reward_estimator(const BeliefState& belief, const RewardModel& model, const TransitionKernel& kernel,
                               Index greedy_arm, Index info_arm, double r_u, int horizon_cap,
                               const RolloutOptions& options) {
  const auto arms = all_arms(model);
  return reward_estimator(belief, model, kernel, 0, std::span<const Index>(arms), greedy_arm, info_arm, r_u, horizon_cap,
                          options);
}

}  // namespace latentbandit
