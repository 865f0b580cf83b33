#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "latentbandit/types.hpp"

namespace latentbandit {

// ---------------------------------------------------------------------------
// Gaussian densities and divergences
// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar gaussian_log_likelihood(Scalar reward, Scalar mean, Scalar std) {
  if (!std::isfinite(reward) || !std::isfinite(mean) || !std::isfinite(std)) {
    throw std::invalid_argument("gaussian likelihood inputs must be finite");
  }
  if (!(std > Scalar(0))) throw std::invalid_argument("gaussian likelihood needs std > 0");
  const Scalar z = (reward - mean) / std;
  return Scalar(-0.5) * z * z - std::log(std) - Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
}

template <typename Scalar>
Scalar gaussian_likelihood(Scalar reward, Scalar mean, Scalar std) {
  return std::exp(gaussian_log_likelihood(reward, mean, std));
}

/// KL(N(mean1, std1^2) || N(mean2, std2^2)) in nats.
template <typename Scalar>
Scalar gaussian_kl(Scalar mean1, Scalar std1, Scalar mean2, Scalar std2) {
  if (!(std1 > Scalar(0)) || !(std2 > Scalar(0))) throw std::invalid_argument("gaussian_kl needs positive stds");
  const Scalar d = mean1 - mean2;
  const Scalar kl = std::log(std2 / std1) + (std1 * std1 + d * d) / (Scalar(2) * std2 * std2) - Scalar(0.5);
  return std::max(kl, Scalar(0));
}

// ---------------------------------------------------------------------------
// Belief filtering
// ---------------------------------------------------------------------------

/// Pure transition step: next(s') = sum_s belief(s) K(s, s').
template <typename Scalar>
BasicBeliefState<Scalar> propagate(const BasicBeliefState<Scalar>& belief, const BasicTransitionKernel<Scalar>& kernel) {
  VectorX<Scalar> next = kernel.matrix().transpose() * belief.probs();
  return BasicBeliefState<Scalar>::normalized(std::move(next));
}

/// Bayes-rule filter step. The likelihood weights the pre-transition state,
/// then the mass is pushed through the kernel:
///   next(s') ∝ sum_s belief(s) K(s, s') likelihood(s).
/// Throws DegenerateEvidence when every weighted entry is zero.
template <typename Scalar, typename Derived>
BasicBeliefState<Scalar> posterior_update(const BasicBeliefState<Scalar>& belief,
                                          const BasicTransitionKernel<Scalar>& kernel,
                                          const Eigen::MatrixBase<Derived>& likelihoods) {
  if (likelihoods.size() != belief.size() || kernel.num_states() != belief.size()) {
    throw std::invalid_argument("posterior_update: dimension mismatch");
  }
  if ((likelihoods.array() < Scalar(0)).any() || !likelihoods.allFinite()) {
    throw std::invalid_argument("posterior_update: likelihoods must be finite and non-negative");
  }
  VectorX<Scalar> weighted = belief.probs().cwiseProduct(likelihoods.template cast<Scalar>());
  if (!(weighted.sum() > Scalar(0))) throw DegenerateEvidence("posterior mass vanished on every state");
  VectorX<Scalar> next = kernel.matrix().transpose() * weighted;
  return BasicBeliefState<Scalar>::normalized(std::move(next));
}

/// Same update from log-likelihoods; the per-step maximum is subtracted before
/// exponentiating so very narrow reward distributions cannot underflow every state.
template <typename Scalar, typename Derived>
BasicBeliefState<Scalar> posterior_update_log(const BasicBeliefState<Scalar>& belief,
                                              const BasicTransitionKernel<Scalar>& kernel,
                                              const Eigen::MatrixBase<Derived>& log_likelihoods) {
  if (log_likelihoods.size() != belief.size()) throw std::invalid_argument("posterior_update_log: dimension mismatch");
  Scalar peak = -std::numeric_limits<Scalar>::infinity();
  for (Index s = 0; s < belief.size(); ++s) {
    if (belief[s] > Scalar(0)) peak = std::max(peak, Scalar(log_likelihoods(s)));
  }
  if (!std::isfinite(peak)) throw DegenerateEvidence("no supported state has finite likelihood");
  VectorX<Scalar> lik = (log_likelihoods.template cast<Scalar>().array() - peak).exp().matrix();
  return posterior_update(belief, kernel, lik);
}

/// Observation log-likelihood of `reward` under every state for one arm.
template <typename Scalar>
VectorX<Scalar> reward_log_likelihoods(const BasicRewardModel<Scalar>& model, Index arm, Index context, Scalar reward) {
  VectorX<Scalar> out(model.num_states());
  for (Index s = 0; s < model.num_states(); ++s) {
    out(s) = gaussian_log_likelihood(reward, model.mean(arm, context, s), model.std(arm, context, s));
  }
  return out;
}

/// Live filter step for an observed reward. When every supported state assigns
/// the reward zero density the belief is only propagated through the kernel.
template <typename Scalar>
BasicBeliefState<Scalar> filter_reward(const BasicBeliefState<Scalar>& belief, const BasicTransitionKernel<Scalar>& kernel,
                                       const BasicRewardModel<Scalar>& model, Index arm, Index context, Scalar reward) {
  try {
    return posterior_update_log(belief, kernel, reward_log_likelihoods(model, arm, context, reward));
  } catch (const DegenerateEvidence&) {
    return propagate(belief, kernel);
  }
}

/// Shannon entropy in bits with 0 log 0 := 0.
template <typename Scalar>
Scalar entropy(const BasicBeliefState<Scalar>& belief) {
  Scalar h = Scalar(0);
  for (Index s = 0; s < belief.size(); ++s) {
    const Scalar p = belief[s];
    if (p > Scalar(0)) h -= p * std::log2(p);
  }
  return std::max(h, Scalar(0));
}

// ---------------------------------------------------------------------------
// Information-arm statistics
// ---------------------------------------------------------------------------

template <typename Scalar>
struct BasicInfoArmStats {
  VectorX<Scalar> mean_kl;
  VectorX<Scalar> mean_gap;
  VectorX<Scalar> ratio;  // +inf for free informative arms, NaN for excluded arms
};
using InfoArmStats = BasicInfoArmStats<double>;

/// Mean divergence of `arm` against every other arm in `arms`, averaged over
/// contexts and states with the 1/|X|, 1/|S|, 1/|A| normalization (the inner
/// sum has |A|-1 terms). The divergence is taken from the other arm's reward
/// distribution to the candidate's, KL(other || arm), so precise arms score high.
template <typename Scalar>
Scalar mean_pairwise_kl(const BasicRewardModel<Scalar>& model, Index arm, std::span<const Index> arms) {
  const Scalar norm = Scalar(1) / (Scalar(model.num_contexts()) * Scalar(model.num_states()) * Scalar(arms.size()));
  Scalar total = Scalar(0);
  for (Index x = 0; x < model.num_contexts(); ++x) {
    for (Index s = 0; s < model.num_states(); ++s) {
      const Scalar mi = model.mean(arm, x, s);
      const Scalar si = model.std(arm, x, s);
      for (Index other : arms) {
        if (other == arm) continue;
        total += gaussian_kl(model.mean(other, x, s), model.std(other, x, s), mi, si);
      }
    }
  }
  return total * norm;
}

template <typename Scalar>
Scalar mean_pairwise_kl(const BasicRewardModel<Scalar>& model, Index arm) {
  const auto arms = all_arms(model);
  return mean_pairwise_kl(model, arm, std::span<const Index>(arms));
}

/// Mean signed reward gap of `arm` over every other arm, same normalization as mean_pairwise_kl.
template <typename Scalar>
Scalar mean_pairwise_gap(const BasicRewardModel<Scalar>& model, Index arm, std::span<const Index> arms) {
  const Scalar norm = Scalar(1) / (Scalar(model.num_contexts()) * Scalar(model.num_states()) * Scalar(arms.size()));
  Scalar total = Scalar(0);
  for (Index x = 0; x < model.num_contexts(); ++x) {
    for (Index s = 0; s < model.num_states(); ++s) {
      const Scalar mi = model.mean(arm, x, s);
      for (Index other : arms) {
        if (other == arm) continue;
        total += mi - model.mean(other, x, s);
      }
    }
  }
  return total * norm;
}

template <typename Scalar>
Scalar mean_pairwise_gap(const BasicRewardModel<Scalar>& model, Index arm) {
  const auto arms = all_arms(model);
  return mean_pairwise_gap(model, arm, std::span<const Index>(arms));
}

/// Arm maximizing mean_kl / mean_gap^2 over `arms`. Stats are indexed by position in `arms`.
/// A zero gap counts as +inf when the arm is informative and is skipped otherwise.
/// Ties go to the earliest position; if every arm is skipped the first arm is returned.
template <typename Scalar>
std::pair<Index, BasicInfoArmStats<Scalar>> best_info_arm(const BasicRewardModel<Scalar>& model,
                                                          std::span<const Index> arms) {
  const Index n = static_cast<Index>(arms.size());
  BasicInfoArmStats<Scalar> stats{VectorX<Scalar>(n), VectorX<Scalar>(n), VectorX<Scalar>(n)};
  Index best = -1;
  for (Index i = 0; i < n; ++i) {
    const Scalar kl = mean_pairwise_kl(model, arms[static_cast<std::size_t>(i)], arms);
    const Scalar gap = mean_pairwise_gap(model, arms[static_cast<std::size_t>(i)], arms);
    stats.mean_kl(i) = kl;
    stats.mean_gap(i) = gap;
    if (gap != Scalar(0)) {
      stats.ratio(i) = kl / (gap * gap);
    } else if (kl > Scalar(0)) {
      stats.ratio(i) = std::numeric_limits<Scalar>::infinity();
    } else {
      stats.ratio(i) = std::numeric_limits<Scalar>::quiet_NaN();
      continue;
    }
    if (best < 0 || stats.ratio(i) > stats.ratio(best)) best = i;
  }
  if (best < 0) best = 0;
  return {arms[static_cast<std::size_t>(best)], std::move(stats)};
}

template <typename Scalar>
std::pair<Index, BasicInfoArmStats<Scalar>> best_info_arm(const BasicRewardModel<Scalar>& model) {
  const auto arms = all_arms(model);
  return best_info_arm(model, std::span<const Index>(arms));
}

/// Largest per-state spread between the best and worst arm, maximized over states and contexts.
template <typename Scalar>
Scalar single_step_regret_bound(const BasicRewardModel<Scalar>& model, std::span<const Index> arms) {
  Scalar bound = Scalar(0);
  for (Index x = 0; x < model.num_contexts(); ++x) {
    for (Index s = 0; s < model.num_states(); ++s) {
      Scalar hi = -std::numeric_limits<Scalar>::infinity();
      Scalar lo = std::numeric_limits<Scalar>::infinity();
      for (Index a : arms) {
        hi = std::max(hi, model.mean(a, x, s));
        lo = std::min(lo, model.mean(a, x, s));
      }
      bound = std::max(bound, hi - lo);
    }
  }
  return bound;
}

template <typename Scalar>
Scalar single_step_regret_bound(const BasicRewardModel<Scalar>& model) {
  const auto arms = all_arms(model);
  return single_step_regret_bound(model, std::span<const Index>(arms));
}

/// Belief-weighted geometric dwell time sum_s P(s) / (1 - K(s, s)).
/// Absorbing states contribute `cap`; the total is capped at `cap`.
template <typename Scalar>
Scalar expected_dwell_time(const BasicTransitionKernel<Scalar>& kernel, const BasicBeliefState<Scalar>& belief,
                           Scalar cap) {
  Scalar total = Scalar(0);
  for (Index s = 0; s < belief.size(); ++s) {
    if (belief[s] == Scalar(0)) continue;
    const Scalar leave = Scalar(1) - kernel(s, s);
    const Scalar dwell = leave > Scalar(0) ? std::min(Scalar(1) / leave, cap) : cap;
    total += belief[s] * dwell;
  }
  return std::min(total, cap);
}

}  // namespace latentbandit
