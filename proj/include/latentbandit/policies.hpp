#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentbandit/belief.hpp"
#include "latentbandit/change_detection.hpp"
#include "latentbandit/rollout.hpp"

namespace latentbandit {

/// Raised for invalid policy names or parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What every policy knows about the problem: the reward model, the transition
/// kernel, the prior over the first state and the run length.
struct PolicyProblem {
  std::shared_ptr<const RewardModel> model;
  std::shared_ptr<const TransitionKernel> kernel;
  BeliefState prior;
  int horizon = 1;
};

struct StepInput {
  int time = 0;  // 0-based
  Index context = 0;
  std::span<const Index> arms;
};

struct PolicyCounters {
  long rollouts = 0;
  long info_pulls = 0;
  long resets = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual Index select(const StepInput& step) = 0;
  virtual void observe(const StepInput& step, Index arm, double reward) = 0;

  /// Only the oracle uses this; it is called before select.
  virtual void reveal_state(Index) {}
  /// Current belief for belief-based policies, nullptr otherwise.
  virtual const BeliefState* belief() const { return nullptr; }
  /// True when the last selection was an information-gathering pull.
  bool last_was_info() const { return last_info_; }
  const PolicyCounters& counters() const { return counters_; }

 protected:
  bool last_info_ = false;
  PolicyCounters counters_;
};

struct PolicySpec {
  std::string name;
  std::string label;  // defaults to name
  nlohmann::json params = nlohmann::json::object();

  const std::string& display() const { return label.empty() ? name : label; }
};

/// Index of the state picked by inverse-CDF sampling with uniform draw u in [0, 1).
Index sample_state(const BeliefState& belief, double u);

/// Parameters with every default filled in, as recorded in run metadata.
nlohmann::json effective_params(const PolicySpec& spec, const PolicyProblem& problem);
std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const PolicyProblem& problem, std::uint64_t seed);
const std::vector<std::string>& policy_names();
/// Throws ConfigError for unknown names or malformed parameters.
void validate_policy_spec(const PolicySpec& spec);

// ---------------------------------------------------------------------------
// Concrete policies, exposed for direct use in tests and tools.
// ---------------------------------------------------------------------------

class BeliefPolicy : public Policy {
 public:
  BeliefPolicy(PolicyProblem problem, std::uint64_t seed);
  const BeliefState* belief() const override { return &belief_; }
  void observe(const StepInput& step, Index arm, double reward) override;

 protected:
  PolicyProblem problem_;
  BeliefState belief_;
  std::mt19937_64 rng_;
};

/// Model-based Thompson sampling; `greedy` plays the belief's argmax state instead.
class MtsPolicy : public BeliefPolicy {
 public:
  MtsPolicy(PolicyProblem problem, std::uint64_t seed, bool greedy = false);
  Index select(const StepInput& step) override;

 private:
  bool greedy_;
};

struct AgemtsOptions {
  double entropy_threshold = 1.0;
  RolloutArmRule arm_rule = RolloutArmRule::kSampledExpectation;
};

/// Greedy-belief policy that switches to the information arm when a roll-out
/// predicts a gain above the single-step regret bound.
class AgemtsPolicy : public BeliefPolicy {
 public:
  AgemtsPolicy(PolicyProblem problem, std::uint64_t seed, AgemtsOptions options = {});
  Index select(const StepInput& step) override;

  double last_delta() const { return last_delta_; }

 private:
  AgemtsOptions options_;
  std::vector<Index> cached_arms_;
  Index cached_info_ = -1;
  double cached_bound_ = 0.0;
  double last_delta_ = 0.0;
};

/// Plays the information arm n_e times, then commits to the state whose mean
/// for that arm is nearest the sample average.
class ExploreCommitPolicy : public Policy {
 public:
  ExploreCommitPolicy(PolicyProblem problem, Index info_arm, int n_e);
  Index select(const StepInput& step) override;
  void observe(const StepInput& step, Index arm, double reward) override;

  int budget() const { return n_e_; }
  Index committed_state() const { return committed_; }

 private:
  void commit();

  PolicyProblem problem_;
  Index info_arm_;
  int n_e_;
  int pulls_ = 0;
  double sum_ = 0.0;
  Index committed_ = -1;
};

/// Plays the information arm tau times while filtering, then posterior sampling.
class ExploreThenPsPolicy : public BeliefPolicy {
 public:
  ExploreThenPsPolicy(PolicyProblem problem, std::uint64_t seed, Index info_arm, int tau);
  Index select(const StepInput& step) override;
  int tau() const { return tau_; }

 private:
  Index info_arm_;
  int tau_;
};

/// Entry s is the best offered arm of state s.
std::vector<Index> state_best_arms(const RewardModel& model, Index context, std::span<const Index> arms);

/// UCB or Gaussian Thompson sampling over per-state meta-arms with a scalar
/// change detector on each meta-arm that resets all statistics.
class ChangeDetectMetaPolicy : public Policy {
 public:
  enum class Rule { kUcb, kThompson };
  ChangeDetectMetaPolicy(PolicyProblem problem, std::uint64_t seed, Rule rule, int window, double threshold,
                         double scale);
  Index select(const StepInput& step) override;
  void observe(const StepInput& step, Index arm, double reward) override;

 private:
  void reset();

  PolicyProblem problem_;
  std::mt19937_64 rng_;
  Rule rule_;
  double scale_;
  double noise_;
  std::vector<long> pulls_;
  std::vector<double> sums_;
  std::vector<ScalarChangeDetector> detectors_;
  long since_reset_ = 0;
  Index chosen_meta_ = 0;
};

/// LinUCB or LinTS on arm features with a windowed regression-drift detector.
class ChangeDetectLinearPolicy : public Policy {
 public:
  enum class Rule { kUcb, kThompson };
  ChangeDetectLinearPolicy(PolicyProblem problem, std::uint64_t seed, Rule rule, int window, double threshold,
                           double scale, double ridge);
  Index select(const StepInput& step) override;
  void observe(const StepInput& step, Index arm, double reward) override;

 private:
  Eigen::VectorXd feature(Index arm) const;
  void reset();

  PolicyProblem problem_;
  std::mt19937_64 rng_;
  Rule rule_;
  double scale_;
  double ridge_;
  Index dim_;
  Eigen::MatrixXd a_inv_;
  Eigen::VectorXd b_;
  LinearChangeDetector detector_;
};

/// Exponential weights over per-state experts with a weight floor.
class Exp4sPolicy : public Policy {
 public:
  Exp4sPolicy(PolicyProblem problem, std::uint64_t seed, double learning_rate, double weight_floor);
  Index select(const StepInput& step) override;
  void observe(const StepInput& step, Index arm, double reward) override;
  const Eigen::VectorXd& weights() const { return weights_; }

 private:
  PolicyProblem problem_;
  std::mt19937_64 rng_;
  double learning_rate_;
  double weight_floor_;
  Eigen::VectorXd weights_;
};

/// Stationary latent UCB: keeps the states whose means agree with every
/// played arm's residual average and plays the most optimistic arm over them.
class MucbPolicy : public Policy {
 public:
  explicit MucbPolicy(PolicyProblem problem);
  Index select(const StepInput& step) override;
  void observe(const StepInput& step, Index arm, double reward) override;
  std::vector<Index> surviving_states(long t) const;

 private:
  PolicyProblem problem_;
  Eigen::MatrixXd residual_;  // [state x arm] sums of r - mu(a, x, s)
  Eigen::VectorXd pulls_;     // per arm
  long t_ = 0;
};

class OraclePolicy : public Policy {
 public:
  explicit OraclePolicy(PolicyProblem problem) : problem_(std::move(problem)) {}
  void reveal_state(Index s) override { state_ = s; }
  Index select(const StepInput& step) override;
  void observe(const StepInput&, Index, double) override {}

 private:
  PolicyProblem problem_;
  Index state_ = 0;
};

class UniformPolicy : public Policy {
 public:
  explicit UniformPolicy(std::uint64_t seed) : rng_(seed) {}
  Index select(const StepInput& step) override;
  void observe(const StepInput&, Index, double) override {}

 private:
  std::mt19937_64 rng_;
};

}  // namespace latentbandit
