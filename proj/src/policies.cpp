#include "latentbandit/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "latentbandit/two_state.hpp"

namespace latentbandit {
namespace {

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

bool same_arms(const std::vector<Index>& cached, std::span<const Index> arms) {
  return cached.size() == arms.size() && std::equal(cached.begin(), cached.end(), arms.begin());
}

bool offered(std::span<const Index> arms, Index arm) { return std::find(arms.begin(), arms.end(), arm) != arms.end(); }

double mean_best_arm_std(const RewardModel& model) {
  const auto arms = all_arms(model);
  double total = 0.0;
  for (Index s = 0; s < model.num_states(); ++s) total += model.std(best_arm(model, 0, s, arms), 0, s);
  return total / static_cast<double>(model.num_states());
}

Index default_info_arm(const RewardModel& model) { return best_info_arm(model).first; }

}  // namespace

Index sample_state(const BeliefState& belief, double u) {
  double cumulative = 0.0;
  Index last = 0;
  for (Index s = 0; s < belief.size(); ++s) {
    if (belief[s] <= 0.0) continue;
    cumulative += belief[s];
    last = s;
    if (u < cumulative) return s;
  }
  return last;
}

std::vector<Index> state_best_arms(const RewardModel& model, Index context, std::span<const Index> arms) {
  std::vector<Index> out(static_cast<std::size_t>(model.num_states()));
  for (Index s = 0; s < model.num_states(); ++s) out[static_cast<std::size_t>(s)] = best_arm(model, context, s, arms);
  return out;
}

// ---------------------------------------------------------------------------

BeliefPolicy::BeliefPolicy(PolicyProblem problem, std::uint64_t seed)
    : problem_(std::move(problem)), belief_(problem_.prior), rng_(seed) {}

void BeliefPolicy::observe(const StepInput& step, Index arm, double reward) {
  belief_ = filter_reward(belief_, *problem_.kernel, *problem_.model, arm, step.context, reward);
}

MtsPolicy::MtsPolicy(PolicyProblem problem, std::uint64_t seed, bool greedy)
    : BeliefPolicy(std::move(problem), seed), greedy_(greedy) {}

Index MtsPolicy::select(const StepInput& step) {
  const Index s = greedy_ ? belief_.argmax() : sample_state(belief_, uniform01(rng_));
  return best_arm(*problem_.model, step.context, s, step.arms);
}

AgemtsPolicy::AgemtsPolicy(PolicyProblem problem, std::uint64_t seed, AgemtsOptions options)
    : BeliefPolicy(std::move(problem), seed), options_(options) {}

Index AgemtsPolicy::select(const StepInput& step) {
  const RewardModel& model = *problem_.model;
  last_info_ = false;
  last_delta_ = 0.0;
  const Index greedy = best_arm(model, step.context, belief_.argmax(), step.arms);
  if (entropy(belief_) < options_.entropy_threshold) return greedy;

  if (!same_arms(cached_arms_, step.arms)) {
    cached_arms_.assign(step.arms.begin(), step.arms.end());
    cached_info_ = best_info_arm(model, step.arms).first;
    cached_bound_ = single_step_regret_bound(model, step.arms);
  }
  if (cached_info_ == greedy) return greedy;

  RolloutOptions rollout;
  rollout.entropy_threshold = options_.entropy_threshold;
  rollout.arm_rule = options_.arm_rule;
  const int remaining = std::max(1, problem_.horizon - step.time);
  const RolloutResult r = reward_estimator(belief_, model, *problem_.kernel, step.context, step.arms, greedy,
                                           cached_info_, cached_bound_, remaining, rollout);
  ++counters_.rollouts;
  last_delta_ = r.reward_ig - r.reward_ps;
  if (last_delta_ > 0.0 && last_delta_ > cached_bound_) {
    last_info_ = true;
    ++counters_.info_pulls;
    return cached_info_;
  }
  return greedy;
}

// ---------------------------------------------------------------------------

ExploreCommitPolicy::ExploreCommitPolicy(PolicyProblem problem, Index info_arm, int n_e)
    : problem_(std::move(problem)), info_arm_(info_arm), n_e_(n_e) {
  if (n_e_ < 0) throw ConfigError("explore_commit: n_e must be non-negative");
  if (n_e_ == 0) committed_ = problem_.prior.argmax();
}

void ExploreCommitPolicy::commit() {
  const double avg = sum_ / static_cast<double>(pulls_);
  const RewardModel& model = *problem_.model;
  Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Index s = 0; s < model.num_states(); ++s) {
    const double d = std::abs(avg - model.mean(info_arm_, 0, s));
    if (d < best_dist) {
      best_dist = d;
      best = s;
    }
  }
  committed_ = best;
}

Index ExploreCommitPolicy::select(const StepInput& step) {
  last_info_ = committed_ < 0 && offered(step.arms, info_arm_);
  if (last_info_) {
    ++counters_.info_pulls;
    return info_arm_;
  }
  const Index s = committed_ < 0 ? problem_.prior.argmax() : committed_;
  return best_arm(*problem_.model, step.context, s, step.arms);
}

void ExploreCommitPolicy::observe(const StepInput&, Index arm, double reward) {
  if (committed_ >= 0 || arm != info_arm_) return;
  sum_ += reward;
  if (++pulls_ >= n_e_) commit();
}

ExploreThenPsPolicy::ExploreThenPsPolicy(PolicyProblem problem, std::uint64_t seed, Index info_arm, int tau)
    : BeliefPolicy(std::move(problem), seed), info_arm_(info_arm), tau_(tau) {
  if (tau_ < 0) throw ConfigError("explore_then_ps: tau must be non-negative");
}

Index ExploreThenPsPolicy::select(const StepInput& step) {
  last_info_ = step.time < tau_ && offered(step.arms, info_arm_);
  if (last_info_) {
    ++counters_.info_pulls;
    return info_arm_;
  }
  return best_arm(*problem_.model, step.context, sample_state(belief_, uniform01(rng_)), step.arms);
}

// ---------------------------------------------------------------------------

ChangeDetectMetaPolicy::ChangeDetectMetaPolicy(PolicyProblem problem, std::uint64_t seed, Rule rule, int window,
                                               double threshold, double scale)
    : problem_(std::move(problem)), rng_(seed), rule_(rule), scale_(scale) {
  noise_ = mean_best_arm_std(*problem_.model);
  const auto states = static_cast<std::size_t>(problem_.model->num_states());
  detectors_.assign(states, ScalarChangeDetector(window, threshold));
  reset();
}

void ChangeDetectMetaPolicy::reset() {
  const auto states = static_cast<std::size_t>(problem_.model->num_states());
  pulls_.assign(states, 0);
  sums_.assign(states, 0.0);
  for (auto& d : detectors_) d.clear();
  since_reset_ = 0;
}

Index ChangeDetectMetaPolicy::select(const StepInput& step) {
  const auto best = state_best_arms(*problem_.model, step.context, step.arms);
  Index choice = -1;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < best.size(); ++m) {
    if (pulls_[m] == 0) {
      choice = static_cast<Index>(m);
      break;
    }
    const double n = static_cast<double>(pulls_[m]);
    const double mean = sums_[m] / n;
    double score;
    if (rule_ == Rule::kUcb) {
      score = mean + scale_ * noise_ * std::sqrt(2.0 * std::log(static_cast<double>(since_reset_) + 1.0) / n);
    } else {
      score = mean + scale_ * noise_ / std::sqrt(n) * std::normal_distribution<double>(0.0, 1.0)(rng_);
    }
    if (score > top) {
      top = score;
      choice = static_cast<Index>(m);
    }
  }
  chosen_meta_ = choice;
  return best[static_cast<std::size_t>(choice)];
}

void ChangeDetectMetaPolicy::observe(const StepInput&, Index, double reward) {
  const auto m = static_cast<std::size_t>(chosen_meta_);
  ++pulls_[m];
  sums_[m] += reward;
  ++since_reset_;
  if (detectors_[m].push(reward)) {
    ++counters_.resets;
    reset();
  }
}

ChangeDetectLinearPolicy::ChangeDetectLinearPolicy(PolicyProblem problem, std::uint64_t seed, Rule rule, int window,
                                                   double threshold, double scale, double ridge)
    : problem_(std::move(problem)),
      rng_(seed),
      rule_(rule),
      scale_(scale),
      ridge_(ridge),
      dim_(problem_.model->has_features() ? problem_.model->features().cols() : problem_.model->num_arms()),
      detector_(window, threshold, dim_) {
  if (!(ridge_ > 0.0)) throw ConfigError("linear policies need ridge > 0");
  reset();
}

Eigen::VectorXd ChangeDetectLinearPolicy::feature(Index arm) const {
  if (problem_.model->has_features()) return problem_.model->features().row(arm).transpose();
  return Eigen::VectorXd::Unit(dim_, arm);
}

void ChangeDetectLinearPolicy::reset() {
  a_inv_ = Eigen::MatrixXd::Identity(dim_, dim_) / ridge_;
  b_ = Eigen::VectorXd::Zero(dim_);
  detector_.clear();
}

Index ChangeDetectLinearPolicy::select(const StepInput& step) {
  Eigen::VectorXd theta = a_inv_ * b_;
  if (rule_ == Rule::kThompson) {
    Eigen::LLT<Eigen::MatrixXd> llt(a_inv_);
    Eigen::VectorXd z(dim_);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < dim_; ++i) z(i) = normal(rng_);
    const Eigen::VectorXd draw = llt.matrixL() * z;
    theta += scale_ * draw;
  }
  Index choice = step.arms.front();
  double top = -std::numeric_limits<double>::infinity();
  for (Index a : step.arms) {
    const Eigen::VectorXd x = feature(a);
    double score = x.dot(theta);
    if (rule_ == Rule::kUcb) score += scale_ * std::sqrt(std::max(0.0, x.dot(a_inv_ * x)));
    if (score > top) {
      top = score;
      choice = a;
    }
  }
  return choice;
}

void ChangeDetectLinearPolicy::observe(const StepInput&, Index arm, double reward) {
  const Eigen::VectorXd x = feature(arm);
  const Eigen::VectorXd ax = a_inv_ * x;
  a_inv_ -= ax * ax.transpose() / (1.0 + x.dot(ax));
  b_ += reward * x;
  if (detector_.push(x, reward)) {
    ++counters_.resets;
    reset();
  }
}

Exp4sPolicy::Exp4sPolicy(PolicyProblem problem, std::uint64_t seed, double learning_rate, double weight_floor)
    : problem_(std::move(problem)), rng_(seed), learning_rate_(learning_rate), weight_floor_(weight_floor) {
  const Index experts = problem_.model->num_states();
  weights_ = Eigen::VectorXd::Constant(experts, 1.0 / static_cast<double>(experts));
}

Index Exp4sPolicy::select(const StepInput& step) {
  const auto advice = state_best_arms(*problem_.model, step.context, step.arms);
  const Index e = sample_state(BeliefState::normalized(weights_), uniform01(rng_));
  return advice[static_cast<std::size_t>(e)];
}

void Exp4sPolicy::observe(const StepInput& step, Index arm, double reward) {
  const auto advice = state_best_arms(*problem_.model, step.context, step.arms);
  Eigen::VectorXd agree(weights_.size());
  for (Index e = 0; e < weights_.size(); ++e) agree(e) = advice[static_cast<std::size_t>(e)] == arm ? 1.0 : 0.0;
  weights_ = exp4s_update(weights_, agree, reward, learning_rate_, weight_floor_);
}

MucbPolicy::MucbPolicy(PolicyProblem problem) : problem_(std::move(problem)) {
  residual_ = Eigen::MatrixXd::Zero(problem_.model->num_states(), problem_.model->num_arms());
  pulls_ = Eigen::VectorXd::Zero(problem_.model->num_arms());
}

std::vector<Index> MucbPolicy::surviving_states(long t) const {
  const RewardModel& model = *problem_.model;
  const double log_term = std::log(std::max(1.0, static_cast<double>(t) * static_cast<double>(t)) *
                                   static_cast<double>(model.num_arms()));
  std::vector<Index> alive;
  for (Index s = 0; s < model.num_states(); ++s) {
    bool ok = true;
    for (Index a = 0; a < model.num_arms() && ok; ++a) {
      if (pulls_(a) == 0.0) continue;
      const double sigma = model.std(a, 0, s);
      const double width = std::sqrt(2.0 * sigma * sigma * log_term / pulls_(a));
      ok = std::abs(residual_(s, a) / pulls_(a)) <= width;
    }
    if (ok) alive.push_back(s);
  }
  return alive;
}

Index MucbPolicy::select(const StepInput& step) {
  auto alive = surviving_states(t_ + 1);
  if (alive.empty()) {
    ++counters_.resets;
    residual_.setZero();
    pulls_.setZero();
    alive = surviving_states(t_ + 1);
  }
  const RewardModel& model = *problem_.model;
  Index choice = step.arms.front();
  double top = -std::numeric_limits<double>::infinity();
  for (Index a : step.arms) {
    for (Index s : alive) {
      if (model.mean(a, step.context, s) > top) {
        top = model.mean(a, step.context, s);
        choice = a;
      }
    }
  }
  return choice;
}

void MucbPolicy::observe(const StepInput& step, Index arm, double reward) {
  ++t_;
  pulls_(arm) += 1.0;
  for (Index s = 0; s < problem_.model->num_states(); ++s) {
    residual_(s, arm) += reward - problem_.model->mean(arm, step.context, s);
  }
}

Index OraclePolicy::select(const StepInput& step) { return best_arm(*problem_.model, step.context, state_, step.arms); }

Index UniformPolicy::select(const StepInput& step) {
  std::uniform_int_distribution<std::size_t> pick(0, step.arms.size() - 1);
  return step.arms[pick(rng_)];
}

// ---------------------------------------------------------------------------
// Factory
// ---------------------------------------------------------------------------

namespace {

template <typename T>
T param(const nlohmann::json& params, const char* key, T fallback) {
  if (!params.contains(key) || params.at(key).is_null()) return fallback;
  try {
    return params.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy parameter '") + key + "': " + e.what());
  }
}

const std::vector<std::string> kNames = {"mts",    "agemts", "explore_commit", "explore_then_ps", "cducb", "cdts",
                                         "cd_linucb", "cd_lints", "exp4s", "mucb", "oracle", "uniform"};

// Allowed keys per policy; anything else is a config error.
std::vector<std::string> allowed_keys(const std::string& name) {
  if (name == "mts") return {"greedy"};
  if (name == "agemts") return {"entropy_threshold", "rollout_arm_rule"};
  if (name == "explore_commit") return {"info_arm", "n_e", "z_alpha", "z_beta"};
  if (name == "explore_then_ps") return {"info_arm", "tau"};
  if (name == "cducb" || name == "cdts") return {"window", "threshold", "scale"};
  if (name == "cd_linucb" || name == "cd_lints") return {"window", "threshold", "scale", "ridge"};
  if (name == "exp4s") return {"learning_rate", "weight_floor"};
  return {};
}

}  // namespace

const std::vector<std::string>& policy_names() { return kNames; }

void validate_policy_spec(const PolicySpec& spec) {
  if (std::find(kNames.begin(), kNames.end(), spec.name) == kNames.end()) {
    throw ConfigError("unknown policy '" + spec.name + "'");
  }
  if (!spec.params.is_object()) throw ConfigError("policy '" + spec.name + "' params must be an object");
  const auto keys = allowed_keys(spec.name);
  for (const auto& [key, value] : spec.params.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("policy '" + spec.name + "' has no parameter '" + key + "'");
    }
  }
  if (spec.name == "agemts") {
    const auto rule = param<std::string>(spec.params, "rollout_arm_rule", "sampled");
    if (rule != "sampled" && rule != "greedy") throw ConfigError("rollout_arm_rule must be 'sampled' or 'greedy'");
  }
  if (spec.params.contains("window")) {
    const int window = param(spec.params, "window", 0);
    if (window < 2 || window % 2 != 0) throw ConfigError("policy '" + spec.name + "': window must be even and >= 2");
  }
}

nlohmann::json effective_params(const PolicySpec& spec, const PolicyProblem& problem) {
  validate_policy_spec(spec);
  nlohmann::json p = spec.params;
  const RewardModel& model = *problem.model;
  const double states = static_cast<double>(model.num_states());
  const double horizon = static_cast<double>(std::max(problem.horizon, 1));
  auto fill = [&](const char* key, auto value) {
    if (!p.contains(key) || p.at(key).is_null()) p[key] = value;
  };

  if (spec.name == "mts") {
    fill("greedy", false);
  } else if (spec.name == "agemts") {
    fill("entropy_threshold", 1.0);
    fill("rollout_arm_rule", "sampled");
  } else if (spec.name == "explore_commit") {
    fill("info_arm", default_info_arm(model));
    fill("z_alpha", 1.96);
    fill("z_beta", 0.84);
    if (!p.contains("n_e") || p.at("n_e").is_null()) {
      // Smallest state separation of the info arm against its largest std.
      const Index info = param<Index>(p, "info_arm", 0);
      double delta = std::numeric_limits<double>::infinity();
      double sigma = 0.0;
      for (Index s = 0; s < model.num_states(); ++s) {
        sigma = std::max(sigma, model.std(info, 0, s));
        for (Index u = s + 1; u < model.num_states(); ++u) {
          delta = std::min(delta, std::abs(model.mean(info, 0, s) - model.mean(info, 0, u)));
        }
      }
      p["n_e"] = explore_commit_sample_size(delta, sigma, sigma, param(p, "z_alpha", 1.96), param(p, "z_beta", 0.84));
    }
  } else if (spec.name == "explore_then_ps") {
    fill("info_arm", default_info_arm(model));
    if (!p.contains("tau") || p.at("tau").is_null()) {
      if (model.num_states() != 2) throw ConfigError("explore_then_ps: tau must be given for models without two states");
      p["tau"] = explore_then_ps_plan(model, param<Index>(p, "info_arm", 0), problem.horizon, problem.prior[0]).tau;
    }
  } else if (spec.name == "cducb" || spec.name == "cdts") {
    fill("window", 50);
    fill("threshold", 3.0 * mean_best_arm_std(model) * std::sqrt(param(p, "window", 50.0)));
    fill("scale", 1.0);
  } else if (spec.name == "cd_linucb" || spec.name == "cd_lints") {
    const double dim = static_cast<double>(model.has_features() ? model.features().cols() : model.num_arms());
    fill("window", 50);
    fill("threshold", 3.0 * mean_best_arm_std(model) * std::sqrt(4.0 * dim / param(p, "window", 50.0)));
    fill("scale", mean_best_arm_std(model));
    fill("ridge", 1.0);
  } else if (spec.name == "exp4s") {
    fill("learning_rate", std::sqrt(std::log(states) / horizon));
    fill("weight_floor", 1.0 / std::sqrt(states * horizon));
  }
  return p;
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const PolicyProblem& problem, std::uint64_t seed) {
  const nlohmann::json p = effective_params(spec, problem);

  if (spec.name == "mts") return std::make_unique<MtsPolicy>(problem, seed, param(p, "greedy", false));
  if (spec.name == "agemts") {
    AgemtsOptions o;
    o.entropy_threshold = param(p, "entropy_threshold", 1.0);
    o.arm_rule = param<std::string>(p, "rollout_arm_rule", "sampled") == "greedy" ? RolloutArmRule::kGreedy
                                                                                  : RolloutArmRule::kSampledExpectation;
    return std::make_unique<AgemtsPolicy>(problem, seed, o);
  }
  if (spec.name == "explore_commit") {
    return std::make_unique<ExploreCommitPolicy>(problem, param<Index>(p, "info_arm", 0), param(p, "n_e", 0));
  }
  if (spec.name == "explore_then_ps") {
    return std::make_unique<ExploreThenPsPolicy>(problem, seed, param<Index>(p, "info_arm", 0), param(p, "tau", 0));
  }
  if (spec.name == "cducb" || spec.name == "cdts") {
    const auto rule = spec.name == "cducb" ? ChangeDetectMetaPolicy::Rule::kUcb : ChangeDetectMetaPolicy::Rule::kThompson;
    return std::make_unique<ChangeDetectMetaPolicy>(problem, seed, rule, param(p, "window", 50),
                                                    param(p, "threshold", 0.0), param(p, "scale", 1.0));
  }
  if (spec.name == "cd_linucb" || spec.name == "cd_lints") {
    const auto rule =
        spec.name == "cd_linucb" ? ChangeDetectLinearPolicy::Rule::kUcb : ChangeDetectLinearPolicy::Rule::kThompson;
    return std::make_unique<ChangeDetectLinearPolicy>(problem, seed, rule, param(p, "window", 50),
                                                      param(p, "threshold", 0.0), param(p, "scale", 1.0),
                                                      param(p, "ridge", 1.0));
  }
  if (spec.name == "exp4s") {
    return std::make_unique<Exp4sPolicy>(problem, seed, param(p, "learning_rate", 0.1), param(p, "weight_floor", 0.0));
  }
  if (spec.name == "mucb") return std::make_unique<MucbPolicy>(problem);
  if (spec.name == "oracle") return std::make_unique<OraclePolicy>(problem);
  return std::make_unique<UniformPolicy>(seed);
}

}  // namespace latentbandit
