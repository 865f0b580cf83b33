#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentbandit/datasets.hpp"
#include "latentbandit/environments.hpp"
#include "latentbandit/policies.hpp"

namespace latentbandit {

struct EnvironmentConfig {
  /// Model source: {"reference": name, ...}, {"family": {...}}, {"file": path},
  /// {"inline": model document} or {"dataset": dataset config, "per_run_super_user": bool}.
  nlohmann::json model = {{"reference", "two_state"}};
  /// Transition graph; ignored when `transition` is set or the model file carries one.
  TransitionGraphSpec graph;
  std::optional<Eigen::MatrixXd> transition;
  /// "uniform", "root" or an explicit probability vector.
  nlohmann::json initial = "uniform";
  /// Policy prior over the first state; null means the same as `initial`.
  nlohmann::json prior = nullptr;
  std::vector<int> schedule;
  int schedule_every = 0;  // expands to a periodic schedule when > 0
  Index arm_set_size = 0;  // 0 offers every arm
};

struct SweepAxis {
  std::string path;  // JSON pointer into the config document
  std::vector<nlohmann::json> values;
};

struct OutputConfig {
  std::string dir;  // empty: $LBL_OUT_DIR/<name>, else out/<name>
  bool traces = true;
  int bootstrap = 0;  // resamples for the bootstrap band, 0 keeps the normal band
};

struct ExperimentConfig {
  std::string name = "experiment";
  int horizon = 1000;
  int num_runs = 100;
  std::uint64_t seed = 0;
  bool paired = true;
  int threads = 0;  // 0: hardware concurrency
  EnvironmentConfig environment;
  std::vector<PolicySpec> policies;
  std::vector<SweepAxis> sweep;
  OutputConfig output;
  std::string base_dir;  // resolves relative file paths; not serialized
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Throws ConfigError on schema or validation errors.
ExperimentConfig experiment_from_json(const nlohmann::json& doc, const std::string& base_dir = "");
ExperimentConfig load_experiment(const std::string& path);
void validate(const ExperimentConfig& config);

/// Everything a run needs once the config is resolved.
class ResolvedEnvironment {
 public:
  explicit ResolvedEnvironment(const ExperimentConfig& config);

  std::shared_ptr<const RewardModel> model_for_run(std::uint64_t run_seed) const;
  const std::shared_ptr<const TransitionKernel>& kernel() const { return kernel_; }
  const Eigen::VectorXd& initial() const { return initial_; }
  const BeliefState& prior() const { return prior_; }
  const std::vector<int>& schedule() const { return schedule_; }
  Index arm_set_size() const { return arm_set_size_; }
  Index num_arms() const { return base_model_->num_arms(); }
  bool per_run_model() const { return dataset_ != nullptr && per_run_; }
  const nlohmann::json& provenance() const { return provenance_; }

 private:
  std::shared_ptr<const RewardModel> base_model_;
  std::shared_ptr<const DatasetBuild> dataset_;
  bool per_run_ = false;
  std::uint64_t super_user_seed_ = 0;
  std::shared_ptr<const TransitionKernel> kernel_;
  Eigen::VectorXd initial_;
  BeliefState prior_;
  std::vector<int> schedule_;
  Index arm_set_size_ = 0;
  nlohmann::json provenance_;
};

/// Shared per-step randomness of one run: states, contexts, offered arms and
/// the standard-normal reward noise.
struct Trajectory {
  std::vector<Index> states;
  std::vector<Index> contexts;
  std::vector<std::vector<Index>> arm_sets;  // empty entry: every arm
  std::vector<double> noise;
};

Trajectory generate_trajectory(const ResolvedEnvironment& env, const RewardModel& model, int horizon,
                               std::uint64_t seed);

struct PolicyRun {
  std::string policy;
  int run = 0;
  std::uint64_t seed = 0;
  std::vector<Index> arms;
  std::vector<double> rewards;
  std::vector<double> regret;           // cumulative mean-gap regret
  std::vector<double> realized_regret;  // cumulative optimal mean minus realized reward
  std::vector<std::uint8_t> info;       // 1 when the pull was information gathering
  std::vector<Index> states;
  Eigen::VectorXd final_belief;         // empty for belief-free policies
  PolicyCounters counters;
  double seconds = 0.0;
};

/// Plays one policy along a fixed trajectory.
PolicyRun play(const PolicySpec& spec, const PolicyProblem& problem, const Trajectory& trajectory,
               std::uint64_t policy_seed);

struct RunResult {
  std::vector<std::string> policies;
  std::vector<std::vector<PolicyRun>> runs;  // [run][policy]
  nlohmann::json metadata;
};

/// seed for run r is config.seed + r.
RunResult run_experiment(const ExperimentConfig& config);
RunResult run_experiment(const ExperimentConfig& config, const ResolvedEnvironment& env);

struct RegretBand {
  std::vector<double> mean;
  std::vector<double> low;
  std::vector<double> high;
};

/// Pointwise mean and 95% band over runs; `bootstrap` > 0 switches to a
/// percentile bootstrap with that many resamples.
RegretBand bayes_regret(const std::vector<std::vector<double>>& curves, int bootstrap = 0, std::uint64_t seed = 0);
RegretBand bayes_regret(const RunResult& result, std::size_t policy, int bootstrap = 0);

struct SweepRow {
  std::vector<nlohmann::json> point;
  std::string policy;
  double final_mean = 0.0;
  double final_low = 0.0;
  double final_high = 0.0;
};

/// Cartesian product of the axes; a config without axes runs once.
std::vector<SweepRow> sweep(const ExperimentConfig& config);

std::string output_dir(const ExperimentConfig& config);
std::string aggregate_csv(const RunResult& result, int bootstrap = 0);
std::string plot_csv(const RunResult& result, int bootstrap = 0);
std::string traces_jsonl(const RunResult& result);
std::string sweep_csv(const ExperimentConfig& config, const std::vector<SweepRow>& rows);
/// Writes traces.jsonl, regret.csv, plot.csv and metadata.json; returns the directory.
std::string emit_outputs(const ExperimentConfig& config, const RunResult& result);

/// Named figure recipes.
const std::vector<std::string>& recipe_names();
ExperimentConfig recipe(const std::string& name);

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace latentbandit
