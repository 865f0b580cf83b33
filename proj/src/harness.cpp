#include "latentbandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "latentbandit/model_io.hpp"
#include "latentbandit/reference_models.hpp"

namespace latentbandit {
namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(a ^ splitmix(b));
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown field '" + key + "' in " + where);
    }
  }
}

template <typename T>
T field(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
  const fs::path candidate = fs::path(base_dir) / path;
  return fs::exists(candidate) ? candidate.string() : path;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

json to_json(const ExperimentConfig& c) {
  const auto& e = c.environment;
  json env = {
      {"model", e.model},
      {"graph",
       {{"kind", to_string(e.graph.kind)},
        {"num_states", e.graph.num_states},
        {"stay_prob", e.graph.stay_prob},
        {"off_diagonal", to_string(e.graph.off_diagonal)},
        {"seed", e.graph.seed},
        {"root", e.graph.root}}},
      {"initial", e.initial},
      {"prior", e.prior},
      {"schedule", e.schedule},
      {"schedule_every", e.schedule_every},
      {"arm_set_size", e.arm_set_size},
  };
  if (e.transition) env["transition"] = matrix_to_json(*e.transition);
  json policies = json::array();
  for (const auto& p : c.policies) policies.push_back({{"name", p.name}, {"label", p.display()}, {"params", p.params}});
  json axes = json::array();
  for (const auto& a : c.sweep) axes.push_back({{"path", a.path}, {"values", a.values}});
  return {
      {"name", c.name},
      {"horizon", c.horizon},
      {"num_runs", c.num_runs},
      {"seed", c.seed},
      {"paired", c.paired},
      {"threads", c.threads},
      {"environment", env},
      {"policies", policies},
      {"sweep", {{"axes", axes}}},
      {"output", {{"dir", c.output.dir}, {"traces", c.output.traces}, {"bootstrap", c.output.bootstrap}}},
  };
}

ExperimentConfig experiment_from_json(const json& doc, const std::string& base_dir) {
  reject_unknown(doc, {"name", "horizon", "num_runs", "seed", "paired", "threads", "environment", "policies", "sweep",
                       "output", "description"},
                 "config");
  ExperimentConfig c;
  c.base_dir = base_dir;
  c.name = field<std::string>(doc, "name", c.name, "config");
  c.horizon = field(doc, "horizon", c.horizon, "config");
  c.num_runs = field(doc, "num_runs", c.num_runs, "config");
  c.seed = field(doc, "seed", c.seed, "config");
  c.paired = field(doc, "paired", c.paired, "config");
  c.threads = field(doc, "threads", c.threads, "config");

  if (!doc.contains("environment")) throw ConfigError("config needs an 'environment'");
  const json& ej = doc.at("environment");
  reject_unknown(ej, {"model", "graph", "transition", "initial", "prior", "schedule", "schedule_every", "arm_set_size"},
                 "environment");
  auto& e = c.environment;
  if (ej.contains("model")) e.model = ej.at("model");
  e.graph.num_states = 0;
  if (ej.contains("graph")) {
    const json& g = ej.at("graph");
    reject_unknown(g, {"kind", "num_states", "stay_prob", "off_diagonal", "seed", "root"}, "environment.graph");
    try {
      e.graph.kind = graph_kind_from_string(field<std::string>(g, "kind", "fully_connected", "graph"));
      e.graph.off_diagonal = off_diagonal_from_string(field<std::string>(g, "off_diagonal", "uniform", "graph"));
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(ex.what());
    }
    e.graph.num_states = field(g, "num_states", Index{0}, "graph");
    e.graph.stay_prob = field(g, "stay_prob", e.graph.stay_prob, "graph");
    e.graph.seed = field(g, "seed", e.graph.seed, "graph");
    e.graph.root = field(g, "root", e.graph.root, "graph");
  }
  if (ej.contains("transition") && !ej.at("transition").is_null()) {
    try {
      e.transition = matrix_from_json(ej.at("transition"));
    } catch (const std::exception& ex) {
      throw ConfigError(std::string("environment.transition: ") + ex.what());
    }
  }
  if (ej.contains("initial")) e.initial = ej.at("initial");
  if (ej.contains("prior")) e.prior = ej.at("prior");
  e.schedule = field(ej, "schedule", e.schedule, "environment");
  e.schedule_every = field(ej, "schedule_every", e.schedule_every, "environment");
  e.arm_set_size = field(ej, "arm_set_size", e.arm_set_size, "environment");

  if (doc.contains("policies")) {
    for (const auto& pj : doc.at("policies")) {
      PolicySpec p;
      if (pj.is_string()) {
        p.name = pj.get<std::string>();
      } else {
        reject_unknown(pj, {"name", "label", "params"}, "policy");
        p.name = field<std::string>(pj, "name", "", "policy");
        p.label = field<std::string>(pj, "label", "", "policy");
        if (pj.contains("params")) p.params = pj.at("params");
      }
      if (p.label.empty()) p.label = p.name;
      c.policies.push_back(std::move(p));
    }
  }
  if (doc.contains("sweep")) {
    const json& sj = doc.at("sweep");
    reject_unknown(sj, {"axes"}, "sweep");
    for (const auto& aj : sj.value("axes", json::array())) {
      reject_unknown(aj, {"path", "values"}, "sweep axis");
      SweepAxis a;
      a.path = field<std::string>(aj, "path", "", "sweep axis");
      a.values = field(aj, "values", std::vector<json>{}, "sweep axis");
      c.sweep.push_back(std::move(a));
    }
  }
  if (doc.contains("output")) {
    const json& oj = doc.at("output");
    reject_unknown(oj, {"dir", "traces", "bootstrap"}, "output");
    c.output.dir = field<std::string>(oj, "dir", "", "output");
    c.output.traces = field(oj, "traces", true, "output");
    c.output.bootstrap = field(oj, "bootstrap", 0, "output");
  }
  validate(c);
  return c;
}

ExperimentConfig load_experiment(const std::string& path) {
  json doc;
  try {
    doc = load_json(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return experiment_from_json(doc, fs::path(path).parent_path().string());
}

void validate(const ExperimentConfig& c) {
  if (c.horizon < 1) throw ConfigError("horizon must be >= 1");
  if (c.num_runs < 1) throw ConfigError("num_runs must be >= 1");
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  if (c.policies.empty()) throw ConfigError("policy list is empty");
  std::set<std::string> labels;
  for (const auto& p : c.policies) {
    validate_policy_spec(p);
    if (!labels.insert(p.display()).second) throw ConfigError("duplicate policy label '" + p.display() + "'");
  }
  const auto& e = c.environment;
  if (!e.model.is_object()) throw ConfigError("environment.model must be an object");
  if (!(e.graph.stay_prob > 0.0 && e.graph.stay_prob <= 1.0)) throw ConfigError("stay_prob must lie in (0, 1]");
  for (std::size_t i = 1; i < e.schedule.size(); ++i) {
    if (e.schedule[i] <= e.schedule[i - 1]) throw ConfigError("schedule must be strictly increasing");
  }
  if (e.schedule_every < 0) throw ConfigError("schedule_every must be >= 0");
  if (e.arm_set_size < 0) throw ConfigError("arm_set_size must be >= 0");
  for (const auto& a : c.sweep) {
    if (a.values.empty()) throw ConfigError("sweep axis '" + a.path + "' has no values");
    try {
      (void)json::json_pointer(a.path);
    } catch (const json::exception& ex) {
      throw ConfigError("sweep axis path '" + a.path + "': " + ex.what());
    }
  }
  if (c.output.bootstrap < 0) throw ConfigError("bootstrap must be >= 0");
}

// ---------------------------------------------------------------------------
// Environment resolution
// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd distribution(const json& spec, Index states, Index root, const char* what) {
  if (spec.is_string()) {
    const auto s = spec.get<std::string>();
    if (s == "uniform") return Eigen::VectorXd::Constant(states, 1.0 / static_cast<double>(states));
    if (s == "root") return Eigen::VectorXd::Unit(states, root);
    throw ConfigError(std::string(what) + ": expected 'uniform', 'root' or a probability vector");
  }
  const auto v = spec.get<std::vector<double>>();
  if (static_cast<Index>(v.size()) != states) throw ConfigError(std::string(what) + ": wrong length");
  Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(v.data(), states);
  if ((p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9) {
    throw ConfigError(std::string(what) + ": not a probability vector");
  }
  return p / p.sum();
}

}  // namespace

ResolvedEnvironment::ResolvedEnvironment(const ExperimentConfig& c) {
  const auto& e = c.environment;
  const json& m = e.model;
  std::optional<TransitionKernel> embedded;
  try {
    if (m.contains("reference")) {
      const auto name = m.at("reference").get<std::string>();
      const double info_std = m.value("info_std", 0.01);
      const double std = m.value("std", 0.5);
      if (name == "two_state") {
        base_model_ = std::make_shared<RewardModel>(two_state_model(info_std, std));
      } else if (name == "five_state") {
        base_model_ = std::make_shared<RewardModel>(five_state_model(info_std, std));
      } else if (name == "explore_commit") {
        base_model_ = std::make_shared<RewardModel>(two_state_model(m.value("info_std", 0.05), std));
      } else {
        throw ConfigError("unknown reference model '" + name + "'");
      }
    } else if (m.contains("family")) {
      const json& f = m.at("family");
      TwoStateFamily fam;
      fam.best = f.value("best", fam.best);
      fam.delta_r = f.value("delta_r", fam.delta_r);
      fam.std = f.value("std", fam.std);
      fam.delta_sigma = f.value("delta_sigma", fam.delta_sigma);
      fam.info_cost = f.value("info_cost", fam.info_cost);
      fam.info_gap = f.value("info_gap", fam.info_gap);
      fam.info_std = f.value("info_std", fam.info_std);
      base_model_ = std::make_shared<RewardModel>(fam.model());
    } else if (m.contains("file") || m.contains("inline")) {
      const json doc = m.contains("file") ? load_json(resolve_path(m.at("file").get<std::string>(), c.base_dir))
                                          : m.at("inline");
      base_model_ = std::make_shared<RewardModel>(reward_model_from_json(doc));
      if (doc.contains("transition")) embedded = transition_from_json(doc);
    } else if (m.contains("dataset")) {
      json d = m.at("dataset");
      if (d.contains("ratings_path")) d["ratings_path"] = resolve_path(d.at("ratings_path").get<std::string>(), c.base_dir);
      dataset_ = std::make_shared<DatasetBuild>(build_dataset(d));
      per_run_ = m.value("per_run_super_user", true);
      super_user_seed_ = m.value("super_user_seed", std::uint64_t{0});
      base_model_ = std::make_shared<RewardModel>(dataset_reward_model(*dataset_, super_user_seed_));
      provenance_ = dataset_->provenance;
    } else {
      throw ConfigError("environment.model needs one of reference, family, file, inline, dataset");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("environment.model: ") + ex.what());
  }

  const Index states = base_model_->num_states();
  if (e.transition) {
    kernel_ = std::make_shared<TransitionKernel>(*e.transition);
  } else if (embedded) {
    kernel_ = std::make_shared<TransitionKernel>(*embedded);
  } else {
    TransitionGraphSpec g = e.graph;
    if (g.num_states == 0) g.num_states = states;
    try {
      kernel_ = std::make_shared<TransitionKernel>(build_transition_kernel(g));
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(std::string("environment.graph: ") + ex.what());
    }
  }
  if (kernel_->num_states() != states) throw ConfigError("kernel and reward model disagree on the number of states");

  try {
    initial_ = distribution(e.initial, states, e.graph.root, "environment.initial");
    prior_ = BeliefState(e.prior.is_null() ? initial_ : distribution(e.prior, states, e.graph.root, "environment.prior"));
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("environment initial/prior: ") + ex.what());
  }
  schedule_ = e.schedule;
  if (e.schedule_every > 0) {
    for (int t = e.schedule_every; t < c.horizon; t += e.schedule_every) schedule_.push_back(t);
  }
  arm_set_size_ = e.arm_set_size;
  if (arm_set_size_ > base_model_->num_arms()) throw ConfigError("arm_set_size exceeds the number of arms");
}

std::shared_ptr<const RewardModel> ResolvedEnvironment::model_for_run(std::uint64_t run_seed) const {
  if (!per_run_model()) return base_model_;
  return std::make_shared<RewardModel>(dataset_reward_model(*dataset_, mix_seed(super_user_seed_, run_seed)));
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

Trajectory generate_trajectory(const ResolvedEnvironment& env, const RewardModel& model, int horizon,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Trajectory t;
  const auto n = static_cast<std::size_t>(horizon);
  t.states.reserve(n);
  t.contexts.reserve(n);
  t.arm_sets.reserve(n);
  t.noise.reserve(n);
  EnvState state{sample_index(env.initial(), rng), 0, env.schedule()};
  const bool subset = env.arm_set_size() > 0 && env.arm_set_size() < model.num_arms();
  for (int step = 0; step < horizon; ++step) {
    t.states.push_back(state.true_state);
    t.contexts.push_back(model.num_contexts() > 1
                             ? std::uniform_int_distribution<Index>(0, model.num_contexts() - 1)(rng)
                             : Index{0});
    t.arm_sets.push_back(subset ? sample_arm_set(model.num_arms(), env.arm_set_size(), rng) : std::vector<Index>{});
    t.noise.push_back(normal(rng));
    advance_state(state, *env.kernel(), rng);
  }
  return t;
}

PolicyRun play(const PolicySpec& spec, const PolicyProblem& problem, const Trajectory& tr, std::uint64_t policy_seed) {
  const auto start = std::chrono::steady_clock::now();
  const RewardModel& model = *problem.model;
  auto policy = make_policy(spec, problem, policy_seed);
  const std::vector<Index> every = all_arms(model);
  const auto n = tr.states.size();

  PolicyRun r;
  r.policy = spec.display();
  r.seed = policy_seed;
  r.arms.reserve(n);
  r.rewards.reserve(n);
  r.regret.reserve(n);
  r.realized_regret.reserve(n);
  r.info.reserve(n);
  r.states = tr.states;
  double regret = 0.0, realized = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const auto& offered = tr.arm_sets[t].empty() ? every : tr.arm_sets[t];
    const StepInput in{static_cast<int>(t), tr.contexts[t], std::span<const Index>(offered)};
    const Index s = tr.states[t];
    policy->reveal_state(s);
    const Index arm = policy->select(in);
    if (std::find(offered.begin(), offered.end(), arm) == offered.end()) {
      throw ProtocolViolation("policy '" + r.policy + "' played arm " + std::to_string(arm) +
                              " outside the offered set at step " + std::to_string(t));
    }
    const double mean = model.mean(arm, in.context, s);
    const double best = model.mean(best_arm(model, in.context, s, offered), in.context, s);
    const double reward = mean + model.std(arm, in.context, s) * tr.noise[t];
    regret += best - mean;
    realized += best - reward;
    r.arms.push_back(arm);
    r.rewards.push_back(reward);
    r.regret.push_back(regret);
    r.realized_regret.push_back(realized);
    r.info.push_back(policy->last_was_info() ? 1 : 0);
    policy->observe(in, arm, reward);
  }
  if (const BeliefState* b = policy->belief()) r.final_belief = b->probs();
  r.counters = policy->counters();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

RunResult run_experiment(const ExperimentConfig& config) {
  const ResolvedEnvironment env(config);
  return run_experiment(config, env);
}

RunResult run_experiment(const ExperimentConfig& config, const ResolvedEnvironment& env) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  for (const auto& p : config.policies) result.policies.push_back(p.display());
  result.runs.resize(static_cast<std::size_t>(config.num_runs));

  auto one_run = [&](int r) {
    const std::uint64_t run_seed = config.seed + static_cast<std::uint64_t>(r);
    PolicyProblem problem{env.model_for_run(run_seed), env.kernel(), env.prior(), config.horizon};
    const std::uint64_t policy_seed = mix_seed(run_seed, 1);
    std::optional<Trajectory> shared;
    if (config.paired) shared = generate_trajectory(env, *problem.model, config.horizon, mix_seed(run_seed, 0));
    auto& row = result.runs[static_cast<std::size_t>(r)];
    for (std::size_t p = 0; p < config.policies.size(); ++p) {
      const Trajectory own = config.paired ? Trajectory{}
                                           : generate_trajectory(env, *problem.model, config.horizon,
                                                                 mix_seed(run_seed, 2 + p));
      row.push_back(play(config.policies[p], problem, config.paired ? *shared : own, policy_seed));
      row.back().run = r;
    }
  };

  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, config.num_runs);
  if (threads == 1) {
    for (int r = 0; r < config.num_runs; ++r) one_run(r);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (int r = next++; r < config.num_runs; r = next++) {
          try {
            one_run(r);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = config.num_runs;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  json params = json::array();
  {
    PolicyProblem problem{env.model_for_run(config.seed), env.kernel(), env.prior(), config.horizon};
    for (const auto& p : config.policies) {
      params.push_back({{"label", p.display()}, {"name", p.name}, {"params", effective_params(p, problem)}});
    }
  }
  result.metadata = {
      {"config", to_json(config)},
      {"effective_policies", params},
      {"kernel", matrix_to_json(env.kernel()->matrix())},
      {"schedule", env.schedule()},
      {"threads", threads},
      {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
      {"notes",
       {"mucb elimination radius sqrt(2 sigma^2 log(t^2 |A|) / n_a) is a reconstruction",
        "exp4s learning rate and weight floor defaults are reconstructions",
        "change-detector window and threshold defaults are reconstructions"}},
  };
  if (!env.provenance().is_null()) result.metadata["dataset"] = env.provenance();
  return result;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

RegretBand bayes_regret(const std::vector<std::vector<double>>& curves, int bootstrap, std::uint64_t seed) {
  if (curves.empty()) throw std::invalid_argument("bayes_regret needs at least one run");
  const std::size_t n = curves.front().size();
  for (const auto& c : curves) {
    if (c.size() != n) throw std::invalid_argument("bayes_regret: runs differ in length");
  }
  const double runs = static_cast<double>(curves.size());
  RegretBand band;
  band.mean.assign(n, 0.0);
  for (const auto& c : curves) {
    for (std::size_t t = 0; t < n; ++t) band.mean[t] += c[t] / runs;
  }
  band.low = band.mean;
  band.high = band.mean;
  if (curves.size() < 2) return band;

  if (bootstrap <= 0) {
    for (std::size_t t = 0; t < n; ++t) {
      double ss = 0.0;
      for (const auto& c : curves) ss += (c[t] - band.mean[t]) * (c[t] - band.mean[t]);
      const double half = 1.96 * std::sqrt(ss / (runs - 1.0)) / std::sqrt(runs);
      band.low[t] = band.mean[t] - half;
      band.high[t] = band.mean[t] + half;
    }
    return band;
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, curves.size() - 1);
  std::vector<std::vector<double>> means(n, std::vector<double>(static_cast<std::size_t>(bootstrap)));
  std::vector<std::size_t> idx(curves.size());
  for (int b = 0; b < bootstrap; ++b) {
    for (auto& i : idx) i = pick(rng);
    for (std::size_t t = 0; t < n; ++t) {
      double s = 0.0;
      for (auto i : idx) s += curves[i][t];
      means[t][static_cast<std::size_t>(b)] = s / runs;
    }
  }
  const auto lo = static_cast<std::size_t>(std::floor(0.025 * (bootstrap - 1)));
  const auto hi = static_cast<std::size_t>(std::ceil(0.975 * (bootstrap - 1)));
  for (std::size_t t = 0; t < n; ++t) {
    std::sort(means[t].begin(), means[t].end());
    band.low[t] = means[t][lo];
    band.high[t] = means[t][hi];
  }
  return band;
}

RegretBand bayes_regret(const RunResult& result, std::size_t policy, int bootstrap) {
  std::vector<std::vector<double>> curves;
  curves.reserve(result.runs.size());
  for (const auto& run : result.runs) curves.push_back(run.at(policy).regret);
  return bayes_regret(curves, bootstrap, mix_seed(policy, 7));
}

std::vector<SweepRow> sweep(const ExperimentConfig& config) {
  std::vector<SweepRow> rows;
  json base = to_json(config);
  base["sweep"]["axes"] = json::array();
  std::vector<std::size_t> odometer(config.sweep.size(), 0);
  while (true) {
    json doc = base;
    std::vector<json> point;
    for (std::size_t i = 0; i < config.sweep.size(); ++i) {
      const json& v = config.sweep[i].values[odometer[i]];
      try {
        doc[json::json_pointer(config.sweep[i].path)] = v;
      } catch (const json::exception& ex) {
        throw ConfigError("sweep axis '" + config.sweep[i].path + "': " + ex.what());
      }
      point.push_back(v);
    }
    const ExperimentConfig cfg = experiment_from_json(doc, config.base_dir);
    const RunResult result = run_experiment(cfg);
    for (std::size_t p = 0; p < result.policies.size(); ++p) {
      const RegretBand band = bayes_regret(result, p, config.output.bootstrap);
      rows.push_back({point, result.policies[p], band.mean.back(), band.low.back(), band.high.back()});
    }
    std::size_t axis = config.sweep.size();
    while (axis > 0) {
      --axis;
      if (++odometer[axis] < config.sweep[axis].values.size()) break;
      odometer[axis] = 0;
      if (axis == 0) return rows;
    }
    if (config.sweep.empty()) return rows;
  }
}

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

std::string output_dir(const ExperimentConfig& config) {
  if (!config.output.dir.empty()) return config.output.dir;
  if (const char* root = std::getenv("LBL_OUT_DIR"); root && *root) return (fs::path(root) / config.name).string();
  return (fs::path("out") / config.name).string();
}

std::string aggregate_csv(const RunResult& result, int bootstrap) {
  std::vector<RegretBand> bands;
  for (std::size_t p = 0; p < result.policies.size(); ++p) bands.push_back(bayes_regret(result, p, bootstrap));
  std::ostringstream out;
  out << "step,policy,mean_regret,ci_low,ci_high\n";
  const std::size_t n = bands.empty() ? 0 : bands.front().mean.size();
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t p = 0; p < bands.size(); ++p) {
      out << t + 1 << ',' << csv_field(result.policies[p]) << ',' << fmt(bands[p].mean[t]) << ','
          << fmt(bands[p].low[t]) << ',' << fmt(bands[p].high[t]) << '\n';
    }
  }
  return out.str();
}

std::string plot_csv(const RunResult& result, int bootstrap) {
  std::vector<RegretBand> bands;
  for (std::size_t p = 0; p < result.policies.size(); ++p) bands.push_back(bayes_regret(result, p, bootstrap));
  std::ostringstream out;
  out << "step";
  for (const auto& name : result.policies) {
    out << ',' << csv_field(name + "_mean") << ',' << csv_field(name + "_low") << ',' << csv_field(name + "_high");
  }
  out << '\n';
  const std::size_t n = bands.empty() ? 0 : bands.front().mean.size();
  for (std::size_t t = 0; t < n; ++t) {
    out << t + 1;
    for (const auto& b : bands) out << ',' << fmt(b.mean[t]) << ',' << fmt(b.low[t]) << ',' << fmt(b.high[t]);
    out << '\n';
  }
  return out.str();
}

std::string traces_jsonl(const RunResult& result) {
  std::string out;
  for (const auto& row : result.runs) {
    for (const auto& r : row) {
      json line = {
          {"run", r.run},
          {"policy", r.policy},
          {"seed", r.seed},
          {"states", r.states},
          {"arms", r.arms},
          {"rewards", r.rewards},
          {"regret", r.regret},
          {"realized_regret", r.realized_regret},
          {"info", r.info},
          {"final_belief", std::vector<double>(r.final_belief.data(), r.final_belief.data() + r.final_belief.size())},
          {"counters", {{"rollouts", r.counters.rollouts}, {"info_pulls", r.counters.info_pulls},
                        {"resets", r.counters.resets}}},
      };
      out += line.dump();
      out += '\n';
    }
  }
  return out;
}

std::string sweep_csv(const ExperimentConfig& config, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  for (const auto& a : config.sweep) out << csv_field(a.path) << ',';
  out << "policy,final_mean_regret,ci_low,ci_high\n";
  for (const auto& r : rows) {
    for (const auto& v : r.point) out << csv_field(v.dump()) << ',';
    out << csv_field(r.policy) << ',' << fmt(r.final_mean) << ',' << fmt(r.final_low) << ',' << fmt(r.final_high)
        << '\n';
  }
  return out.str();
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

std::string emit_outputs(const ExperimentConfig& config, const RunResult& result) {
  if (result.runs.empty() || result.policies.empty()) throw std::invalid_argument("emit_outputs: empty result");
  const std::string regret = aggregate_csv(result, config.output.bootstrap);
  const std::string plot = plot_csv(result, config.output.bootstrap);
  const std::string traces = config.output.traces ? traces_jsonl(result) : std::string();
  const fs::path dir = output_dir(config);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  write_file(dir / "regret.csv", regret);
  write_file(dir / "plot.csv", plot);
  if (config.output.traces) write_file(dir / "traces.jsonl", traces);
  write_file(dir / "metadata.json", result.metadata.dump(2) + "\n");
  return dir.string();
}

// ---------------------------------------------------------------------------
// Recipes
// ---------------------------------------------------------------------------

namespace {

std::vector<PolicySpec> specs(std::initializer_list<std::pair<const char*, const char*>> list) {
  std::vector<PolicySpec> out;
  for (const auto& [name, label] : list) out.push_back({name, label, json::object()});
  return out;
}

std::vector<PolicySpec> full_lineup() {
  return specs({{"mts", "mTS"},
                {"agemts", "AGEmTS"},
                {"cducb", "CDUCB"},
                {"cdts", "CDTS"},
                {"cd_linucb", "CD-LinUCB"},
                {"cd_lints", "CD-LinTS"},
                {"exp4s", "EXP4.S"},
                {"mucb", "mUCB"}});
}

ExperimentConfig two_state_base(const std::string& name, double stay, int horizon) {
  ExperimentConfig c;
  c.name = name;
  c.horizon = horizon;
  c.environment.model = {{"reference", "two_state"}, {"info_std", 0.01}, {"std", 0.5}};
  c.environment.graph.kind = GraphKind::kFullyConnected;
  c.environment.graph.num_states = 2;
  c.environment.graph.stay_prob = stay;
  c.environment.initial = "uniform";
  c.policies = full_lineup();
  return c;
}

ExperimentConfig five_state(const std::string& name, GraphKind kind, double stay, OffDiagonal off) {
  ExperimentConfig c;
  c.name = name;
  c.horizon = 1000;
  c.environment.model = {{"reference", "five_state"}, {"info_std", 0.01}, {"std", 0.5}};
  c.environment.graph.kind = kind;
  c.environment.graph.num_states = 5;
  c.environment.graph.stay_prob = stay;
  c.environment.graph.off_diagonal = off;
  c.environment.graph.root = 4;
  c.environment.initial = "root";
  c.policies = full_lineup();
  return c;
}

ExperimentConfig movielens(const std::string& name, GraphKind kind) {
  ExperimentConfig c;
  c.name = name;
  c.horizon = 1000;
  c.environment.model = {
      {"dataset",
       {{"ratings_path", "data/ml-1m/ratings.dat"},
        {"min_user_ratings", 200},
        {"min_item_ratings", 200},
        {"pmf",
         {{"d", 10},
          {"lambda_u", 0.001},
          {"lambda_v", 0.001},
          {"learning_rate", 2e-4},
          {"validation_fraction", 0.1},
          {"epochs", 100},
          {"seed", 0}}},
        {"num_states", 5},
        {"kmeans_seed", 0},
        {"pairs", {{0, 1}, {2, 3}}},
        {"variance", {{"mode", "fixed"}, {"sigma", 0.25}}}}},
      {"per_run_super_user", true},
      {"super_user_seed", 0}};
  c.environment.graph.kind = kind;
  c.environment.graph.num_states = 5;
  c.environment.graph.stay_prob = 0.95;
  c.environment.graph.root = 4;
  c.environment.initial = "root";
  c.environment.arm_set_size = 20;
  c.policies = specs({{"mts", "mTS"},
                      {"agemts", "AGEmTS"},
                      {"cd_linucb", "CD-LinUCB"},
                      {"cd_lints", "CD-LinTS"},
                      {"exp4s", "EXP4.S"}});
  return c;
}

ExperimentConfig regions(const std::string& name, double stay) {
  ExperimentConfig c;
  c.name = name;
  c.horizon = 1000;
  c.environment.model = {{"family",
                          {{"best", 2.1},
                           {"delta_r", 0.05},
                           {"std", 0.5},
                           {"delta_sigma", 0.0},
                           {"info_cost", 0.4},
                           {"info_gap", 0.2},
                           {"info_std", 0.01}}}};
  c.environment.graph.num_states = 2;
  c.environment.graph.stay_prob = stay;
  c.policies = specs({{"mts", "mTS"}, {"agemts", "AGEmTS"}});
  c.sweep.push_back({"/environment/model/family/delta_r", {0.05, 0.1, 0.2, 0.3, 0.5, 0.8}});
  c.sweep.push_back({"/environment/model/family/delta_sigma", {0.0, 0.25, 0.5, 1.0}});
  return c;
}

const std::vector<std::string> kRecipes = {
    "two_state_stationary", "two_state_random_switch", "two_state_fixed_200", "two_state_explore_commit",
    "five_state_full",      "five_state_skip",         "five_state_branch",   "five_state_nonuniform",
    "movielens_full",       "movielens_skip",          "movielens_branch",    "regions_stationary",
    "regions_nonstationary"};

}  // namespace

const std::vector<std::string>& recipe_names() { return kRecipes; }

ExperimentConfig recipe(const std::string& name) {
  ExperimentConfig c;
  if (name == "two_state_stationary") {
    c = two_state_base(name, 1.0, 2000);
  } else if (name == "two_state_random_switch") {
    c = two_state_base(name, 0.995, 1000);
  } else if (name == "two_state_fixed_200") {
    c = two_state_base(name, 0.995, 1000);
    c.environment.schedule_every = 200;
  } else if (name == "two_state_explore_commit") {
    c = two_state_base(name, 1.0, 1000);
    c.environment.model = {{"reference", "explore_commit"}, {"info_std", 0.05}, {"std", 0.5}};
    c.policies = specs({{"mts", "PS"}, {"explore_commit", "explore-commit"}, {"explore_then_ps", "explore-then-PS"}});
  } else if (name == "five_state_full") {
    c = five_state(name, GraphKind::kFullyConnected, 0.995, OffDiagonal::kUniform);
  } else if (name == "five_state_skip") {
    c = five_state(name, GraphKind::kSkipChain, 0.995, OffDiagonal::kUniform);
  } else if (name == "five_state_branch") {
    c = five_state(name, GraphKind::kTwoBranch, 0.995, OffDiagonal::kUniform);
  } else if (name == "five_state_nonuniform") {
    c = five_state(name, GraphKind::kFullyConnected, 0.95, OffDiagonal::kRandomNonuniform);
    c.environment.graph.seed = 1;
  } else if (name == "movielens_full") {
    c = movielens(name, GraphKind::kFullyConnected);
  } else if (name == "movielens_skip") {
    c = movielens(name, GraphKind::kSkipChain);
  } else if (name == "movielens_branch") {
    c = movielens(name, GraphKind::kTwoBranch);
  } else if (name == "regions_stationary") {
    c = regions(name, 1.0);
  } else if (name == "regions_nonstationary") {
    c = regions(name, 0.995);
  } else {
    throw ConfigError("unknown recipe '" + name + "'");
  }
  for (auto& p : c.policies) {
    if (p.label.empty()) p.label = p.name;
  }
  return c;
}

}  // namespace latentbandit
