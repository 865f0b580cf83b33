// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "latentbandit/belief.hpp"
#include "latentbandit/datasets.hpp"
#include "latentbandit/environments.hpp"
#include "latentbandit/harness.hpp"
#include "latentbandit/model_io.hpp"
#include "latentbandit/reference_models.hpp"
#include "latentbandit/two_state.hpp"
#include "oracles.hpp"

using namespace latentbandit;
using nlohmann::json;

namespace {

// Pinned tolerances and budgets.
constexpr double kKlTol = 1e-6;
constexpr double kStatTol = 1e-12;
constexpr double kFilterTol = 1e-10;
constexpr double kForecastTol = 0.05;
constexpr double kDwellExactTol = 1e-9;
constexpr double kDwellEmpiricalTol = 0.05;
constexpr double kRmseMax = 0.1;
constexpr double kInfoEarlyFraction = 0.95;
constexpr int kInfoEarlySteps = 5;
constexpr int kBandFromStep = 500;
constexpr int kFiveStateStep = 600;
constexpr int kSeeds = 100;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void report(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_s > 0.0 && secs > budget_s) {
    o.pass = false;
    o.detail += fmt("; over the %.0f s budget", budget_s);
  }
  if (!o.pass) ++failures;
  std::printf("%s  [%2d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::size_t policy_index(const RunResult& r, const std::string& label) {
  for (std::size_t p = 0; p < r.policies.size(); ++p)
    if (r.policies[p] == label) return p;
  throw std::runtime_error("missing policy " + label);
}

ExperimentConfig with_policies(ExperimentConfig c, std::vector<PolicySpec> p) {
  c.policies = std::move(p);
  return c;
}

Outcome closed_form() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mean(-3.0, 3.0), sd(0.05, 2.0);
  double kl_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double m1 = mean(rng), s1 = sd(rng), m2 = mean(rng), s2 = sd(rng);
    kl_err = std::max(kl_err, std::abs(gaussian_kl(m1, s1, m2, s2) - oracle::kl_numeric(m1, s1, m2, s2)));
  }
  double stat_err = 0.0;
  for (const auto& model : {two_state_model(), five_state_model()}) {
    for (Index a = 0; a < model.num_arms(); ++a) {
      stat_err = std::max(stat_err, std::abs(mean_pairwise_kl(model, a) - oracle::mean_kl(model, a)));
      stat_err = std::max(stat_err, std::abs(mean_pairwise_gap(model, a) - oracle::mean_gap(model, a)));
    }
    stat_err = std::max(stat_err, std::abs(single_step_regret_bound(model) - oracle::regret_bound(model)));
  }
  return {kl_err <= kKlTol && stat_err <= kStatTol, fmt("max KL error %.2e, max statistic error %.2e", kl_err, stat_err)};
}

Outcome sample_size() {
  const int n = explore_commit_sample_size(0.2, 0.5, 0.5, 1.96, 0.84);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const double d = u(rng), s1 = u(rng), s2 = u(rng);
    const int base = explore_commit_sample_size(d, s1, s2, 1.96, 0.84);
    if (explore_commit_sample_size(d, s1 * 1.3, s2, 1.96, 0.84) < base) ++violations;
    if (explore_commit_sample_size(d, s1, s2 * 1.3, 1.96, 0.84) < base) ++violations;
    if (explore_commit_sample_size(d * 1.3, s1, s2, 1.96, 0.84) > base) ++violations;
  }
  return {n == 49 && violations == 0, fmt("n_e = %d, monotonicity violations %d / 3000", n, violations)};
}

Outcome belief_filter() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lik(0.0, 2.0);
  std::uniform_int_distribution<int> len(1, 5);
  double norm_err = 0.0, fwd_err = 0.0;
  for (int c = 0; c < 10000; ++c) {
    const Eigen::MatrixXd k = oracle::random_stochastic(3, rng);
    const TransitionKernel kernel(k);
    const Eigen::VectorXd p0 = oracle::random_simplex(3, rng);
    BeliefState b(p0);
    std::vector<std::vector<double>> liks;
    const int T = len(rng);
    for (int t = 0; t < T; ++t) {
      Eigen::Vector3d l(lik(rng), lik(rng), lik(rng));
      liks.push_back({l(0), l(1), l(2)});
      b = posterior_update(b, kernel, l);
      norm_err = std::max(norm_err, std::abs(b.probs().sum() - 1.0));
    }
    const auto ref = oracle::path_sum_forward({p0(0), p0(1), p0(2)}, k, liks);
    for (int s = 0; s < 3; ++s) fwd_err = std::max(fwd_err, std::abs(b[s] - ref[s]));
  }
  return {norm_err <= kFilterTol && fwd_err <= kFilterTol,
          fmt("max normalization error %.2e, max forward error %.2e over 10^4 cases", norm_err, fwd_err)};
}

Outcome two_state_stationary(RunResult& kept) {
  auto c = recipe("two_state_stationary");
  c.num_runs = kSeeds;
  kept = run_experiment(c);
  const auto m = bayes_regret(kept, policy_index(kept, "mTS"));
  const auto a = bayes_regret(kept, policy_index(kept, "AGEmTS"));
  int overlap = 0;
  for (int t = kBandFromStep - 1; t < c.horizon; ++t)
    if (!(a.high[t] < m.low[t])) ++overlap;
  const std::size_t ai = policy_index(kept, "AGEmTS");
  int early = 0;
  for (const auto& run : kept.runs) {
    for (int t = 0; t < kInfoEarlySteps; ++t) {
      if (run[ai].info[t]) {
        ++early;
        break;
      }
    }
  }
  const double frac = early / static_cast<double>(kept.runs.size());
  return {overlap == 0 && a.mean.back() < m.mean.back() && frac >= kInfoEarlyFraction,
          fmt("final regret AGEmTS %.2f [%.2f, %.2f] vs mTS %.2f [%.2f, %.2f]; overlapping steps from %d: %d; "
              "early info pull in %.0f%% of runs",
              a.mean.back(), a.low.back(), a.high.back(), m.mean.back(), m.low.back(), m.high.back(), kBandFromStep,
              overlap, 100.0 * frac)};
}

Outcome explore_then_ps() {
  // Fallback: an info arm costing more per pull than posterior sampling can lose over the horizon.
  ExperimentConfig costly;
  costly.name = "etps_fallback";
  costly.horizon = 1000;
  costly.num_runs = kSeeds;
  costly.environment.model = {{"family", {{"info_cost", 20.0}, {"info_std", 0.05}}}};
  costly.environment.graph.num_states = 2;
  costly.environment.graph.stay_prob = 1.0;
  costly.policies = {{"mts", "PS", json::object()}, {"explore_then_ps", "ETPS", json::object()}};
  TwoStateFamily fam;
  fam.info_cost = 20.0;
  fam.info_std = 0.05;
  const int tau0 = explore_then_ps_tau(fam.model(), 2, costly.horizon);
  const auto fallback = run_experiment(costly);
  int differing = 0;
  for (const auto& run : fallback.runs)
    if (run[0].arms != run[1].arms) ++differing;

  auto c = recipe("two_state_explore_commit");
  c.num_runs = kSeeds;
  const int tau = explore_then_ps_tau(explore_commit_model(), 2, c.horizon);
  const auto r = run_experiment(c);
  const double ps = bayes_regret(r, policy_index(r, "PS")).mean.back();
  const double ec = bayes_regret(r, policy_index(r, "explore-commit")).mean.back();
  const double et = bayes_regret(r, policy_index(r, "explore-then-PS")).mean.back();
  return {tau0 == 0 && differing == 0 && tau > 0 && et < ps && et < ec,
          fmt("costly info arm: tau = %d, runs differing from PS %d; reference model: tau = %d, regret at n=1000 "
              "explore-then-PS %.2f, PS %.2f, explore-commit %.2f",
              tau0, differing, tau, et, ps, ec)};
}

Outcome forecaster() {
  const auto model = two_state_model();
  const int steps = 1000;
  const int sims = 10000;
  const auto forecast = belief_forecast_two_state(0.5, model, steps);
  std::vector<double> mc(steps + 1, 0.0);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto id = TransitionKernel::identity(2);
  const auto arms = all_arms(model);
  for (int k = 0; k < sims; ++k) {
    BeliefState b = BeliefState::uniform(2);
    mc[0] += b[0];
    for (int t = 1; t <= steps; ++t) {
      const Index arm = best_arm(model, 0, sample_state(b, u(rng)), arms);
      b = filter_reward(b, id, model, arm, 0, model.mean(arm, 0, 0) + model.std(arm, 0, 0) * z(rng));
      mc[t] += b[0];
    }
  }
  double worst = 0.0;
  int at = 0;
  for (int t = 0; t <= steps; ++t) {
    const double e = std::abs(mc[t] / sims - forecast[t]);
    if (e > worst) {
      worst = e;
      at = t;
    }
  }
  return {worst <= kForecastTol, fmt("max |forecast - Monte Carlo| = %.4f at step %d over %d steps", worst, at, steps)};
}

Outcome five_state() {
  std::string detail;
  bool ok = true;
  for (const char* name : {"five_state_branch", "five_state_skip", "five_state_full"}) {
    auto c = with_policies(recipe(name), {{"mts", "mTS", json::object()}, {"agemts", "AGEmTS", json::object()}});
    c.num_runs = kSeeds;
    const auto r = run_experiment(c);
    const double m = bayes_regret(r, 0).mean[kFiveStateStep - 1];
    const double a = bayes_regret(r, 1).mean[kFiveStateStep - 1];
    const bool strict = std::string(name) != "five_state_full";
    ok = ok && (strict ? a < m : a <= m);
    detail += fmt("%s%s: AGEmTS %.2f %s mTS %.2f", detail.empty() ? "" : "; ", name, a, strict ? "<" : "<=", m);
  }
  return {ok, "regret at step 600, " + detail};
}

Outcome dwell() {
  TransitionGraphSpec spec;
  spec.num_states = 2;
  spec.stay_prob = 0.995;
  const auto kernel = build_transition_kernel(spec);
  const double exact = expected_dwell_time(kernel, BeliefState::point_mass(2, 0), 1e9);
  std::mt19937_64 rng(8);
  EnvState env{0, 0, {}};
  long segments = 0, steps = 0, run = 1;
  while (segments < 10000) {
    const Index before = env.true_state;
    advance_state(env, kernel, rng);
    if (env.true_state == before) {
      ++run;
    } else {
      ++segments;
      steps += run;
      run = 1;
    }
  }
  const double empirical = steps / static_cast<double>(segments);
  return {std::abs(exact - 200.0) <= kDwellExactTol && std::abs(empirical - 200.0) <= kDwellEmpiricalTol * 200.0,
          fmt("expected %.12f, empirical %.2f over 10^4 segments", exact, empirical)};
}

Outcome baselines(const RunResult& r) {
  const double m = bayes_regret(r, policy_index(r, "mTS")).mean.back();
  bool ok = true;
  std::string detail = fmt("mTS %.2f", m);
  for (const char* label : {"CDUCB", "CDTS", "EXP4.S", "mUCB", "CD-LinUCB", "CD-LinTS"}) {
    const double b = bayes_regret(r, policy_index(r, label)).mean.back();
    ok = ok && b >= m;
    detail += fmt(", %s %.2f", label, b);
  }
  return {ok, "final regret at n=2000: " + detail};
}

bool model_invariants(const RewardModel& model, std::string& why) {
  if (!model.means().allFinite() || !model.stds().allFinite() || (model.stds().array() <= 0.0).any()) {
    why = "non-finite entries or non-positive stds";
    return false;
  }
  if (model.has_features() && model.features().rows() != model.num_arms()) {
    why = "feature rows do not match arms";
    return false;
  }
  const auto back = reward_model_from_json(to_json(model));
  if (back.means() != model.means() || back.stds() != model.stds()) {
    why = "json round trip changed the model";
    return false;
  }
  const auto [info, stats] = best_info_arm(model);
  if (info < 0 || info >= model.num_arms() || single_step_regret_bound(model) < 0.0) {
    why = "info-arm statistics out of range";
    return false;
  }
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  TransitionGraphSpec g;
  g.num_states = model.num_states();
  g.stay_prob = 0.95;
  const auto kernel = build_transition_kernel(g);
  BeliefState b = BeliefState::uniform(model.num_states());
  for (int t = 0; t < 500; ++t) {
    const Index a = t % model.num_arms();
    b = filter_reward(b, kernel, model, a, 0, model.mean(a, 0, 1) + model.std(a, 0, 1) * z(rng));
    const double h = entropy(b);
    if (std::abs(b.probs().sum() - 1.0) > 1e-12 || (b.probs().array() < 0.0).any() || h < 0.0 ||
        h > std::log2(static_cast<double>(model.num_states())) + 1e-12) {
      why = "belief left the simplex";
      return false;
    }
  }
  return true;
}

Outcome dataset_pipeline() {
  const json cfg = {{"planted", {{"users", 500}, {"items", 400}, {"rank", 10}, {"clusters", 5}, {"seed", 10}}},
                    {"pmf", {{"d", 10}, {"learning_rate", 0.01}, {"epochs", 100}, {"lambda_u", 1e-5}, {"lambda_v", 1e-5},
                             {"seed", 0}}},
                    {"num_states", 5},
                    {"kmeans_seed", 0},
                    {"pairs", {{0, 1}, {2, 3}}},
                    {"catalog", 20}};
  const auto build = build_dataset(cfg);
  const double rmse = build.pmf.best_validation_rmse;
  const auto labels = planted_ratings(500, 400, 10, 5, 10).second;
  std::vector<std::set<Index>> by_cluster(5);
  for (std::size_t u = 0; u < labels.size(); ++u) by_cluster[static_cast<std::size_t>(build.clusters.assignment[u])].insert(labels[u]);
  bool exact = true;
  std::set<Index> seen;
  for (const auto& s : by_cluster) {
    exact = exact && s.size() == 1;
    if (s.size() == 1) seen.insert(*s.begin());
  }
  exact = exact && seen.size() == 5;
  std::string why;
  const bool inv = model_invariants(dataset_reward_model(build, 3), why);
  std::string detail = fmt("planted 500x400 rank 10: validation RMSE %.4f, clusters %s, exported model %s", rmse,
                           exact ? "recovered exactly" : "NOT recovered", inv ? "valid" : why.c_str());
  bool ok = rmse < kRmseMax && exact && inv;

  const std::string ml = "data/ml-1m/ratings.dat";
  if (!std::filesystem::exists(ml)) {
    detail += "; MovieLens 1M check skipped (data/ml-1m/ratings.dat absent)";
  } else {
    const auto table = ingest_ratings(ml, 200, 200);
    const bool shape = table.num_users() == 1589 && table.num_items() == 1132;
    ok = ok && shape;
    detail += fmt("; MovieLens filter %ld x %ld", static_cast<long>(table.num_users()), static_cast<long>(table.num_items()));
    for (const char* name : {"movielens_full", "movielens_skip", "movielens_branch"}) {
      auto c = with_policies(recipe(name), {{"mts", "mTS", json::object()}, {"agemts", "AGEmTS", json::object()}});
      c.num_runs = kSeeds;
      const auto r = run_experiment(c);
      const double m = bayes_regret(r, 0).mean.back();
      const double a = bayes_regret(r, 1).mean.back();
      ok = ok && a < m;
      detail += fmt("; %s AGEmTS %.2f vs mTS %.2f", name, a, m);
    }
  }
  return {ok, detail};
}

Outcome determinism() {
  const bool have_ml = std::filesystem::exists("data/ml-1m/ratings.dat");
  int checked = 0, differing = 0;
  std::string bad;
  for (const auto& name : recipe_names()) {
    if (name.rfind("movielens", 0) == 0 && !have_ml) continue;
    auto c = recipe(name);
    c.sweep.clear();
    c.num_runs = 4;
    c.horizon = std::min(c.horizon, 300);
    c.threads = 1;
    const std::string a = traces_jsonl(run_experiment(c));
    c.threads = 0;
    const std::string b = traces_jsonl(run_experiment(c));
    ++checked;
    if (a != b || a.empty()) {
      ++differing;
      bad += " " + name;
    }
  }
  return {differing == 0 && checked > 0,
          fmt("%d recipes rerun (single and multi-threaded), %d with differing traces%s%s", checked, differing,
              bad.empty() ? "" : ":", bad.c_str())};
}

}  // namespace

int main() {
  RunResult stationary;
  report(1, "closed-form oracle suite", 5.0, closed_form);
  report(2, "sample-size formula", 0.0, sample_size);
  report(3, "belief filter vs brute-force HMM", 10.0, belief_filter);
  report(4, "two-state stationary AGEmTS vs mTS", 0.0, [&] { return two_state_stationary(stationary); });
  report(5, "explore-then-PS fallback and ordering", 60.0, explore_then_ps);
  report(6, "belief forecaster vs Monte Carlo", 60.0, forecaster);
  report(7, "five-state graphs", 0.0, five_state);
  report(8, "dwell time", 0.0, dwell);
  report(9, "baseline sanity", 0.0, [&] { return baselines(stationary); });
  report(10, "dataset pipeline", 120.0, dataset_pipeline);
  report(11, "determinism", 0.0, determinism);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
