#include "latentbandit/environments.hpp"

#include <algorithm>
#include <numeric>

namespace latentbandit {

GraphKind graph_kind_from_string(const std::string& name) {
  if (name == "fully_connected") return GraphKind::kFullyConnected;
  if (name == "skip_chain") return GraphKind::kSkipChain;
  if (name == "two_branch") return GraphKind::kTwoBranch;
  if (name == "custom") return GraphKind::kCustom;
  throw std::invalid_argument("unknown graph kind '" + name + "'");
}

std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::kFullyConnected: return "fully_connected";
    case GraphKind::kSkipChain: return "skip_chain";
    case GraphKind::kTwoBranch: return "two_branch";
    case GraphKind::kCustom: return "custom";
  }
  return "custom";
}

OffDiagonal off_diagonal_from_string(const std::string& name) {
  if (name == "uniform") return OffDiagonal::kUniform;
  if (name == "random_nonuniform") return OffDiagonal::kRandomNonuniform;
  throw std::invalid_argument("unknown off-diagonal mode '" + name + "'");
}

std::string to_string(OffDiagonal mode) {
  return mode == OffDiagonal::kUniform ? "uniform" : "random_nonuniform";
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> graph_edges(const TransitionGraphSpec& spec) {
  const Index n = spec.num_states;
  using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
  BoolMatrix edges = BoolMatrix::Constant(n, n, false);
  switch (spec.kind) {
    case GraphKind::kFullyConnected:
      edges.setConstant(true);
      break;
    case GraphKind::kCustom:
      if (spec.custom.rows() != n || spec.custom.cols() != n) throw std::invalid_argument("custom kernel shape mismatch");
      edges = (spec.custom.array() > 0.0).matrix();
      break;
    case GraphKind::kTwoBranch:
    case GraphKind::kSkipChain: {
      if (n < 3) throw std::invalid_argument("tree graphs need at least three states");
      if (spec.root < 0 || spec.root >= n) throw std::invalid_argument("graph root out of range");
      std::vector<Index> a, b;
      for (Index s = 0, k = 0; s < n; ++s) {
        if (s == spec.root) continue;
        (k++ % 2 == 0 ? a : b).push_back(s);
      }
      edges(spec.root, a.front()) = true;
      if (!b.empty()) edges(spec.root, b.front()) = true;
      for (const auto* branch : {&a, &b}) {
        const auto& br = *branch;
        for (std::size_t k = 0; k < br.size(); ++k) edges(br[k], br[(k + 1) % br.size()]) = true;
      }
      if (spec.kind == GraphKind::kSkipChain) {
        for (std::size_t k = 0; k + 1 < a.size() || k + 1 < b.size(); ++k) {
          if (k < a.size() && k + 1 < b.size()) edges(a[k], b[k + 1]) = true;
          if (k < b.size() && k + 1 < a.size()) edges(b[k], a[k + 1]) = true;
        }
      }
      break;
    }
  }
  edges.diagonal().setConstant(false);
  return edges;
}

TransitionKernel build_transition_kernel(const TransitionGraphSpec& spec) {
  if (spec.kind == GraphKind::kCustom) return TransitionKernel(spec.custom);
  if (spec.num_states < 2) throw std::invalid_argument("transition graph needs at least two states");
  if (!(spec.stay_prob > 0.0 && spec.stay_prob <= 1.0)) throw std::invalid_argument("stay_prob must lie in (0, 1]");
  const Index n = spec.num_states;
  const auto edges = graph_edges(spec);
  const bool tree = spec.kind == GraphKind::kTwoBranch || spec.kind == GraphKind::kSkipChain;
  std::mt19937_64 rng(spec.seed);
  std::exponential_distribution<double> unit_exp(1.0);

  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (Index s = 0; s < n; ++s) {
    const double stay = tree && s == spec.root ? 0.0 : spec.stay_prob;
    std::vector<Index> out;
    for (Index t = 0; t < n; ++t) {
      if (edges(s, t)) out.push_back(t);
    }
    if (out.empty()) {
      if (stay < 1.0) throw std::invalid_argument("state " + std::to_string(s) + " has no out-edges but stay_prob < 1");
      k(s, s) = 1.0;
      continue;
    }
    Eigen::VectorXd mass(static_cast<Index>(out.size()));
    if (spec.off_diagonal == OffDiagonal::kUniform) {
      mass.setOnes();
    } else {
      for (Index i = 0; i < mass.size(); ++i) mass(i) = unit_exp(rng);  // normalized exponentials: uniform on the simplex
    }
    mass *= (1.0 - stay) / mass.sum();
    for (std::size_t i = 0; i < out.size(); ++i) k(s, out[i]) = mass(static_cast<Index>(i));
    // Diagonal last so the row sums to 1 up to one rounding.
    k(s, s) = 0.0;
    k(s, s) = 1.0 - k.row(s).sum();
    if (k(s, s) < 0.0) k(s, s) = 0.0;
  }
  return TransitionKernel(k);
}

void validate_env_state(const EnvState& env, Index num_states) {
  if (env.true_state < 0 || env.true_state >= num_states) throw std::invalid_argument("true state out of range");
  for (std::size_t i = 1; i < env.schedule.size(); ++i) {
    if (env.schedule[i] <= env.schedule[i - 1]) throw std::invalid_argument("change schedule must be strictly increasing");
  }
}

Index sample_index(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
  const double total = probs.sum();
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double cumulative = 0.0;
  Index last = 0;
  for (Index i = 0; i < probs.size(); ++i) {
    if (probs(i) <= 0.0) continue;
    cumulative += probs(i);
    last = i;
    if (u < cumulative) return i;
  }
  return last;
}

void advance_state(EnvState& env, const TransitionKernel& kernel, std::mt19937_64& rng) {
  ++env.time;
  if (env.schedule.empty()) {
    env.true_state = sample_index(kernel.matrix().row(env.true_state).transpose(), rng);
    return;
  }
  if (!std::binary_search(env.schedule.begin(), env.schedule.end(), env.time)) return;
  Eigen::VectorXd row = kernel.matrix().row(env.true_state).transpose();
  row(env.true_state) = 0.0;
  if (row.sum() > 0.0) env.true_state = sample_index(row, rng);
}

StepOutcome env_step(EnvState& env, const TransitionKernel& kernel, const RewardModel& model, Index context,
                     std::span<const Index> offered, Index chosen_arm, std::mt19937_64& rng) {
  if (std::find(offered.begin(), offered.end(), chosen_arm) == offered.end()) {
    throw ProtocolViolation("arm " + std::to_string(chosen_arm) + " is not in the offered set at step " +
                            std::to_string(env.time));
  }
  StepOutcome out;
  out.context = context;
  out.offered_arms.assign(offered.begin(), offered.end());
  out.true_state = env.true_state;
  out.chosen_mean = model.mean(chosen_arm, context, env.true_state);
  out.optimal_mean = model.mean(best_arm(model, context, env.true_state, offered), context, env.true_state);
  out.reward = std::normal_distribution<double>(out.chosen_mean, model.std(chosen_arm, context, env.true_state))(rng);
  advance_state(env, kernel, rng);
  return out;
}

std::vector<Index> sample_arm_set(Index catalog_size, Index set_size, std::mt19937_64& rng) {
  if (set_size < 0 || set_size > catalog_size) throw std::invalid_argument("arm set larger than catalog");
  std::vector<Index> pool(static_cast<std::size_t>(catalog_size));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < set_size; ++i) {
    std::uniform_int_distribution<Index> pick(i, catalog_size - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(set_size));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace latentbandit
