#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "latentbandit/types.hpp"

namespace latentbandit {

/// Raised when a policy plays an arm outside the offered set.
class ProtocolViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GraphKind { kFullyConnected, kSkipChain, kTwoBranch, kCustom };
enum class OffDiagonal { kUniform, kRandomNonuniform };

GraphKind graph_kind_from_string(const std::string& name);
std::string to_string(GraphKind kind);
OffDiagonal off_diagonal_from_string(const std::string& name);
std::string to_string(OffDiagonal mode);

/// Transition-graph recipe.
///
/// Tree graphs (two_branch, skip_chain) start at `root`, which leaves
/// immediately. The remaining states in index order alternate between branch A
/// and branch B; each branch is a chain closed into a cycle. skip_chain adds
/// cross edges A_k -> B_{k+1} and B_k -> A_{k+1}.
struct TransitionGraphSpec {
  GraphKind kind = GraphKind::kFullyConnected;
  Index num_states = 2;
  double stay_prob = 0.995;
  OffDiagonal off_diagonal = OffDiagonal::kUniform;
  std::uint64_t seed = 0;
  Index root = 0;
  Eigen::MatrixXd custom;  // used when kind == kCustom
};

/// Off-diagonal adjacency; entry (i, j) is true when i -> j is an edge.
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> graph_edges(const TransitionGraphSpec& spec);

TransitionKernel build_transition_kernel(const TransitionGraphSpec& spec);

struct EnvState {
  Index true_state = 0;
  int time = 0;
  std::vector<int> schedule;  // strictly increasing steps at which the state changes
};

struct StepOutcome {
  Index context = 0;
  std::vector<Index> offered_arms;
  double reward = 0.0;
  double chosen_mean = 0.0;
  double optimal_mean = 0.0;
  Index true_state = 0;
};

/// Checks schedule ordering and state range.
void validate_env_state(const EnvState& env, Index num_states);

/// Moves the chain one step. With a schedule, the state changes only at listed
/// steps, to a successor drawn from the kernel row with the self-loop removed.
void advance_state(EnvState& env, const TransitionKernel& kernel, std::mt19937_64& rng);

/// Draws the reward for `chosen_arm` from the true state and advances the chain.
StepOutcome env_step(EnvState& env, const TransitionKernel& kernel, const RewardModel& model, Index context,
                     std::span<const Index> offered, Index chosen_arm, std::mt19937_64& rng);

/// Uniform sample without replacement, returned in ascending order.
std::vector<Index> sample_arm_set(Index catalog_size, Index set_size, std::mt19937_64& rng);

/// Draws an index from a probability vector.
Index sample_index(const Eigen::VectorXd& probs, std::mt19937_64& rng);

}  // namespace latentbandit
