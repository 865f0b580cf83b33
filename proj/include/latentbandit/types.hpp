#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace latentbandit {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/// Thrown when a filtering step leaves no probability mass on any state.
class DegenerateEvidence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gaussian reward model indexed by (arm, context, state).
///
/// Each context owns an [arm x state] block of means and standard deviations.
/// Optional per-arm feature vectors back the linear baselines.
template <typename Scalar>
class BasicRewardModel {
 public:
  using Matrix = MatrixX<Scalar>;

  BasicRewardModel() = default;

  /// Single-context model from [arm x state] blocks.
  BasicRewardModel(Matrix means, Matrix stds)
      : BasicRewardModel(std::vector<Matrix>{std::move(means)}, std::vector<Matrix>{std::move(stds)}) {}

  BasicRewardModel(std::vector<Matrix> means, std::vector<Matrix> stds)
      : means_(std::move(means)), stds_(std::move(stds)) {
    validate();
  }

  Index num_arms() const { return means_.front().rows(); }
  Index num_states() const { return means_.front().cols(); }
  Index num_contexts() const { return static_cast<Index>(means_.size()); }

  Scalar mean(Index arm, Index context, Index state) const { return means_[context](arm, state); }
  Scalar std(Index arm, Index context, Index state) const { return stds_[context](arm, state); }

  const Matrix& means(Index context = 0) const { return means_[context]; }
  const Matrix& stds(Index context = 0) const { return stds_[context]; }

  bool has_features() const { return features_.size() > 0; }
  /// [arm x d] feature matrix; empty when the model carries no features.
  const Matrix& features() const { return features_; }
  void set_features(Matrix features) {
    if (features.size() > 0 && features.rows() != num_arms()) {
      throw std::invalid_argument("feature matrix must have one row per arm");
    }
    if (!features.allFinite()) throw std::invalid_argument("features must be finite");
    features_ = std::move(features);
  }

  template <typename Other>
  BasicRewardModel<Other> cast() const {
    std::vector<MatrixX<Other>> m, s;
    for (Index x = 0; x < num_contexts(); ++x) {
      m.push_back(means_[x].template cast<Other>());
      s.push_back(stds_[x].template cast<Other>());
    }
    BasicRewardModel<Other> out(std::move(m), std::move(s));
    if (has_features()) out.set_features(features_.template cast<Other>());
    return out;
  }

 private:
  void validate() const {
    if (means_.empty()) throw std::invalid_argument("reward model needs at least one context");
    if (means_.size() != stds_.size()) throw std::invalid_argument("means/stds context count mismatch");
    const Index arms = means_.front().rows();
    const Index states = means_.front().cols();
    if (arms < 2) throw std::invalid_argument("reward model needs at least two arms");
    if (states < 2) throw std::invalid_argument("reward model needs at least two states");
    for (std::size_t x = 0; x < means_.size(); ++x) {
      if (means_[x].rows() != arms || means_[x].cols() != states || stds_[x].rows() != arms ||
          stds_[x].cols() != states) {
        throw std::invalid_argument("inconsistent reward model block shapes");
      }
      if (!means_[x].allFinite()) throw std::invalid_argument("reward means must be finite");
      if (!stds_[x].allFinite() || (stds_[x].array() <= Scalar(0)).any()) {
        throw std::invalid_argument("reward stds must be finite and strictly positive");
      }
    }
  }

  std::vector<Matrix> means_;
  std::vector<Matrix> stds_;
  Matrix features_;
};

/// Row-stochastic [state x state] matrix; row s is P(next | current = s).
template <typename Scalar>
class BasicTransitionKernel {
 public:
  using Matrix = MatrixX<Scalar>;

  BasicTransitionKernel() = default;
  explicit BasicTransitionKernel(Matrix matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 1) {
      throw std::invalid_argument("transition kernel must be square and non-empty");
    }
    if (!matrix_.allFinite() || (matrix_.array() < Scalar(0)).any() || (matrix_.array() > Scalar(1)).any()) {
      throw std::invalid_argument("transition probabilities must lie in [0, 1]");
    }
    for (Index s = 0; s < matrix_.rows(); ++s) {
      if (std::abs(matrix_.row(s).sum() - Scalar(1)) > Scalar(1e-12)) {
        throw std::invalid_argument("transition kernel row " + std::to_string(s) + " does not sum to 1");
      }
    }
  }

  static BasicTransitionKernel identity(Index states) { return BasicTransitionKernel(Matrix::Identity(states, states)); }

  Index num_states() const { return matrix_.rows(); }
  const Matrix& matrix() const { return matrix_; }
  Scalar operator()(Index from, Index to) const { return matrix_(from, to); }
  bool is_identity() const { return matrix_.isIdentity(0); }

 private:
  Matrix matrix_;
};

/// Probability vector over latent states.
template <typename Scalar>
class BasicBeliefState {
 public:
  using Vector = VectorX<Scalar>;

  BasicBeliefState() = default;
  explicit BasicBeliefState(Vector probs) : probs_(std::move(probs)) {
    if (probs_.size() < 1 || !probs_.allFinite() || (probs_.array() < Scalar(0)).any()) {
      throw std::invalid_argument("belief entries must be finite and non-negative");
    }
    if (std::abs(probs_.sum() - Scalar(1)) > Scalar(1e-12)) {
      throw std::invalid_argument("belief must sum to 1");
    }
  }

  static BasicBeliefState uniform(Index states) {
    return BasicBeliefState(Vector::Constant(states, Scalar(1) / Scalar(states)));
  }
  static BasicBeliefState point_mass(Index states, Index at) {
    Vector v = Vector::Zero(states);
    v(at) = Scalar(1);
    return BasicBeliefState(std::move(v));
  }
  /// Normalizes a non-negative mass vector; throws DegenerateEvidence on zero total.
  static BasicBeliefState normalized(Vector mass) {
    const Scalar total = mass.sum();
    if (!(total > Scalar(0)) || !std::isfinite(total)) {
      throw DegenerateEvidence("posterior mass vanished on every state");
    }
    mass /= total;
    return BasicBeliefState(std::move(mass), Trusted{});
  }

  Index size() const { return probs_.size(); }
  Scalar operator[](Index s) const { return probs_(s); }
  const Vector& probs() const { return probs_; }

  /// Most likely state, lowest index on ties.
  Index argmax() const {
    Index best = 0;
    for (Index s = 1; s < probs_.size(); ++s) {
      if (probs_(s) > probs_(best)) best = s;
    }
    return best;
  }

 private:
  struct Trusted {};
  BasicBeliefState(Vector probs, Trusted) : probs_(std::move(probs)) {}

  Vector probs_;
};

using RewardModel = BasicRewardModel<double>;
using TransitionKernel = BasicTransitionKernel<double>;
using BeliefState = BasicBeliefState<double>;

/// Index of the arm with the largest mean among `arms` for a given state, lowest index on ties.
template <typename Scalar, typename ArmRange>
Index best_arm(const BasicRewardModel<Scalar>& model, Index context, Index state, const ArmRange& arms) {
  Index best = -1;
  Scalar best_mean = Scalar(0);
  for (auto a : arms) {
    const Scalar m = model.mean(static_cast<Index>(a), context, state);
    if (best < 0 || m > best_mean || (m == best_mean && static_cast<Index>(a) < best)) {
      best = static_cast<Index>(a);
      best_mean = m;
    }
  }
  return best;
}

/// All arm indices [0, num_arms).
template <typename Scalar>
std::vector<Index> all_arms(const BasicRewardModel<Scalar>& model) {
  std::vector<Index> arms(static_cast<std::size_t>(model.num_arms()));
  for (Index a = 0; a < model.num_arms(); ++a) arms[static_cast<std::size_t>(a)] = a;
  return arms;
}

}  // namespace latentbandit
