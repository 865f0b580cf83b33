#pragma once

#include <deque>
#include <span>

#include "latentbandit/types.hpp"

namespace latentbandit {

/// |sum of the newer half - sum of the older half| > threshold over the last
/// `window` rewards. Abstains (false) until the window is full.
bool cd_scalar_check(std::span<const double> rewards, int window, double threshold);

/// Weighted drift between least-squares fits on the two window halves,
/// sqrt(dW' S dW) with S the mean outer product of all window features.
/// Rows of `features` are oldest first. Rank-deficient halves use the
/// minimum-norm solution.
double cd_linear_statistic(const Eigen::MatrixXd& features, const Eigen::VectorXd& rewards);
bool cd_linear_check(const Eigen::MatrixXd& features, const Eigen::VectorXd& rewards, int window, double threshold);

/// Sliding window of scalar rewards.
class ScalarChangeDetector {
 public:
  ScalarChangeDetector(int window, double threshold);
  /// Adds a reward and reports whether the full window now signals a change.
  bool push(double reward);
  void clear() { buf_.clear(); }
  int window() const { return window_; }
  double threshold() const { return threshold_; }

 private:
  int window_;
  double threshold_;
  std::deque<double> buf_;
};

/// Sliding window of (feature, reward) pairs.
class LinearChangeDetector {
 public:
  LinearChangeDetector(int window, double threshold, Index dim);
  bool push(const Eigen::VectorXd& feature, double reward);
  void clear() {
    feats_.clear();
    rewards_.clear();
  }

 private:
  int window_;
  double threshold_;
  Index dim_;
  std::deque<Eigen::VectorXd> feats_;
  std::deque<double> rewards_;
};

/// One exponential-weights step over experts followed by mixing with the
/// uniform distribution so that every weight stays >= weight_floor.
///
/// `advice` holds each expert's probability of the played arm. The played arm's
/// reward is importance weighted by its total probability under `weights`.
Eigen::VectorXd exp4s_update(const Eigen::VectorXd& weights, const Eigen::VectorXd& advice, double reward,
                             double learning_rate, double weight_floor);

}  // namespace latentbandit
