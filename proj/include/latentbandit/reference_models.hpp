#pragma once

#include "latentbandit/types.hpp"

namespace latentbandit {

/// Two hard-to-separate best arms plus a low-reward, low-noise third arm.
/// Rows are arms, columns are states.
inline RewardModel two_state_model(double info_std = 0.01, double std = 0.5) {
  Eigen::MatrixXd means(3, 2);
  means << 2.1, 2.05,
           2.05, 2.1,
           1.7, 1.5;
  Eigen::MatrixXd stds = Eigen::MatrixXd::Constant(3, 2, std);
  stds.row(2).setConstant(info_std);
  return RewardModel(means, stds);
}

/// Two-state model used to compare explore-commit and explore-then-sample strategies;
/// the informative arm has std 0.05.
inline RewardModel explore_commit_model() { return two_state_model(0.05, 0.5); }

/// Five arms by five states. Columns {0, 1} and {2, 3} are near-duplicates under
/// their best arms; the last arm is worst everywhere but separates the states.
inline RewardModel five_state_model(double info_std = 0.01, double std = 0.5) {
  Eigen::MatrixXd means(5, 5);
  means << 2.1,  2.05, 1.40, 1.45, 1.0,
           2.05, 2.1,  1.45, 1.40, 0.95,
           2.0,  1.9,  1.50, 1.55, 1.05,
           2.05, 2.1,  1.55, 1.50, 1.1,
           1.0,  0.9,  0.8,  0.7,  0.6;
  Eigen::MatrixXd stds = Eigen::MatrixXd::Constant(5, 5, std);
  stds.row(4).setConstant(info_std);
  return RewardModel(means, stds);
}

/// Two-state family for benefit-region sweeps.
///
/// Best arms pay `best` in their own state and `best - delta_r` in the other;
/// in state 1 their std grows by `delta_sigma`. The informative arm pays
/// `best - info_cost` in state 0 and `best - info_cost - info_gap` in state 1.
struct TwoStateFamily {
  double best = 2.1;
  double delta_r = 0.05;
  double std = 0.5;
  double delta_sigma = 0.0;
  double info_cost = 0.4;
  double info_gap = 0.2;
  double info_std = 0.01;

  RewardModel model() const {
    Eigen::MatrixXd means(3, 2);
    means << best, best - delta_r,
             best - delta_r, best,
             best - info_cost, best - info_cost - info_gap;
    Eigen::MatrixXd stds(3, 2);
    stds << std, std + delta_sigma,
            std, std + delta_sigma,
            info_std, info_std;
    return RewardModel(means, stds);
  }
};

}  // namespace latentbandit
