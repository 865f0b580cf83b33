#include "latentbandit/change_detection.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/QR>

namespace latentbandit {

namespace {

void check_window(int window) {
  if (window < 2 || window % 2 != 0) throw std::invalid_argument("change-detector window must be even and >= 2");
}

}  // namespace

bool cd_scalar_check(std::span<const double> rewards, int window, double threshold) {
  check_window(window);
  if (static_cast<int>(rewards.size()) < window) return false;
  const auto recent = rewards.last(static_cast<std::size_t>(window));
  const std::size_t half = static_cast<std::size_t>(window / 2);
  double older = 0.0, newer = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    older += recent[i];
    newer += recent[half + i];
  }
  return std::abs(newer - older) > threshold;
}

double cd_linear_statistic(const Eigen::MatrixXd& features, const Eigen::VectorXd& rewards) {
  const Index n = features.rows();
  if (n != rewards.size() || n < 2 || n % 2 != 0) throw std::invalid_argument("linear detector needs an even, matching window");
  const Index half = n / 2;
  auto fit = [&](Index start) -> Eigen::VectorXd {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(features.middleRows(start, half));
    return cod.solve(rewards.segment(start, half));
  };
  const Eigen::VectorXd drift = fit(half) - fit(0);
  const Eigen::MatrixXd cov = features.transpose() * features / static_cast<double>(n);
  return std::sqrt(std::max(0.0, drift.dot(cov * drift)));
}

bool cd_linear_check(const Eigen::MatrixXd& features, const Eigen::VectorXd& rewards, int window, double threshold) {
  check_window(window);
  if (features.rows() < window) return false;
  const Index start = features.rows() - window;
  return cd_linear_statistic(features.bottomRows(window), rewards.segment(start, window)) >= threshold;
}

ScalarChangeDetector::ScalarChangeDetector(int window, double threshold) : window_(window), threshold_(threshold) {
  check_window(window);
}

bool ScalarChangeDetector::push(double reward) {
  buf_.push_back(reward);
  if (static_cast<int>(buf_.size()) > window_) buf_.pop_front();
  if (static_cast<int>(buf_.size()) < window_) return false;
  std::vector<double> flat(buf_.begin(), buf_.end());
  return cd_scalar_check(flat, window_, threshold_);
}

LinearChangeDetector::LinearChangeDetector(int window, double threshold, Index dim)
    : window_(window), threshold_(threshold), dim_(dim) {
  check_window(window);
}

bool LinearChangeDetector::push(const Eigen::VectorXd& feature, double reward) {
  feats_.push_back(feature);
  rewards_.push_back(reward);
  if (static_cast<int>(feats_.size()) > window_) {
    feats_.pop_front();
    rewards_.pop_front();
  }
  if (static_cast<int>(feats_.size()) < window_) return false;
  Eigen::MatrixXd x(window_, dim_);
  Eigen::VectorXd r(window_);
  for (int i = 0; i < window_; ++i) {
    x.row(i) = feats_[static_cast<std::size_t>(i)].transpose();
    r(i) = rewards_[static_cast<std::size_t>(i)];
  }
  return cd_linear_check(x, r, window_, threshold_);
}

Eigen::VectorXd exp4s_update(const Eigen::VectorXd& weights, const Eigen::VectorXd& advice, double reward,
                             double learning_rate, double weight_floor) {
  const Index experts = weights.size();
  if (advice.size() != experts) throw std::invalid_argument("exp4s_update: advice size mismatch");
  if (weight_floor < 0.0 || weight_floor * static_cast<double>(experts) > 1.0 + 1e-12) {
    throw std::invalid_argument("exp4s_update: weight floor must lie in [0, 1/experts]");
  }
  const double played = weights.dot(advice);
  Eigen::VectorXd gain = Eigen::VectorXd::Zero(experts);
  if (played > 0.0) gain = advice * (reward / played);
  Eigen::VectorXd log_w = weights.array().max(1e-300).log().matrix() + learning_rate * gain;
  log_w.array() -= log_w.maxCoeff();
  Eigen::VectorXd next = log_w.array().exp().matrix();
  next /= next.sum();
  const double mix = 1.0 - weight_floor * static_cast<double>(experts);
  next = (mix * next).array() + weight_floor;
  return next / next.sum();
}

}  // namespace latentbandit
