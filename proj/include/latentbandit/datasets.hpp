#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latentbandit/types.hpp"

namespace latentbandit {

/// Raised for malformed ratings files; the message carries source:line.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Rating {
  long user = 0;
  long item = 0;
  double rating = 0.0;
};

/// Ratings with dense re-indexing. user_ids[i] is the raw id of dense user i.
struct RatingsTable {
  std::vector<Rating> ratings;
  std::vector<long> user_ids;
  std::vector<long> item_ids;
  std::vector<Index> user_index;  // dense user per rating
  std::vector<Index> item_index;  // dense item per rating

  Index num_users() const { return static_cast<Index>(user_ids.size()); }
  Index num_items() const { return static_cast<Index>(item_ids.size()); }
  std::size_t size() const { return ratings.size(); }
};

/// Builds the dense indices from `ratings` (ids sorted ascending).
RatingsTable make_table(std::vector<Rating> ratings);

/// Parses `user<sep>item<sep>rating[<sep>...]` lines. The separator is "::" when
/// the first non-blank line contains it, otherwise a tab or comma. The first line
/// is a header when its rating field is not numeric. Blank lines are skipped.
RatingsTable parse_ratings(std::istream& in, const std::string& source = "<stream>");

/// Drops users and items below the thresholds, repeating until both hold.
RatingsTable filter_ratings(const RatingsTable& table, std::size_t min_user_ratings, std::size_t min_item_ratings);

RatingsTable ingest_ratings(const std::string& path, std::size_t min_user_ratings, std::size_t min_item_ratings);

struct FactorModel {
  Eigen::MatrixXd U;  // [user x d]
  Eigen::MatrixXd V;  // [item x d]
  Index d() const { return U.cols(); }
};

struct PmfOptions {
  Index d = 10;
  double lambda_u = 0.001;
  double lambda_v = 0.001;
  double learning_rate = 2e-4;
  double validation_fraction = 0.1;
  int epochs = 100;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
};

struct PmfResult {
  FactorModel model;                     // parameters with the best validation RMSE
  double best_validation_rmse = 0.0;
  int best_epoch = 0;                    // 0 is the initialization
  std::vector<double> validation_rmse;   // per epoch, entry 0 before training
  std::vector<double> best_so_far;
};

/// Stochastic gradient descent on squared error with L2 penalties, one update
/// per training rating in a freshly shuffled order each epoch.
PmfResult pmf_train(const RatingsTable& table, const PmfOptions& options);

struct KMeansResult {
  std::vector<Index> assignment;
  Eigen::MatrixXd centroids;        // [k x d]
  std::vector<double> objective;    // within-cluster sum of squares after each iteration
  int iterations = 0;
};

/// Lloyd iterations from farthest-point seeding; the first seed is drawn at random.
KMeansResult kmeans_users(const Eigen::MatrixXd& points, Index k, std::uint64_t seed, int max_iterations = 300);

struct SuperUser {
  std::vector<Index> users;                    // users[s] backs state s
  std::vector<std::pair<Index, Index>> pairs;  // (first, second): users[second] is nearest to users[first]
};

/// One random user per cluster; for each pair the second member is replaced by
/// the user of its cluster nearest to the first member.
SuperUser sample_super_user(const Eigen::MatrixXd& U, std::span<const Index> assignment, Index num_clusters,
                            const std::vector<std::pair<Index, Index>>& pairs, std::uint64_t seed);

enum class VarianceMode { kFixed, kThreeNN, kSampledNormal };
VarianceMode variance_mode_from_string(const std::string& name);
std::string to_string(VarianceMode mode);

struct RewardBuildOptions {
  VarianceMode mode = VarianceMode::kFixed;
  double sigma = 0.25;
  double normal_mean = 2.0;
  double normal_std = 0.8;
  double floor = 0.01;
  int max_tries = 100;
  std::uint64_t seed = 0;
};

struct RewardBuildReport {
  long clamped = 0;  // stds raised to the floor
};

/// Arm a is catalog[a]; means are U[users[s]] . V[catalog[a]], features are the V rows.
RewardModel build_reward_model(const FactorModel& factors, const SuperUser& super_user, std::span<const Index> catalog,
                               const RewardBuildOptions& options, RewardBuildReport* report = nullptr);

/// Planted low-rank table: users drawn around `clusters` centers, items Gaussian,
/// every (user, item) pair rated. Cluster labels are returned alongside.
std::pair<RatingsTable, std::vector<Index>> planted_ratings(Index users, Index items, Index rank, Index clusters,
                                                            std::uint64_t seed, double spread = 0.05,
                                                            double noise = 0.0);

/// Full dataset-to-model pipeline driven by a JSON description (see README).
struct DatasetBuild {
  RatingsTable table;
  PmfResult pmf;
  KMeansResult clusters;
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<Index> catalog;
  RewardBuildOptions reward;
  nlohmann::json provenance;
};
DatasetBuild build_dataset(const nlohmann::json& config);
/// Reward model for one super-user draw from a built dataset.
RewardModel dataset_reward_model(const DatasetBuild& build, std::uint64_t super_user_seed,
                                 RewardBuildReport* report = nullptr);

}  // namespace latentbandit
