#include "latentbandit/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace latentbandit {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + sep.size();
  }
  return out;
}

template <typename T>
bool parse_number(const std::string& text, T& value) {
  if (text.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    value = std::strtod(text.c_str(), &end);
    return end == text.c_str() + text.size() && std::isfinite(value);
  } else {
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    return ec == std::errc() && ptr == text.data() + text.size();
  }
}

double squared_distance(const Eigen::MatrixXd& a, Index i, const Eigen::MatrixXd& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace

RatingsTable make_table(std::vector<Rating> ratings) {
  RatingsTable t;
  t.ratings = std::move(ratings);
  for (const auto& r : t.ratings) {
    t.user_ids.push_back(r.user);
    t.item_ids.push_back(r.item);
  }
  for (auto* ids : {&t.user_ids, &t.item_ids}) {
    std::sort(ids->begin(), ids->end());
    ids->erase(std::unique(ids->begin(), ids->end()), ids->end());
  }
  t.user_index.reserve(t.ratings.size());
  t.item_index.reserve(t.ratings.size());
  for (const auto& r : t.ratings) {
    t.user_index.push_back(std::lower_bound(t.user_ids.begin(), t.user_ids.end(), r.user) - t.user_ids.begin());
    t.item_index.push_back(std::lower_bound(t.item_ids.begin(), t.item_ids.end(), r.item) - t.item_ids.begin());
  }
  return t;
}

RatingsTable parse_ratings(std::istream& in, const std::string& source) {
  std::vector<Rating> ratings;
  std::string line;
  std::string sep;
  long line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (sep.empty()) {
      if (line.find("::") != std::string::npos) {
        sep = "::";
      } else if (line.find('\t') != std::string::npos) {
        sep = "\t";
      } else {
        sep = ",";
      }
    }
    const auto fields = split(line, sep);
    auto fail = [&](const std::string& what) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + what);
    };
    if (fields.size() < 3) {
      if (first) fail("expected at least three fields (user, item, rating)");
      fail("expected at least three fields, found " + std::to_string(fields.size()));
    }
    Rating r;
    const bool rating_ok = parse_number(fields[2], r.rating);
    if (first && !rating_ok) {
      first = false;  // header line
      continue;
    }
    first = false;
    if (!parse_number(fields[0], r.user)) fail("bad user id '" + fields[0] + "'");
    if (!parse_number(fields[1], r.item)) fail("bad item id '" + fields[1] + "'");
    if (!rating_ok) fail("bad rating '" + fields[2] + "'");
    ratings.push_back(r);
  }
  return make_table(std::move(ratings));
}

RatingsTable filter_ratings(const RatingsTable& table, std::size_t min_user_ratings, std::size_t min_item_ratings) {
  std::vector<Rating> current = table.ratings;
  while (true) {
    std::map<long, std::size_t> per_user, per_item;
    for (const auto& r : current) {
      ++per_user[r.user];
      ++per_item[r.item];
    }
    std::vector<Rating> kept;
    kept.reserve(current.size());
    for (const auto& r : current) {
      if (per_user[r.user] >= min_user_ratings && per_item[r.item] >= min_item_ratings) kept.push_back(r);
    }
    if (kept.size() == current.size()) break;
    current = std::move(kept);
  }
  if (current.empty()) throw DataError("no ratings left after filtering");
  return make_table(std::move(current));
}

RatingsTable ingest_ratings(const std::string& path, std::size_t min_user_ratings, std::size_t min_item_ratings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ratings file '" + path + "'");
  return filter_ratings(parse_ratings(in, path), min_user_ratings, min_item_ratings);
}

// ---------------------------------------------------------------------------

PmfResult pmf_train(const RatingsTable& table, const PmfOptions& o) {
  if (table.size() == 0) throw DataError("pmf_train: empty table");
  if (!(o.validation_fraction > 0.0 && o.validation_fraction < 1.0)) {
    throw std::invalid_argument("pmf_train: validation_fraction must lie in (0, 1)");
  }
  if (o.d < 1) throw std::invalid_argument("pmf_train: d must be >= 1");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> init(0.0, o.init_scale);

  FactorModel m;
  m.U.resize(table.num_users(), o.d);
  m.V.resize(table.num_items(), o.d);
  for (Index i = 0; i < m.U.size(); ++i) m.U.data()[i] = init(rng);
  for (Index i = 0; i < m.V.size(); ++i) m.V.data()[i] = init(rng);

  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(o.validation_fraction * table.size())));
  if (n_val >= table.size()) throw std::invalid_argument("pmf_train: validation split leaves no training data");
  std::vector<std::size_t> val(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));

  auto rmse = [&](const FactorModel& f) {
    double se = 0.0;
    for (auto k : val) {
      const double e = table.ratings[k].rating - f.U.row(table.user_index[k]).dot(f.V.row(table.item_index[k]));
      se += e * e;
    }
    return std::sqrt(se / static_cast<double>(val.size()));
  };

  PmfResult out;
  out.model = m;
  out.best_validation_rmse = rmse(m);
  out.validation_rmse.push_back(out.best_validation_rmse);
  out.best_so_far.push_back(out.best_validation_rmse);

  Eigen::RowVectorXd u_old(o.d);
  for (int epoch = 1; epoch <= o.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double loss = 0.0;
    for (auto k : train) {
      auto u = m.U.row(table.user_index[k]);
      auto v = m.V.row(table.item_index[k]);
      const double e = table.ratings[k].rating - u.dot(v);
      loss += e * e;
      u_old = u;
      u += o.learning_rate * (e * v - o.lambda_u * u);
      v += o.learning_rate * (e * u_old - o.lambda_v * v);
    }
    const double score = rmse(m);
    if (!std::isfinite(loss) || !std::isfinite(score)) {
      throw std::runtime_error("pmf_train diverged at epoch " + std::to_string(epoch));
    }
    out.validation_rmse.push_back(score);
    if (score < out.best_validation_rmse) {
      out.best_validation_rmse = score;
      out.best_epoch = epoch;
      out.model = m;
    }
    out.best_so_far.push_back(out.best_validation_rmse);
  }
  return out;
}

// ---------------------------------------------------------------------------

KMeansResult kmeans_users(const Eigen::MatrixXd& points, Index k, std::uint64_t seed, int max_iterations) {
  const Index n = points.rows();
  if (k < 1 || k > n) throw std::invalid_argument("kmeans_users: need 1 <= k <= number of points");
  std::mt19937_64 rng(seed);

  KMeansResult r;
  r.centroids.resize(k, points.cols());
  Eigen::VectorXd nearest = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  Index next = std::uniform_int_distribution<Index>(0, n - 1)(rng);
  for (Index c = 0; c < k; ++c) {
    r.centroids.row(c) = points.row(next);
    for (Index i = 0; i < n; ++i) nearest(i) = std::min(nearest(i), squared_distance(points, i, r.centroids, c));
    nearest.maxCoeff(&next);  // first index among ties
  }

  r.assignment.assign(static_cast<std::size_t>(n), -1);
  for (r.iterations = 0; r.iterations < max_iterations; ++r.iterations) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      double best_d = squared_distance(points, i, r.centroids, 0);
      for (Index c = 1; c < k; ++c) {
        const double d = squared_distance(points, i, r.centroids, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.assignment[static_cast<std::size_t>(i)] != best) {
        r.assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(r.assignment[static_cast<std::size_t>(i)]) += points.row(i);
      counts(r.assignment[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (Index c = 0; c < k; ++c) {
      if (counts(c) > 0.0) {
        r.centroids.row(c) = sums.row(c) / counts(c);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its own centroid.
      Index far = 0;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        const double d = squared_distance(points, i, r.centroids, r.assignment[static_cast<std::size_t>(i)]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      r.centroids.row(c) = points.row(far);
      r.assignment[static_cast<std::size_t>(far)] = c;
      changed = true;
    }
    double wcss = 0.0;
    for (Index i = 0; i < n; ++i) wcss += squared_distance(points, i, r.centroids, r.assignment[static_cast<std::size_t>(i)]);
    r.objective.push_back(wcss);
    if (!changed) break;
  }
  return r;
}

SuperUser sample_super_user(const Eigen::MatrixXd& U, std::span<const Index> assignment, Index num_clusters,
                            const std::vector<std::pair<Index, Index>>& pairs, std::uint64_t seed) {
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(num_clusters));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const Index c = assignment[i];
    if (c < 0 || c >= num_clusters) throw std::invalid_argument("cluster label out of range");
    members[static_cast<std::size_t>(c)].push_back(static_cast<Index>(i));
  }
  std::mt19937_64 rng(seed);
  SuperUser su;
  su.pairs = pairs;
  for (const auto& m : members) {
    if (m.empty()) throw std::invalid_argument("sample_super_user: empty cluster");
    su.users.push_back(m[std::uniform_int_distribution<std::size_t>(0, m.size() - 1)(rng)]);
  }
  for (const auto& [first, second] : pairs) {
    if (first < 0 || second < 0 || first >= num_clusters || second >= num_clusters || first == second) {
      throw std::invalid_argument("invalid super-user pair");
    }
    const Index anchor = su.users[static_cast<std::size_t>(first)];
    Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index cand : members[static_cast<std::size_t>(second)]) {
      const double d = squared_distance(U, anchor, U, cand);
      if (d < best_d) {
        best_d = d;
        best = cand;
      }
    }
    su.users[static_cast<std::size_t>(second)] = best;
  }
  return su;
}

VarianceMode variance_mode_from_string(const std::string& name) {
  if (name == "fixed") return VarianceMode::kFixed;
  if (name == "three_nn") return VarianceMode::kThreeNN;
  if (name == "sampled_normal") return VarianceMode::kSampledNormal;
  throw std::invalid_argument("unknown variance mode '" + name + "'");
}

std::string to_string(VarianceMode mode) {
  switch (mode) {
    case VarianceMode::kFixed: return "fixed";
    case VarianceMode::kThreeNN: return "three_nn";
    case VarianceMode::kSampledNormal: return "sampled_normal";
  }
  return "fixed";
}

RewardModel build_reward_model(const FactorModel& f, const SuperUser& su, std::span<const Index> catalog,
                               const RewardBuildOptions& o, RewardBuildReport* report) {
  if (catalog.empty()) throw std::invalid_argument("build_reward_model: empty catalog");
  if (!(o.floor > 0.0)) throw std::invalid_argument("build_reward_model: floor must be positive");
  const Index arms = static_cast<Index>(catalog.size());
  const Index states = static_cast<Index>(su.users.size());
  Eigen::MatrixXd users(states, f.d());
  for (Index s = 0; s < states; ++s) users.row(s) = f.U.row(su.users[static_cast<std::size_t>(s)]);
  Eigen::MatrixXd items(arms, f.d());
  for (Index a = 0; a < arms; ++a) items.row(a) = f.V.row(catalog[static_cast<std::size_t>(a)]);

  const Eigen::MatrixXd means = items * users.transpose();
  Eigen::MatrixXd stds(arms, states);
  long clamped = 0;
  auto floor_it = [&](double s) {
    if (s < o.floor) {
      ++clamped;
      return o.floor;
    }
    return s;
  };

  switch (o.mode) {
    case VarianceMode::kFixed:
      stds.setConstant(floor_it(o.sigma));
      if (o.sigma < o.floor) clamped = arms * states;
      break;
    case VarianceMode::kThreeNN: {
      if (arms < 4) throw std::invalid_argument("three_nn variance needs at least four catalog items");
      for (Index a = 0; a < arms; ++a) {
        std::vector<std::pair<double, Index>> dist;
        for (Index b = 0; b < arms; ++b) {
          if (b != a) dist.emplace_back((items.row(a) - items.row(b)).squaredNorm(), b);
        }
        std::partial_sort(dist.begin(), dist.begin() + 3, dist.end());
        for (Index s = 0; s < states; ++s) {
          double mean = 0.0, sq = 0.0;
          for (int k = 0; k < 3; ++k) mean += means(dist[static_cast<std::size_t>(k)].second, s) / 3.0;
          for (int k = 0; k < 3; ++k) {
            const double d = means(dist[static_cast<std::size_t>(k)].second, s) - mean;
            sq += d * d / 3.0;
          }
          stds(a, s) = floor_it(std::sqrt(sq));
        }
      }
      break;
    }
    case VarianceMode::kSampledNormal: {
      std::mt19937_64 rng(o.seed);
      std::normal_distribution<double> draw(o.normal_mean, o.normal_std);
      for (Index a = 0; a < arms; ++a) {
        double s = -1.0;
        for (int t = 0; t < o.max_tries && s < o.floor; ++t) s = draw(rng);
        stds.row(a).setConstant(floor_it(s));
      }
      break;
    }
  }
  if (report) report->clamped = clamped;
  RewardModel model(means, stds);
  model.set_features(items);
  return model;
}

std::pair<RatingsTable, std::vector<Index>> planted_ratings(Index users, Index items, Index rank, Index clusters,
                                                            std::uint64_t seed, double spread, double noise) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rank));
  Eigen::MatrixXd centers(clusters, rank), V(items, rank);
  for (Index i = 0; i < centers.size(); ++i) centers.data()[i] = normal(rng) * std::sqrt(scale);
  for (Index i = 0; i < V.size(); ++i) V.data()[i] = normal(rng) * std::sqrt(scale);
  std::vector<Index> labels(static_cast<std::size_t>(users));
  std::vector<Rating> ratings;
  ratings.reserve(static_cast<std::size_t>(users * items));
  for (Index u = 0; u < users; ++u) {
    const Index c = u % clusters;
    labels[static_cast<std::size_t>(u)] = c;
    Eigen::RowVectorXd vec = centers.row(c);
    for (Index j = 0; j < rank; ++j) vec(j) += spread * normal(rng);
    for (Index i = 0; i < items; ++i) {
      const double r = vec.dot(V.row(i)) + (noise > 0.0 ? noise * normal(rng) : 0.0);
      ratings.push_back({static_cast<long>(u), static_cast<long>(i), r});
    }
  }
  return {make_table(std::move(ratings)), std::move(labels)};
}

// ---------------------------------------------------------------------------

DatasetBuild build_dataset(const nlohmann::json& c) {
  DatasetBuild b;
  auto num = [&](const nlohmann::json& obj, const char* key, auto fallback) {
    return obj.contains(key) ? obj.at(key).get<decltype(fallback)>() : fallback;
  };
  const auto min_user = num(c, "min_user_ratings", std::size_t{0});
  const auto min_item = num(c, "min_item_ratings", std::size_t{0});
  if (c.contains("ratings_path")) {
    b.table = ingest_ratings(c.at("ratings_path").get<std::string>(), min_user, min_item);
  } else if (c.contains("planted")) {
    const auto& p = c.at("planted");
    b.table = planted_ratings(num(p, "users", Index{500}), num(p, "items", Index{400}), num(p, "rank", Index{10}),
                              num(p, "clusters", Index{5}), num(p, "seed", std::uint64_t{0}), num(p, "spread", 0.05),
                              num(p, "noise", 0.0))
                  .first;
    b.table = filter_ratings(b.table, min_user, min_item);
  } else {
    throw std::invalid_argument("dataset needs 'ratings_path' or 'planted'");
  }

  PmfOptions pmf;
  const nlohmann::json pj = c.value("pmf", nlohmann::json::object());
  pmf.d = num(pj, "d", pmf.d);
  pmf.lambda_u = num(pj, "lambda_u", pmf.lambda_u);
  pmf.lambda_v = num(pj, "lambda_v", pmf.lambda_v);
  pmf.learning_rate = num(pj, "learning_rate", pmf.learning_rate);
  pmf.validation_fraction = num(pj, "validation_fraction", pmf.validation_fraction);
  pmf.epochs = num(pj, "epochs", pmf.epochs);
  pmf.init_scale = num(pj, "init_scale", pmf.init_scale);
  pmf.seed = num(pj, "seed", pmf.seed);
  b.pmf = pmf_train(b.table, pmf);

  const Index k = num(c, "num_states", Index{5});
  b.clusters = kmeans_users(b.pmf.model.U, k, num(c, "kmeans_seed", std::uint64_t{0}));
  if (c.contains("pairs")) {
    for (const auto& p : c.at("pairs")) b.pairs.emplace_back(p.at(0).get<Index>(), p.at(1).get<Index>());
  }
  // An array lists dense item indices; a number takes the first that many items.
  Index first = b.table.num_items();
  if (c.contains("catalog") && c.at("catalog").is_array()) {
    b.catalog = c.at("catalog").get<std::vector<Index>>();
  } else if (c.contains("catalog") && c.at("catalog").is_number_integer()) {
    first = c.at("catalog").get<Index>();
    if (first < 1 || first > b.table.num_items()) throw DataError("catalog size out of range");
  } else if (c.contains("catalog") && !c.at("catalog").is_null()) {
    throw DataError("catalog must be an item index array or a count");
  }
  if (b.catalog.empty()) {
    b.catalog.resize(static_cast<std::size_t>(first));
    std::iota(b.catalog.begin(), b.catalog.end(), Index{0});
  }
  for (Index item : b.catalog) {
    if (item < 0 || item >= b.table.num_items()) throw DataError("catalog item " + std::to_string(item) + " out of range");
  }
  const nlohmann::json vj = c.value("variance", nlohmann::json::object());
  b.reward.mode = variance_mode_from_string(vj.value("mode", std::string("fixed")));
  b.reward.sigma = num(vj, "sigma", b.reward.sigma);
  b.reward.normal_mean = num(vj, "normal_mean", b.reward.normal_mean);
  b.reward.normal_std = num(vj, "normal_std", b.reward.normal_std);
  b.reward.floor = num(vj, "floor", b.reward.floor);
  b.reward.seed = num(vj, "seed", b.reward.seed);

  b.provenance = {
      {"source", c.contains("ratings_path") ? c.at("ratings_path") : nlohmann::json("planted")},
      {"min_user_ratings", min_user},
      {"min_item_ratings", min_item},
      {"num_users", b.table.num_users()},
      {"num_items", b.table.num_items()},
      {"num_ratings", b.table.size()},
      {"pmf",
       {{"d", pmf.d},
        {"lambda_u", pmf.lambda_u},
        {"lambda_v", pmf.lambda_v},
        {"learning_rate", pmf.learning_rate},
        {"validation_fraction", pmf.validation_fraction},
        {"epochs", pmf.epochs},
        {"init_scale", pmf.init_scale},
        {"seed", pmf.seed},
        {"best_epoch", b.pmf.best_epoch},
        {"best_validation_rmse", b.pmf.best_validation_rmse}}},
      {"num_states", k},
      {"kmeans_iterations", b.clusters.iterations},
      {"variance", {{"mode", to_string(b.reward.mode)}, {"sigma", b.reward.sigma}, {"floor", b.reward.floor},
                    {"seed", b.reward.seed}}},
  };
  return b;
}

RewardModel dataset_reward_model(const DatasetBuild& build, std::uint64_t super_user_seed, RewardBuildReport* report) {
  const SuperUser su = sample_super_user(build.pmf.model.U, build.clusters.assignment,
                                         build.clusters.centroids.rows(), build.pairs, super_user_seed);
  return build_reward_model(build.pmf.model, su, build.catalog, build.reward, report);
}

}  // namespace latentbandit
