#include "latentbandit/model_io.hpp"

#include <fstream>
#include <stdexcept>

namespace latentbandit {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
  if (!rows.is_array() || rows.empty() || !rows.front().is_array()) {
    throw std::invalid_argument("expected a non-empty array of arrays");
  }
  const auto r = static_cast<Index>(rows.size());
  const auto c = static_cast<Index>(rows.front().size());
  Eigen::MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != c) throw std::invalid_argument("ragged matrix rows");
    for (Index j = 0; j < c; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json to_json(const RewardModel& model) {
  nlohmann::json doc;
  doc["num_contexts"] = model.num_contexts();
  if (model.num_contexts() == 1) {
    doc["means"] = matrix_to_json(model.means(0));
    doc["stds"] = matrix_to_json(model.stds(0));
  } else {
    doc["means"] = nlohmann::json::array();
    doc["stds"] = nlohmann::json::array();
    for (Index x = 0; x < model.num_contexts(); ++x) {
      doc["means"].push_back(matrix_to_json(model.means(x)));
      doc["stds"].push_back(matrix_to_json(model.stds(x)));
    }
  }
  if (model.has_features()) doc["features"] = matrix_to_json(model.features());
  return doc;
}

nlohmann::json to_json(const TransitionKernel& kernel) { return matrix_to_json(kernel.matrix()); }

RewardModel reward_model_from_json(const nlohmann::json& doc) {
  const auto contexts = doc.value("num_contexts", 1);
  if (contexts < 1) throw std::invalid_argument("num_contexts must be >= 1");
  std::vector<Eigen::MatrixXd> means, stds;
  if (contexts == 1 && doc.at("means").at(0).at(0).is_number()) {
    means.push_back(matrix_from_json(doc.at("means")));
    stds.push_back(matrix_from_json(doc.at("stds")));
  } else {
    if (static_cast<int>(doc.at("means").size()) != contexts || static_cast<int>(doc.at("stds").size()) != contexts) {
      throw std::invalid_argument("means/stds must have one block per context");
    }
    for (int x = 0; x < contexts; ++x) {
      means.push_back(matrix_from_json(doc.at("means").at(x)));
      stds.push_back(matrix_from_json(doc.at("stds").at(x)));
    }
  }
  RewardModel model(std::move(means), std::move(stds));
  if (doc.contains("features")) model.set_features(matrix_from_json(doc.at("features")));
  return model;
}

TransitionKernel transition_from_json(const nlohmann::json& doc) {
  return TransitionKernel(matrix_from_json(doc.is_object() ? doc.at("transition") : doc));
}

nlohmann::json model_document(const RewardModel& model, const std::optional<TransitionKernel>& kernel) {
  auto doc = to_json(model);
  if (kernel) doc["transition"] = to_json(*kernel);
  return doc;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void save_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

RewardModel load_reward_model(const std::string& path) { return reward_model_from_json(load_json(path)); }

}  // namespace latentbandit
