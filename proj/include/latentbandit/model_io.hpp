#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "latentbandit/types.hpp"

namespace latentbandit {

/// JSON layout shared by the CLI, the dataset builder and experiment configs:
///
///   {
///     "num_contexts": 1,
///     "means": [[...per state...], ...per arm...],       // [context][arm][state] when num_contexts > 1
///     "stds":  same shape as means,
///     "features": [[...], ...],                          // optional, [arm][d]
///     "transition": [[...], ...]                         // optional, row-major [state][state]
///   }
nlohmann::json to_json(const RewardModel& model);
nlohmann::json to_json(const TransitionKernel& kernel);
RewardModel reward_model_from_json(const nlohmann::json& doc);
TransitionKernel transition_from_json(const nlohmann::json& doc);

/// Reward model plus optional kernel in one document.
nlohmann::json model_document(const RewardModel& model, const std::optional<TransitionKernel>& kernel);

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);

RewardModel load_reward_model(const std::string& path);
void save_json(const std::string& path, const nlohmann::json& doc);
nlohmann::json load_json(const std::string& path);

}  // namespace latentbandit
