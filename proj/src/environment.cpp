// SPDX-License-Identifier: Apache-2.0
#include "scaopo/environment.hpp"

#include <cmath>

#include "scaopo/error.hpp"

namespace scaopo {

void EnvSpec::validate() const {
  if (state_dim == 0) throw ConfigError("environment: state_dim must be positive");
  if (action_box.dim() == 0) throw ConfigError("environment: empty action box");
  if (static_cast<std::size_t>(limits.size()) != num_constraints)
    throw ConfigError("environment: need one limit per constraint");
  if (!limits.allFinite()) throw ConfigError("environment: constraint limits must be finite");
}

void check_action(const EnvSpec& spec, const Eigen::VectorXd& action) {
  if (action.size() != spec.action_box.dim())
    throw ContractViolation("action has dimension " + std::to_string(action.size()) + ", expected " +
                            std::to_string(spec.action_box.dim()));
  if (!action.allFinite()) throw ContractViolation("action is not finite");
  if (!spec.action_box.contains(action)) throw ContractViolation("action outside the action box");
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Eigen::MatrixXd m(rows, cols);
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw ConfigError("matrix json: row count mismatch");
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = vector_from_json(data[static_cast<std::size_t>(r)]);
    if (row.size() != cols) throw ConfigError("matrix json: column count mismatch");
    m.row(r) = row.transpose();
  }
  return m;
}

}  // namespace scaopo
