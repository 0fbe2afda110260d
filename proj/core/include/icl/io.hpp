#pragma once

#include <string>

#include <json.hpp>

#include "icl/features.hpp"
#include "icl/harness.hpp"
#include "icl/lasso.hpp"
#include "icl/transformer.hpp"

namespace icl {

using Json = nlohmann::json;

// Every *_from_json re-validates the invariants of the decoded value.

Json to_json(const ClassSpec& spec);
ClassSpec class_spec_from_json(const Json& j);

Json to_json(const FunctionInstance& f);
FunctionInstance function_instance_from_json(const Json& j);

Json to_json(const FeatureBank& bank);
FeatureBank feature_bank_from_json(const Json& j);

Json to_json(const OracleCoefficients& o);
OracleCoefficients oracle_coefficients_from_json(const Json& j);

Json to_json(const LassoProblem& p);
LassoProblem lasso_problem_from_json(const Json& j);

Json to_json(const LassoTrajectory& t);
LassoTrajectory lasso_trajectory_from_json(const Json& j);

Json to_json(const HiddenState& s);
HiddenState hidden_state_from_json(const Json& j);

// Repeated blocks are written once and referenced by index from "layers".
// Matrices are sparse [row, col, value] triplets.
Json to_json(const TransformerWeights& w);
TransformerWeights transformer_weights_from_json(const Json& j);

Json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const Json& j);

Json to_json(const EpisodeReport& r);
EpisodeReport episode_report_from_json(const Json& j);

Json to_json(const EmulationReport& r);

ExperimentConfig load_config(const std::string& path);
Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace icl
