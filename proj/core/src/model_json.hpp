#pragma once

#include <json.hpp>

#include "ventrl/extra_trees.hpp"
#include "ventrl/mlp.hpp"

// build-internal JSON helpers shared by the model writers
namespace ventrl::fqi {

nlohmann::json ensemble_to_json(const ml::TreeEnsemble& ens);
ml::TreeEnsemble ensemble_from_json(const nlohmann::json& j);
nlohmann::json mlp_to_json(const ml::MLPModel& net);
ml::MLPModel mlp_from_json(const nlohmann::json& j);

}  // namespace ventrl::fqi
