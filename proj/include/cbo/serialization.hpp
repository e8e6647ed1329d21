#pragma once

#include <nlohmann/json.hpp>

#include "cbo/optimizer.hpp"
#include "cbo/search_space.hpp"

namespace cbo {

nlohmann::json ToJson(const ParamValue& value);
nlohmann::json ToJson(const ParamValues& values);
ParamValues ParamValuesFromJson(const nlohmann::json& j, const SearchSpace& space);

/// {name, kind, low, high | categories, scale, default?}
nlohmann::json ToJson(const ParamSpec& spec);
ParamSpec ParamSpecFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const SearchSpace& space);
SearchSpace SearchSpaceFromJson(const nlohmann::json& j);

nlohmann::json ToJson(const ProblemSpec& problem);
ProblemSpec ProblemSpecFromJson(const nlohmann::json& j);

/// Observation in raw and transformed units. Non-finite numbers become null.
nlohmann::json ToJson(const Observation& obs);
Observation ObservationFromJson(const nlohmann::json& j, const SearchSpace& space);

/// Resumable snapshot of an optimizer.
nlohmann::json ToJson(const OptimizerState& state);
OptimizerState OptimizerStateFromJson(const nlohmann::json& j);

}  // namespace cbo
