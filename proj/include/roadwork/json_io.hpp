#pragma once

// JSON mappings shared by the dataset, report and config readers.

#include <json.hpp>

#include "roadwork/scenario.hpp"
#include "roadwork/tap.hpp"

namespace roadwork {

nlohmann::json to_json(const SolverOptions& opts);
SolverOptions solver_options_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SamplerOptions& opts);
SamplerOptions sampler_options_from_json(const nlohmann::json& j);

// Throws ValidationError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view where);

}  // namespace roadwork
