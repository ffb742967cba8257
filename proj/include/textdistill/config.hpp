#pragma once

#include <string>

#include "textdistill/corpus.hpp"
#include "textdistill/estimate.hpp"
#include "textdistill/sensitivity.hpp"
#include "textdistill/validation.hpp"
#include <json.hpp>

namespace textdistill {

// Parses a TOML document (tables, key = value, strings, numbers, booleans,
// homogeneous arrays) into a JSON object. Errors carry line numbers.
nlohmann::json parse_toml(const std::string& text);

// .toml or .json by extension
nlohmann::json load_config_file(const std::string& path);

GeneratorConfig generator_config_from_json(const nlohmann::json& j);
PropensityConfig propensity_config_from_json(const nlohmann::json& j);
LdaConfig lda_config_from_json(const nlohmann::json& j);
DistillerSpec distiller_spec_from_json(const nlohmann::json& j);
SweepGrid sweep_grid_from_json(const nlohmann::json& j);

}  // namespace textdistill
