#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "expe/json_fields.hpp"
#include "expe/transformer/config.hpp"

namespace expe::nn {

// Reads the "model" and "encoding" sections, materialising every default:
// head_size = d_model / n_heads, l = d_model / 8, theta = 1 / (2 * seq_len),
// theta1 = theta, max_len = seq_len. Invariant violations are appended to the
// readers' error list with their key paths.
ModelConfig read_model_config(FieldReader& model, FieldReader& encoding);

// {"model": {...}, "encoding": {...}} with every field explicit.
nlohmann::json model_config_to_json(const ModelConfig& cfg);

// Inverse of model_config_to_json; throws ConfigValidationError.
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace expe::nn
