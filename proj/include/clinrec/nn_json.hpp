#pragma once

#include "clinrec/nn.hpp"
#include "json.hpp"

namespace clinrec::nn {

inline constexpr int kModelFormatVersion = 1;

/// Versioned document: layer dims, activation names, dropout_p and
/// row-major weights. Doubles are written in shortest round-trip form, so
/// from_json(to_json(m)) reproduces every parameter exactly.
nlohmann::json to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc);

}  // namespace clinrec::nn
