#pragma once

#include "json.hpp"

#include "ilac/entropy.hpp"
#include "ilac/evaluation.hpp"
#include "ilac/model.hpp"
#include "ilac/synthetic.hpp"
#include "ilac/training.hpp"

namespace ilac {

// Missing keys keep their defaults, so partial config files are accepted.
void to_json(nlohmann::json& j, const GenSpec& s);
void from_json(const nlohmann::json& j, GenSpec& s);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// {"mode", "recall": {"50": r, ...}, "object_accuracy" (null in PredCls), "scenes_scored", "scenes_skipped"}
void to_json(nlohmann::json& j, const EvalReport& r);
void to_json(nlohmann::json& j, const EntropyReport& r);

}  // namespace ilac
