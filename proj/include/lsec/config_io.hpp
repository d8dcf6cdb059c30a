#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "lsec/datagen.hpp"
#include "lsec/influence.hpp"
#include "lsec/model.hpp"
#include "lsec/trainer.hpp"

namespace lsec {

// JSON conversions. Readers start from the defaults, reject unknown keys
// with ConfigError and validate the result.
nlohmann::ordered_json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json gen_config_to_json(const GenConfig& c);
GenConfig gen_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json split_spec_to_json(const SplitSpec& s);
SplitSpec split_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json analysis_params_to_json(const AnalysisParams& p);
AnalysisParams analysis_params_from_json(const nlohmann::json& j);

struct RunManifest {
  GenConfig gen;
  SplitSpec split;
  TrainConfig train;  // holds the model config
  AnalysisParams analysis;
  // Split directory (train/, val.tsv, test.tsv); empty means generate from `gen`.
  std::string data_dir;
  std::string output_dir = "out";
  std::size_t repeat_count = 1;

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  static RunManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace lsec
