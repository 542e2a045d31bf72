#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "ciisod/dataset.hpp"
#include "ciisod/metrics.hpp"
#include "ciisod/model.hpp"

namespace ciisod {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;
  double lr_backbone_max = 0.005;
  double lr_rest_max = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  int warmup_epochs = 5;
  int input_size = 64;
  std::uint64_t seed = 1;
  bool exempt_bn_weight_decay = false;
  AugmentOptions augment;
  PrAggregation pr_aggregation = PrAggregation::PerImage;
  ModelConfig model = ModelConfig::desk();

  /// 32 epochs, batch 30, ResNet-18, 352 input, 8 warm-up epochs.
  static TrainConfig full();
  /// 20 epochs, batch 8, tiny backbone, 64 input, 5 warm-up epochs.
  static TrainConfig desk();

  void validate() const;
};

nlohmann::json to_json(const BackboneConfig& cfg);
nlohmann::json to_json(const InteractorConfig& cfg);
nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);

// Missing fields keep their defaults; unknown fields and wrong types raise ConfigError.
BackboneConfig backbone_config_from_json(const nlohmann::json& j);
InteractorConfig interactor_config_from_json(const nlohmann::json& j, InteractorConfig base = {});
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace ciisod
