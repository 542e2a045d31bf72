#include "ciisod/config.hpp"

#include <fstream>
#include <set>

#include "ciisod/error.hpp"

namespace ciisod {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(std::string(where) + ": unknown field '" + key + "'");
  }
}

template <class V>
void read_field(const json& j, const char* key, V& out, const char* where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<V>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

std::string block_name(BlockKind kind) { return kind == BlockKind::Basic ? "basic" : "bottleneck"; }

BlockKind block_from_string(const std::string& s) {
  if (s == "basic") return BlockKind::Basic;
  if (s == "bottleneck") return BlockKind::Bottleneck;
  throw ConfigError("unknown block kind '" + s + "'");
}

std::string aggregation_name(PrAggregation a) {
  return a == PrAggregation::PerImage ? "per_image" : "pooled";
}

PrAggregation aggregation_from_string(const std::string& s) {
  if (s == "per_image") return PrAggregation::PerImage;
  if (s == "pooled") return PrAggregation::Pooled;
  throw ConfigError("unknown PR aggregation '" + s + "'");
}

}  // namespace

TrainConfig TrainConfig::full() {
  TrainConfig c;
  c.epochs = 32;
  c.batch_size = 30;
  c.warmup_epochs = 8;
  c.input_size = 352;
  c.model = ModelConfig::full(352);
  return c;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs) {
    throw ConfigError("warmup_epochs must be in [0, epochs)");
  }
  if (!(lr_backbone_max >= 0) || !(lr_rest_max >= 0)) throw ConfigError("learning rates must be >= 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
  if (input_size % 32 != 0 || input_size <= 0) {
    throw ConfigError("input_size must be a positive multiple of 32");
  }
  if (model.backbone.input_h != input_size || model.backbone.input_w != input_size) {
    throw ConfigError("backbone input size does not match input_size");
  }
  if (!(augment.crop_min > 0 && augment.crop_min <= augment.crop_max && augment.crop_max <= 1)) {
    throw ConfigError("crop range must satisfy 0 < crop_min <= crop_max <= 1");
  }
  model.backbone.validate();
  model.interactor.validate();
}

json to_json(const BackboneConfig& cfg) {
  return {{"stem_channels", cfg.stem_channels},
          {"stage_channels", cfg.stage_channels},
          {"blocks_per_stage", cfg.blocks_per_stage},
          {"input_h", cfg.input_h},
          {"input_w", cfg.input_w},
          {"block", block_name(cfg.block)}};
}

json to_json(const InteractorConfig& cfg) {
  return {{"kind", to_string(cfg.kind)},
          {"kernel", cfg.kernel},
          {"depth", cfg.depth},
          {"shared", cfg.shared},
          {"channels", cfg.channels},
          {"fuse_final_activation", cfg.fuse_final_activation}};
}

json to_json(const ModelConfig& cfg) {
  return {{"backbone", to_json(cfg.backbone)},
          {"interactor", to_json(cfg.interactor)},
          {"decoder", {{"merge", to_string(cfg.decoder.merge)}}}};
}

json to_json(const TrainConfig& cfg) {
  json j = to_json(cfg.model);
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr_backbone_max"] = cfg.lr_backbone_max;
  j["lr_rest_max"] = cfg.lr_rest_max;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["warmup_epochs"] = cfg.warmup_epochs;
  j["input_size"] = cfg.input_size;
  j["seed"] = cfg.seed;
  j["exempt_bn_weight_decay"] = cfg.exempt_bn_weight_decay;
  j["augment"] = {{"flip_probability", cfg.augment.flip_probability},
                  {"crop_min", cfg.augment.crop_min},
                  {"crop_max", cfg.augment.crop_max}};
  j["pr_aggregation"] = aggregation_name(cfg.pr_aggregation);
  return j;
}

BackboneConfig backbone_config_from_json(const json& j) {
  const char* where = "backbone";
  BackboneConfig cfg = BackboneConfig::tiny();
  if (j.is_string()) {
    const std::string preset = j.get<std::string>();
    if (preset == "resnet18") return BackboneConfig::resnet18();
    if (preset == "tiny") return BackboneConfig::tiny();
    if (preset == "resnet50") return BackboneConfig::resnet50();
    throw ConfigError("unknown backbone preset '" + preset + "'");
  }
  reject_unknown(j, {"preset", "stem_channels", "stage_channels", "blocks_per_stage", "input_h",
                     "input_w", "block"},
                 where);
  std::string preset;
  read_field(j, "preset", preset, where);
  if (!preset.empty()) cfg = backbone_config_from_json(json(preset));
  read_field(j, "stem_channels", cfg.stem_channels, where);
  read_field(j, "stage_channels", cfg.stage_channels, where);
  read_field(j, "blocks_per_stage", cfg.blocks_per_stage, where);
  read_field(j, "input_h", cfg.input_h, where);
  read_field(j, "input_w", cfg.input_w, where);
  std::string block;
  read_field(j, "block", block, where);
  if (!block.empty()) cfg.block = block_from_string(block);
  return cfg;
}

InteractorConfig interactor_config_from_json(const json& j, InteractorConfig cfg) {
  const char* where = "interactor";
  if (j.is_string()) {
    cfg.kind = interactor_kind_from_string(j.get<std::string>());
    return cfg;
  }
  reject_unknown(j, {"kind", "kernel", "depth", "shared", "channels", "fuse_final_activation"},
                 where);
  std::string kind;
  read_field(j, "kind", kind, where);
  if (!kind.empty()) cfg.kind = interactor_kind_from_string(kind);
  read_field(j, "kernel", cfg.kernel, where);
  read_field(j, "depth", cfg.depth, where);
  read_field(j, "shared", cfg.shared, where);
  read_field(j, "channels", cfg.channels, where);
  read_field(j, "fuse_final_activation", cfg.fuse_final_activation, where);
  return cfg;
}

ModelConfig model_config_from_json(const json& j) {
  const char* where = "model";
  reject_unknown(j, {"backbone", "interactor", "decoder"}, where);
  ModelConfig cfg;
  if (j.contains("backbone")) cfg.backbone = backbone_config_from_json(j["backbone"]);
  if (j.contains("interactor")) {
    cfg.interactor = interactor_config_from_json(j["interactor"], cfg.interactor);
  }
  if (j.contains("decoder")) {
    reject_unknown(j["decoder"], {"merge"}, "decoder");
    std::string merge;
    read_field(j["decoder"], "merge", merge, "decoder");
    if (!merge.empty()) cfg.decoder.merge = merge_mode_from_string(merge);
  }
  return cfg;
}

TrainConfig train_config_from_json(const json& j) {
  const char* where = "train config";
  reject_unknown(j, {"preset", "epochs", "batch_size", "lr_backbone_max", "lr_rest_max",
                     "momentum", "weight_decay", "warmup_epochs", "input_size", "seed",
                     "exempt_bn_weight_decay", "augment", "pr_aggregation", "backbone",
                     "interactor", "decoder"},
                 where);
  TrainConfig cfg = TrainConfig::desk();
  std::string preset;
  read_field(j, "preset", preset, where);
  if (preset == "full") {
    cfg = TrainConfig::full();
  } else if (!preset.empty() && preset != "desk") {
    throw ConfigError("unknown train preset '" + preset + "'");
  }
  read_field(j, "epochs", cfg.epochs, where);
  read_field(j, "batch_size", cfg.batch_size, where);
  read_field(j, "lr_backbone_max", cfg.lr_backbone_max, where);
  read_field(j, "lr_rest_max", cfg.lr_rest_max, where);
  read_field(j, "momentum", cfg.momentum, where);
  read_field(j, "weight_decay", cfg.weight_decay, where);
  read_field(j, "warmup_epochs", cfg.warmup_epochs, where);
  read_field(j, "input_size", cfg.input_size, where);
  read_field(j, "seed", cfg.seed, where);
  read_field(j, "exempt_bn_weight_decay", cfg.exempt_bn_weight_decay, where);
  if (j.contains("augment")) {
    const json& a = j["augment"];
    reject_unknown(a, {"flip_probability", "crop_min", "crop_max"}, "augment");
    read_field(a, "flip_probability", cfg.augment.flip_probability, "augment");
    read_field(a, "crop_min", cfg.augment.crop_min, "augment");
    read_field(a, "crop_max", cfg.augment.crop_max, "augment");
  }
  std::string aggregation;
  read_field(j, "pr_aggregation", aggregation, where);
  if (!aggregation.empty()) cfg.pr_aggregation = aggregation_from_string(aggregation);

  json model = json::object();
  for (const char* key : {"backbone", "interactor", "decoder"}) {
    if (j.contains(key)) model[key] = j[key];
  }
  const ModelConfig base = cfg.model;
  ModelConfig parsed = model_config_from_json(model);
  if (!j.contains("backbone")) parsed.backbone = base.backbone;
  if (!j.contains("interactor")) parsed.interactor = base.interactor;
  else parsed.interactor = interactor_config_from_json(j["interactor"], base.interactor);
  cfg.model = parsed;
  // The input size drives the backbone unless the backbone block pins it explicitly.
  const bool pinned = j.contains("backbone") && j["backbone"].is_object() &&
                      (j["backbone"].contains("input_h") || j["backbone"].contains("input_w"));
  if (!pinned) {
    cfg.model.backbone.input_h = cfg.input_size;
    cfg.model.backbone.input_w = cfg.input_size;
  }
  cfg.validate();
  return cfg;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return train_config_from_json(read_json_file(path));
}

}  // namespace ciisod
