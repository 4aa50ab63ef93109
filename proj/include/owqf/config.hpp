#pragma once

#include <cstdint>
#include <string>

#include "owqf/denoising.hpp"
#include "owqf/feature_world.hpp"
#include "owqf/matching_loss.hpp"
#include "owqf/prompt_simulator.hpp"

namespace owqf {

struct DataConfig {
  std::size_t n_train = 2000;
  std::size_t n_eval = 500;
  std::size_t min_objects = 1;
  std::size_t max_objects = 6;
  std::size_t rare = 2;
  std::size_t common = 4;
  std::size_t frequent = 6;
  CategoryMix mix{0.03, 0.27, 0.70};
  std::size_t d_text = 16;
};

struct ModelConfig {
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t layers = 6;
  std::size_t levels = 2;
  std::size_t base_grid = 16;
  double noise = 0.1;
  std::size_t n_learnable = 900;
  std::size_t n_specific = 300;
  bool add_point_feature = false;
  bool aux_loss = true;
};

struct Toggles {
  bool gs_fusion = true;
  bool ranked_queries = true;
  bool denoising = true;
};

struct LossConfig {
  CostWeights weights;
  FocalParams focal;
  double dn_weight = 1.0;
  bool include_empty_general = false;
};

struct OptimConfig {
  double lr = 1e-3;
  std::size_t pretrain_steps = 5000;
  std::size_t steps = 5000;
  std::size_t batch = 8;
  double clip_norm = 1.0;
  std::size_t checkpoint_every = 1000;
  std::size_t threads = 1;  // >1 enables deterministic data-parallel steps
};

struct EvalSettings {
  std::size_t per_class_cap = 1000;
  std::size_t top_k = 100;
  double nms_iou = 0.7;
};

struct RunConfig {
  std::uint64_t seed = 0;        // dataset and world
  std::uint64_t model_seed = 0;  // initialization and batch order
  std::string out_dir = "out";
  DataConfig data;
  ModelConfig model;
  DenoisingConfig dn;
  Toggles toggles;
  LossConfig loss;
  SimulatorConfig prompt;
  OptimConfig optim;
  EvalSettings eval;
  std::size_t ablation_seeds = 3;

  // Throws ConfigError for inconsistent values.
  void validate() const;
  WorldSpec world() const;
};

// Parses a single JSON object of flat dotted keys over the defaults. Unknown
// keys and wrongly typed values throw ConfigError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
// Replaces `seed` when OWQF_SEED is set to an unsigned integer.
void apply_env_overrides(RunConfig& cfg);
// The full key set with current values, as JSON text.
std::string config_to_json(const RunConfig& cfg);

}  // namespace owqf
