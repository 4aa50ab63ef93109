#include "owqf/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>
#include <variant>

#include <json.hpp>

namespace owqf {

using nlohmann::json;

namespace {

static_assert(std::is_same_v<std::uint64_t, std::size_t>,
              "seed fields share the unsigned integer alternative");
using Field = std::variant<std::size_t*, double*, bool*, std::string*>;

std::map<std::string, Field> fields(RunConfig& c) {
  return {
      {"seed", &c.seed},
      {"model_seed", &c.model_seed},
      {"out_dir", &c.out_dir},
      {"data.n_train", &c.data.n_train},
      {"data.n_eval", &c.data.n_eval},
      {"data.min_objects", &c.data.min_objects},
      {"data.max_objects", &c.data.max_objects},
      {"data.rare", &c.data.rare},
      {"data.common", &c.data.common},
      {"data.frequent", &c.data.frequent},
      {"data.mix_rare", &c.data.mix.rare},
      {"data.mix_common", &c.data.mix.common},
      {"data.mix_frequent", &c.data.mix.frequent},
      {"data.d_text", &c.data.d_text},
      {"world.levels", &c.model.levels},
      {"world.base_grid", &c.model.base_grid},
      {"world.noise", &c.model.noise},
      {"decoder.dim", &c.model.dim},
      {"decoder.heads", &c.model.heads},
      {"decoder.layers", &c.model.layers},
      {"decoder.aux_loss", &c.model.aux_loss},
      {"queries.n_learnable", &c.model.n_learnable},
      {"queries.n_specific", &c.model.n_specific},
      {"general_query.add_point_feature", &c.model.add_point_feature},
      {"dn.enabled", &c.toggles.denoising},
      {"dn.lambda1", &c.dn.lambda1},
      {"dn.lambda2", &c.dn.lambda2},
      {"dn.groups", &c.dn.groups_per_image},
      {"ablation.gs_fusion", &c.toggles.gs_fusion},
      {"ablation.ranked_queries", &c.toggles.ranked_queries},
      {"ablation.seeds", &c.ablation_seeds},
      {"loss.w_class", &c.loss.weights.w_class},
      {"loss.w_l1", &c.loss.weights.w_l1},
      {"loss.w_giou", &c.loss.weights.w_giou},
      {"loss.dn_weight", &c.loss.dn_weight},
      {"loss.focal_alpha", &c.loss.focal.alpha},
      {"loss.focal_gamma", &c.loss.focal.gamma},
      {"loss.include_empty_general", &c.loss.include_empty_general},
      {"prompt.fidelity", &c.prompt.fidelity},
      {"prompt.threshold", &c.prompt.threshold},
      {"prompt.max_points", &c.prompt.max_points},
      {"prompt.label_noise", &c.prompt.label_noise},
      {"prompt.layers", &c.prompt.layers},
      {"prompt.heads", &c.prompt.heads},
      {"prompt.grid", &c.prompt.grid},
      {"optim.lr", &c.optim.lr},
      {"optim.pretrain_steps", &c.optim.pretrain_steps},
      {"optim.steps", &c.optim.steps},
      {"optim.batch", &c.optim.batch},
      {"optim.clip_norm", &c.optim.clip_norm},
      {"optim.checkpoint_every", &c.optim.checkpoint_every},
      {"optim.threads", &c.optim.threads},
      {"eval.per_class_cap", &c.eval.per_class_cap},
      {"eval.top_k", &c.eval.top_k},
      {"eval.nms_iou", &c.eval.nms_iou},
  };
}

struct Assign {
  const std::string& key;
  const json& value;

  [[noreturn]] void fail(const char* expected) const {
    throw ConfigError("config key '" + key + "' expects " + expected + ", got " +
                      value.dump());
  }
  void operator()(std::size_t* p) const {
    if (!value.is_number_unsigned()) fail("a nonnegative integer");
    *p = value.get<std::size_t>();
  }
  void operator()(double* p) const {
    if (!value.is_number()) fail("a number");
    *p = value.get<double>();
  }
  void operator()(bool* p) const {
    if (!value.is_boolean()) fail("a boolean");
    *p = value.get<bool>();
  }
  void operator()(std::string* p) const {
    if (!value.is_string()) fail("a string");
    *p = value.get<std::string>();
  }
};

}  // namespace

void RunConfig::validate() const {
  dn.validate();
  loss.weights.validate();
  if (data.min_objects > data.max_objects)
    throw ConfigError("data.min_objects exceeds data.max_objects");
  if (data.rare + data.common + data.frequent == 0)
    throw ConfigError("the category table needs at least one category");
  if (data.d_text == 0) throw ConfigError("data.d_text must be positive");
  if (data.mix.rare < 0 || data.mix.common < 0 || data.mix.frequent < 0 ||
      data.mix.rare + data.mix.common + data.mix.frequent <= 0)
    throw ConfigError("data.mix_* must be nonnegative with a positive sum");
  if (model.dim == 0 || model.dim % 8 != 0)
    throw ConfigError("decoder.dim must be a positive multiple of 8");
  if (model.heads == 0 || model.dim % model.heads != 0)
    throw ConfigError("decoder.dim must be divisible by decoder.heads");
  if (model.levels < 2) throw ConfigError("world.levels must be at least 2");
  if (model.base_grid >> (model.levels - 1) < 2)
    throw ConfigError("world.base_grid is too small for world.levels");
  if (model.n_specific == 0) throw ConfigError("queries.n_specific must be at least 1");
  if (optim.batch == 0) throw ConfigError("optim.batch must be at least 1");
  if (!(optim.lr > 0.0)) throw ConfigError("optim.lr must be positive");
  if (optim.threads == 0) throw ConfigError("optim.threads must be at least 1");
  if (!(prompt.threshold > 0.0 && prompt.threshold < 1.0))
    throw ConfigError("prompt.threshold must lie in (0, 1)");
  if (prompt.max_points == 0) throw ConfigError("prompt.max_points must be at least 1");
  if (!(prompt.fidelity >= 0.0 && prompt.fidelity <= 1.0))
    throw ConfigError("prompt.fidelity must lie in [0, 1]");
  if (!(prompt.label_noise >= 0.0 && prompt.label_noise <= 1.0))
    throw ConfigError("prompt.label_noise must lie in [0, 1]");
  if (!(eval.nms_iou > 0.0 && eval.nms_iou <= 1.0))
    throw ConfigError("eval.nms_iou must lie in (0, 1]");
  if (eval.top_k == 0) throw ConfigError("eval.top_k must be at least 1");
  if (ablation_seeds == 0) throw ConfigError("ablation.seeds must be at least 1");
}

WorldSpec RunConfig::world() const {
  return {model.dim, model.levels, model.base_grid, model.noise, mix_seed(seed, 17)};
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  auto table = fields(cfg);
  for (const auto& [key, value] : doc.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    std::visit(Assign{key, value}, it->second);
  }
  cfg.dn.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_env_overrides(RunConfig& cfg) {
  const char* env = std::getenv("OWQF_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || env[0] == '-')
    throw ConfigError(std::string("OWQF_SEED must be an unsigned integer, got '") +
                      env + "'");
  cfg.seed = v;
  cfg.dn.seed = v;
}

std::string config_to_json(const RunConfig& c) {
  RunConfig copy = c;
  json doc = json::object();
  for (const auto& [key, field] : fields(copy))
    std::visit([&, k = key](auto* p) { doc[k] = *p; }, field);
  return doc.dump(2);
}

}  // namespace owqf
