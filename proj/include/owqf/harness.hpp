#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "owqf/config.hpp"
#include "owqf/detector.hpp"

namespace owqf {

struct Dataset {
  CategoryTable table;
  std::vector<Scene> train;
  std::vector<Scene> eval;
};

// Deterministic in the config seed; images are generated in parallel.
Dataset generate_dataset(const RunConfig& cfg);

// Seed of the simulated prompts of one image.
std::uint64_t prompt_seed(const RunConfig& cfg, std::size_t image_id);
std::vector<PromptPoint> simulated_prompts(const RunConfig& cfg,
                                           const CategoryTable& table,
                                           const Scene& scene);

struct CurvePoint {
  Stage stage = Stage::pretrain;
  std::size_t step = 0;
  double loss = 0.0;
  double grounding_general = 0.0;
  double grounding_specific = 0.0;
  double denoising = 0.0;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;
  std::vector<std::vector<double>> m, v;

  // grads[i] is the gradient of params[i].
  void step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads);
};

using StepCallback = std::function<void(const Detector&, Stage, std::size_t step)>;

// Runs `steps` optimizer steps of one stage on the training scenes. Batches
// cycle through per-epoch shuffles seeded by the model seed. Per-image
// gradients are summed in batch order, so optim.threads > 1 reproduces the
// serial result bit for bit. Throws NumericError on a non-finite loss.
void train_stage(Detector& det, Stage stage, const RunConfig& cfg,
                 const Dataset& data, std::vector<CurvePoint>& curve,
                 const StepCallback& on_step = {});

// Baseline pretraining from a fresh initialization.
Detector pretrain(const RunConfig& cfg, const Dataset& data,
                  std::vector<CurvePoint>& curve, const StepCallback& on_step = {});
// Freezes per the freeze mask and fine-tunes with cfg.toggles.
Detector fine_tune(const Detector& pretrained, const RunConfig& cfg,
                   const Dataset& data, std::vector<CurvePoint>& curve,
                   const StepCallback& on_step = {});

struct EvalOutput {
  EvalReport report;
  std::vector<Detection> detections;
  std::size_t discovered_total = 0;
};

using PromptMap = std::map<std::size_t, std::vector<PromptPoint>>;

// Open-set classifies specific queries against `predefined` and general
// queries against predefined plus discovered labels; open-ended uses the
// discovered labels only and maps names back through open_ended_map. With
// `prompts` set it replaces the simulator for every image.
EvalOutput evaluate_mode(const Detector& det, const RunConfig& cfg,
                         const CategoryTable& table,
                         const std::vector<Scene>& scenes, EvalMode mode,
                         const std::vector<std::size_t>& predefined,
                         const PromptMap* prompts = nullptr);

std::string checkpoint_to_json(const Detector& det, std::size_t d_text,
                               Stage stage, std::size_t step);
Detector checkpoint_from_json(const std::string& text);
std::string curve_to_json(const std::vector<CurvePoint>& curve);

struct AblationRow {
  std::string name;
  Toggles toggles;
  std::vector<EvalReport> per_seed;
  double ap = 0.0, ap_r = 0.0, ap_c = 0.0, ap_f = 0.0;  // seed means
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<std::uint64_t> model_seeds;
  std::vector<Detector> full_models;  // last row, one per seed
};

// The four rows: baseline; + fusion; + ranked queries; + denoising points.
// One pretrain per seed is shared by all rows.
std::vector<std::pair<std::string, Toggles>> ablation_rows();
AblationResult run_ablation(const RunConfig& cfg, const Dataset& data);
std::string ablation_to_json(const AblationResult& result);

// CLI commands. Each returns the process exit code.
struct EvalArgs {
  std::optional<EvalMode> mode;
  std::string category_list_path;
  std::string prompts_path;
  std::string checkpoint_path;
};
int cmd_generate(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg, const EvalArgs& args);
int cmd_ablate(const RunConfig& cfg);

}  // namespace owqf
