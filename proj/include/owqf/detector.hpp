#pragma once

#include <string>
#include <utility>
#include <vector>

#include "owqf/config.hpp"
#include "owqf/evaluator.hpp"
#include "owqf/fusion_decoder.hpp"
#include "owqf/matching_loss.hpp"
#include "owqf/prompt_simulator.hpp"
#include "owqf/query_builder.hpp"

namespace owqf {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Rendered inputs of one image.
struct ImageInputs {
  Scene scene;
  FeaturePyramid pyramid;
  Tensor tokens;
  std::vector<Box> cells;
  std::vector<PromptPoint> prompts;
};

ImageInputs prepare_image(const FeatureWorld& world, const Scene& scene,
                          std::vector<PromptPoint> prompts);

enum class Stage { pretrain, fine_tune };

class Detector {
 public:
  ModelConfig config;
  // Paths the model was fine-tuned with; specific-only after pretraining.
  Toggles toggles{false, false, false};
  DecoderStack stack;
  SpecificSelector selector;
  Mlp initial_box_head;  // shared by token proposals and prompt points
  PointAdapter adapter;
  LearnableQueryBank bank;

  static Detector init(const ModelConfig& cfg, std::size_t d_text,
                       std::uint64_t seed);

  // Every parameter under a stable name; the handles alias the model.
  std::vector<NamedParam> parameters() const;
  Detector clone() const;

  // Starts the fine-tuning stage: the point adapter takes the memory
  // projection and the general box heads copy the specific ones.
  void begin_fine_tune();
  // Trainable tensors of a stage. The fine-tuning set is the decoder's
  // freeze mask plus the learnable bank and the point adapter.
  std::vector<Tensor> trainable(Stage stage) const;
  // Sets requires_grad so that only `trainable(stage)` records gradients.
  void set_stage(Stage stage);
};

struct ForwardOptions {
  Toggles toggles;
  // Text columns that may rank and classify specific queries; all if empty.
  std::vector<std::size_t> specific_columns;
  // Denoising points of this image, already sampled; empty disables.
  std::vector<NoisePoint> dn_points;
};

struct ForwardResult {
  SpecificProposals specific;
  PointBoxes prompt_boxes;
  GeneralQueries general;
  PointBoxes dn_boxes;
  std::vector<NoisePoint> dn_order;  // noise points in denoising-row order
  std::vector<std::size_t> dn_rows;  // their rows in dn_boxes
  std::vector<std::size_t> dn_group_sizes;
  DecodeResult decoded;
};

ForwardResult forward(const Detector& det, const ImageInputs& img,
                      const Tensor& text_embeddings, const ForwardOptions& opt);

// Training loss of one image against every category column. The encoder
// proposal loss is added in the pretraining stage.
LossReport image_loss(const Detector& det, const ImageInputs& img,
                      const Tensor& text_embeddings, const Toggles& toggles,
                      const LossConfig& loss, const DenoisingConfig& dn,
                      Stage stage, std::uint64_t dn_seed);

struct PredictOptions {
  Toggles toggles;
  std::vector<std::size_t> columns;           // category ids of the text list
  std::vector<std::size_t> specific_columns;  // positions within `columns`
  std::size_t top_k = 100;
  double nms_iou = 0.7;
};

// Top-k (query, class) pairs by sigmoid score followed by class-wise NMS.
std::vector<Detection> predict(const Detector& det, const ImageInputs& img,
                               const CategoryTable& table,
                               const PredictOptions& opt);

// Greedy suppression within each label; keeps input order among survivors.
std::vector<Detection> class_nms(std::vector<Detection> dets, double iou_threshold);

}  // namespace owqf
