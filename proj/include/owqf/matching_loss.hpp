#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "owqf/denoising.hpp"
#include "owqf/geometry.hpp"
#include "owqf/tensor.hpp"

namespace owqf {

struct CostWeights {
  double w_class = 2.0;
  double w_l1 = 5.0;
  double w_giou = 2.0;

  void validate() const;
};

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

using Assignment = std::vector<std::pair<std::size_t, std::size_t>>;

// Minimum-cost one-to-one assignment of min(P, G) pairs on a row-major
// [rows, cols] cost matrix. Pairs are (row, col), sorted by row.
Assignment hungarian_match(const std::vector<double>& cost, std::size_t rows,
                           std::size_t cols);
Assignment hungarian_match(const Tensor& cost);

struct TermBreakdown {
  double cls = 0.0;
  double l1 = 0.0;
  double giou = 0.0;

  TermBreakdown& operator+=(const TermBreakdown& o) {
    cls += o.cls;
    l1 += o.l1;
    giou += o.giou;
    return *this;
  }
};

struct GroundingResult {
  Tensor loss;
  Assignment assignment;
  TermBreakdown terms;
};

// Matching cost w_class*(1 - sigmoid(logit)) + w_l1*L1 + w_giou*(1 - giou);
// loss = w_class*focal over every prediction and class (matched rows target
// their ground-truth column) + w_l1*L1 + w_giou*(1 - giou) over matched pairs,
// all divided by max(1, G). Ground truths left unmatched when P < G add the
// constant focal penalty of a positive at logit 0.
GroundingResult grounding_loss(const Tensor& pred_boxes, const Tensor& logits,
                               const std::vector<Box>& gt_boxes,
                               const std::vector<std::size_t>& gt_columns,
                               const CostWeights& weights,
                               const FocalParams& focal = {});

// Known-target loss for denoising rows aligned with `points`: positives
// classify toward their source column and regress to their source box,
// negatives target no-object with no box term. Normalized by the positive
// count.
GroundingResult denoising_loss(const Tensor& pred_boxes, const Tensor& logits,
                               const std::vector<NoisePoint>& points,
                               const std::vector<Box>& gt_boxes,
                               const std::vector<std::size_t>& gt_columns,
                               const CostWeights& weights,
                               const FocalParams& focal = {});

// Sum over matched pairs of (1 - giou) as a differentiable tensor.
Tensor giou_loss_sum(const Tensor& pred, const Tensor& target);

// (ground-truth captions, predicted captions) -> loss.
using GenerationHook = std::function<double(const std::vector<std::string>&,
                                            const std::vector<std::string>&)>;

struct LossInputs {
  Tensor grounding_general;   // undefined when the general partition is off
  Tensor grounding_specific;
  Tensor denoising;           // undefined when denoising is off
  double dn_weight = 1.0;
  // When the general partition is empty, its term is still averaged in.
  bool include_empty_general = false;
  bool general_empty = false;
  GenerationHook generation_hook;
  std::vector<std::string> gt_captions;
  std::vector<std::string> predicted_captions;
  TermBreakdown terms;
};

struct LossReport {
  double grounding_general = 0.0;
  double grounding_specific = 0.0;
  double denoising = 0.0;
  double generation = 0.0;
  double total = 0.0;
  TermBreakdown terms;
  Tensor total_tensor;
};

// total = 1/2 (general + specific) + generation + dn_weight * denoising.
// An excluded general partition reduces the grounding part to the specific
// term alone.
LossReport total_loss(const LossInputs& in);

}  // namespace owqf
