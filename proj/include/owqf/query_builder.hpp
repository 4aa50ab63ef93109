#pragma once

#include <cstddef>
#include <vector>

#include "owqf/feature_world.hpp"
#include "owqf/fusion_decoder.hpp"

namespace owqf {

// Fixed-order trainable embeddings paired index-wise with ranked points.
struct LearnableQueryBank {
  Tensor embeddings;  // [N, d]

  static LearnableQueryBank init(std::size_t n, std::size_t dim, Rng& rng);
  std::size_t size() const { return embeddings.dim(0); }
};

// Linear layer followed by layer normalization applied to the level-pooled
// point feature.
struct PointAdapter {
  Linear proj;
  LayerNormParams norm;

  Tensor operator()(const Tensor& pooled) const { return norm(proj(pooled)); }
};

// Modules that turn points into initial boxes and scores. The box head is the
// one the open-set path uses for its proposals.
struct PointHeads {
  const PointAdapter* adapter = nullptr;
  const Mlp* box_head = nullptr;
  const ClassHead* cls = nullptr;
  Tensor text_keys;  // [C, d]
};

inline constexpr double kDefaultPointBoxSide = 0.1;

// Bilinear feature of (x, y) on every level, [levels, d]. Throws
// std::out_of_range outside the unit square.
Tensor interpolate_point_feature(const FeaturePyramid& fp, double x, double y);
// Batched form: [P, levels * d] rows for P points, levels concatenated.
Tensor interpolate_points(const FeaturePyramid& fp,
                          const std::vector<std::pair<double, double>>& xy);

struct PointBoxes {
  Tensor features;  // adapted features [P, d]
  Tensor boxes;     // [P, 4]
  Tensor logits;    // [P, C]
  std::vector<double> scores;  // max sigmoid over classes, per point
};

// Level-mean pooling, adapter, box head anchored at the point with the
// default side, classification head for the score.
std::pair<Box, double> point_to_initial_box(const Tensor& point_feature,
                                            double x, double y,
                                            const PointHeads& heads);
PointBoxes points_to_initial_boxes(const Tensor& point_features,
                                   std::size_t levels,
                                   const std::vector<std::pair<double, double>>& xy,
                                   const PointHeads& heads);

struct RankedMatch {
  // order[i] is the point paired with learnable query i.
  std::vector<std::size_t> order;
};

// Stable descending sort by score; the i-th ranked point takes query i.
// Points beyond the bank size are dropped, unused queries stay idle.
RankedMatch rank_and_match(const std::vector<double>& scores,
                           std::size_t bank_size);

// General partition from ranked points. With `ranked` false every point uses
// learnable query 0. `boxes` and `features` are rows per point.
struct GeneralQueries {
  QueryPartition partition;
  std::vector<std::size_t> source_points;
};
GeneralQueries compose_general_queries(const LearnableQueryBank& bank,
                                       const RankedMatch& match,
                                       const Tensor& boxes,
                                       const Tensor& features, bool ranked,
                                       bool add_point_feature);

// Encoder-free two-stage proposal scorer for the open-set path.
struct SpecificSelector {
  Linear memory_proj;
  LayerNormParams memory_norm;
  Tensor content_bank;  // [S, d]

  static SpecificSelector init(std::size_t s, std::size_t dim, Rng& rng);
};

struct SpecificProposals {
  QueryPartition partition;
  std::vector<std::size_t> selected_tokens;
  Tensor token_logits;  // [T, C] dense alignment of every location
  Tensor token_boxes;   // [T, 4] box proposal at every location
  Tensor selected_logits;  // [S, C]
};

// Scores every pyramid location against the text keys, keeps the top S
// (stable on ties), anchors a box at each kept cell, and pairs it with the
// content bank. `score_columns` restricts which classes rank locations; all
// columns when empty.
SpecificProposals build_specific_queries(
    const FeaturePyramid& fp, const Tensor& tokens,
    const std::vector<Box>& cells, const SpecificSelector& selector,
    const Mlp& box_head, const ClassHead& cls, const Tensor& text_keys,
    std::size_t s, const std::vector<std::size_t>& score_columns);

}  // namespace owqf
