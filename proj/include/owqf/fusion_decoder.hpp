#pragma once

#include <string>
#include <vector>

#include "owqf/attention.hpp"
#include "owqf/denoising.hpp"
#include "owqf/geometry.hpp"

namespace owqf {

// Queries [n, d] with their current boxes [n, 4].
struct QueryPartition {
  Tensor queries;
  Tensor boxes;

  std::size_t size() const { return queries.defined() ? queries.dim(0) : 0; }
  static QueryPartition empty(std::size_t dim);
};

// Denoising queries travel with the general partition: they come from points,
// use the general box head, and sit in front of it in the attention layout
// [denoising | general | specific].
struct QueryBank {
  QueryPartition denoising;
  QueryPartition general;
  QueryPartition specific;

  std::size_t total() const {
    return denoising.size() + general.size() + specific.size();
  }
};

struct FusionLayer {
  AttentionWeights self_attn;
  LayerNormParams self_norm;
  AttentionWeights text_attn;
  LayerNormParams text_norm;
  AttentionWeights image_attn;
  LayerNormParams image_norm;
  Mlp ffn;
  LayerNormParams ffn_norm;
  Mlp box_head_general;
  Mlp box_head_specific;

  static FusionLayer init(std::size_t dim, Rng& rng);
};

// Alignment logits: query_proj(q) . text_proj(t) + prior.
struct ClassHead {
  Linear query_proj;
  Linear text_proj;
  double prior_logit = -4.59511985013459;  // sigmoid^-1(0.01)

  static ClassHead init(std::size_t dim, std::size_t d_text, Rng& rng);
  Tensor text_keys(const Tensor& text_embeddings) const;
  Tensor logits(const Tensor& queries, const Tensor& text_keys) const;
};

struct DecoderStack {
  std::vector<FusionLayer> layers;
  ClassHead cls;
  std::size_t heads = 4;

  static DecoderStack init(std::size_t n_layers, std::size_t dim,
                           std::size_t heads, std::size_t d_text, Rng& rng);
};

// Per-image inputs shared by all layers.
struct DecoderContext {
  Tensor image_tokens;     // [T, d]
  Tensor image_keys;       // tokens + positional encoding of their cells
  Tensor text_embeddings;  // [C, d_text], rows follow the classification list
  Tensor text_keys;        // cls.text_proj(text_embeddings)

  static DecoderContext make(const DecoderStack& stack, const Tensor& tokens,
                             const std::vector<Box>& token_cells,
                             const Tensor& text_embeddings);
};

// Sinusoidal encoding of (cx, cy, w, h) rows into `dim` channels; dim must be
// a multiple of 8.
Tensor box_positional_encoding(const Tensor& boxes, std::size_t dim);

// One fusion layer: concatenate, masked self-attention with box positional
// encodings, split, shared text/image cross-attention and FFN, unshared box
// heads, logit-space box update. `mask` is empty or (dn + M + S)^2.
QueryBank fusion_layer_forward(const FusionLayer& layer, std::size_t heads,
                               const QueryBank& qb, const DecoderContext& ctx,
                               const SquareMask& mask);

// The same layer restricted to a single specific partition, with no general
// queries or denoising groups involved.
QueryPartition open_set_layer_forward(const FusionLayer& layer,
                                      std::size_t heads,
                                      const QueryPartition& specific,
                                      const DecoderContext& ctx);

struct PartitionPrediction {
  Tensor boxes;   // [n, 4]
  Tensor logits;  // [n, C]
};

struct LayerPrediction {
  PartitionPrediction denoising;
  PartitionPrediction general;
  PartitionPrediction specific;
};

struct DecodeResult {
  QueryBank final;
  std::vector<LayerPrediction> layers;  // one entry per applied layer
  Tensor logits;                        // [M + S, C] from the final queries
};

DecodeResult decode(const DecoderStack& stack, const QueryBank& qb,
                    const DecoderContext& ctx, const SquareMask& mask);

// Parameter groups trained during fusion fine-tuning: per layer the
// self-attention weights and both box heads.
struct ParamGroup {
  std::string name;
  std::vector<Tensor> tensors;
};
std::vector<ParamGroup> freeze_mask(const DecoderStack& stack);

}  // namespace owqf
