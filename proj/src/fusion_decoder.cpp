#include "owqf/fusion_decoder.hpp"

#include <cmath>
#include <numbers>

namespace owqf {

QueryPartition QueryPartition::empty(std::size_t dim) {
  return {Tensor::zeros({0, dim}), Tensor::zeros({0, 4})};
}

FusionLayer FusionLayer::init(std::size_t dim, Rng& rng) {
  FusionLayer l;
  l.self_attn = AttentionWeights::xavier(dim, rng);
  l.self_norm = LayerNormParams::identity(dim);
  l.text_attn = AttentionWeights::xavier(dim, rng);
  l.text_norm = LayerNormParams::identity(dim);
  l.image_attn = AttentionWeights::xavier(dim, rng);
  l.image_norm = LayerNormParams::identity(dim);
  l.ffn = {Linear::xavier(dim, 2 * dim, rng), Linear::xavier(2 * dim, dim, rng)};
  l.ffn_norm = LayerNormParams::identity(dim);
  // Zero output layers: an untrained head leaves boxes where they are.
  l.box_head_general = {Linear::xavier(dim, dim, rng), Linear::zero(dim, 4)};
  l.box_head_specific = {Linear::xavier(dim, dim, rng), Linear::zero(dim, 4)};
  return l;
}

ClassHead ClassHead::init(std::size_t dim, std::size_t d_text, Rng& rng) {
  ClassHead h;
  h.query_proj = Linear::xavier(dim, dim, rng);
  h.text_proj = Linear::xavier(d_text, dim, rng);
  return h;
}

Tensor ClassHead::text_keys(const Tensor& text_embeddings) const {
  return text_proj(text_embeddings);
}

Tensor ClassHead::logits(const Tensor& queries, const Tensor& keys) const {
  return add_scalar(matmul_nt(query_proj(queries), keys), prior_logit);
}

DecoderStack DecoderStack::init(std::size_t n_layers, std::size_t dim,
                                std::size_t heads, std::size_t d_text,
                                Rng& rng) {
  if (heads == 0 || dim % heads != 0)
    throw ConfigError("decoder.dim must be divisible by decoder.heads");
  DecoderStack s;
  s.heads = heads;
  for (std::size_t i = 0; i < n_layers; ++i)
    s.layers.push_back(FusionLayer::init(dim, rng));
  s.cls = ClassHead::init(dim, d_text, rng);
  return s;
}

Tensor box_positional_encoding(const Tensor& boxes, std::size_t dim) {
  if (dim % 8 != 0)
    throw ConfigError("positional encoding width must be a multiple of 8");
  const std::size_t n = boxes.dim(0);
  const std::size_t per = dim / 4, freqs = per / 2;
  std::vector<double> out(n * dim);
  const auto b = boxes.data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      const double x = b[r * 4 + c];
      for (std::size_t i = 0; i < freqs; ++i) {
        const double f = std::numbers::pi * std::ldexp(1.0, static_cast<int>(i));
        out[r * dim + c * per + 2 * i] = std::sin(x * f);
        out[r * dim + c * per + 2 * i + 1] = std::cos(x * f);
      }
    }
  return Tensor::from({n, dim}, std::move(out));
}

DecoderContext DecoderContext::make(const DecoderStack& stack,
                                    const Tensor& tokens,
                                    const std::vector<Box>& token_cells,
                                    const Tensor& text_embeddings) {
  DecoderContext ctx;
  ctx.image_tokens = tokens;
  ctx.image_keys =
      add(tokens, box_positional_encoding(boxes_to_tensor(token_cells),
                                          tokens.dim(1)));
  ctx.text_embeddings = text_embeddings;
  ctx.text_keys = stack.cls.text_keys(text_embeddings);
  return ctx;
}

namespace {

// Everything between the self-attention and the box heads, applied row-wise.
Tensor shared_stages(const FusionLayer& layer, std::size_t heads,
                     const Tensor& q, const Tensor& pos,
                     const DecoderContext& ctx) {
  const Tensor text = layer.text_norm(
      add(q, multi_head_attention(q, ctx.text_keys, ctx.text_keys, heads, {},
                                  layer.text_attn)));
  const Tensor image = layer.image_norm(
      add(text, multi_head_attention(add(text, pos), ctx.image_keys,
                                     ctx.image_tokens, heads, {},
                                     layer.image_attn)));
  return layer.ffn_norm(add(image, layer.ffn(image)));
}

Tensor self_stage(const FusionLayer& layer, std::size_t heads, const Tensor& q,
                  const Tensor& pos, const std::vector<bool>& blocked) {
  const Tensor qk = add(q, pos);
  return layer.self_norm(
      add(q, multi_head_attention(qk, qk, q, heads, blocked, layer.self_attn)));
}

}  // namespace

QueryBank fusion_layer_forward(const FusionLayer& layer, std::size_t heads,
                               const QueryBank& qb, const DecoderContext& ctx,
                               const SquareMask& mask) {
  const std::size_t n_dn = qb.denoising.size(), n_gen = qb.general.size(),
                    n_spec = qb.specific.size();
  const std::size_t n = n_dn + n_gen + n_spec;
  if (!mask.blocked.empty() && mask.size != n)
    throw ShapeError("fusion layer: mask is " + std::to_string(mask.size) +
                     "^2 but there are " + std::to_string(n) + " queries");
  if (n == 0) return qb;
  const std::size_t dim = ctx.image_tokens.dim(1);

  std::vector<Tensor> parts, boxes;
  for (const QueryPartition* p : {&qb.denoising, &qb.general, &qb.specific})
    if (p->size() > 0) {
      parts.push_back(p->queries);
      boxes.push_back(p->boxes.detach());
    }
  const Tensor q = concat_rows(parts);
  const Tensor b = concat_rows(boxes);
  const Tensor pos = box_positional_encoding(b, dim);

  const Tensor fused = self_stage(layer, heads, q, pos, mask.blocked);
  const Tensor updated = shared_stages(layer, heads, fused, pos, ctx);

  QueryBank out;
  const std::size_t n_point = n_dn + n_gen;
  Tensor point_boxes;
  if (n_point > 0) {
    const Tensor rows = slice_rows(updated, 0, n_point);
    point_boxes = apply_delta(slice_rows(b, 0, n_point),
                              layer.box_head_general(rows));
    out.denoising = {slice_rows(rows, 0, n_dn), slice_rows(point_boxes, 0, n_dn)};
    out.general = {slice_rows(rows, n_dn, n_point),
                   slice_rows(point_boxes, n_dn, n_point)};
  } else {
    out.denoising = QueryPartition::empty(dim);
    out.general = QueryPartition::empty(dim);
  }
  if (n_spec > 0) {
    const Tensor rows = slice_rows(updated, n_point, n);
    out.specific = {rows, apply_delta(slice_rows(b, n_point, n),
                                      layer.box_head_specific(rows))};
  } else {
    out.specific = QueryPartition::empty(dim);
  }
  return out;
}

QueryPartition open_set_layer_forward(const FusionLayer& layer,
                                      std::size_t heads,
                                      const QueryPartition& specific,
                                      const DecoderContext& ctx) {
  if (specific.size() == 0) return specific;
  const std::size_t dim = ctx.image_tokens.dim(1);
  const Tensor q = concat_rows({specific.queries});
  const Tensor b = concat_rows({specific.boxes.detach()});
  const Tensor pos = box_positional_encoding(b, dim);
  const Tensor updated =
      shared_stages(layer, heads, self_stage(layer, heads, q, pos, {}), pos, ctx);
  const std::size_t n = specific.size();
  const Tensor rows = slice_rows(updated, 0, n);
  return {rows, apply_delta(slice_rows(b, 0, n), layer.box_head_specific(rows))};
}

DecodeResult decode(const DecoderStack& stack, const QueryBank& qb,
                    const DecoderContext& ctx, const SquareMask& mask) {
  DecodeResult result;
  result.final = qb;
  for (const FusionLayer& layer : stack.layers) {
    result.final = fusion_layer_forward(layer, stack.heads, result.final, ctx, mask);
    LayerPrediction pred;
    auto predict = [&](const QueryPartition& p) {
      return PartitionPrediction{p.boxes, stack.cls.logits(p.queries, ctx.text_keys)};
    };
    pred.denoising = predict(result.final.denoising);
    pred.general = predict(result.final.general);
    pred.specific = predict(result.final.specific);
    result.layers.push_back(std::move(pred));
  }
  const std::size_t dim = ctx.image_tokens.dim(1);
  const Tensor gq = result.final.general.size() > 0 ? result.final.general.queries
                                                    : Tensor::zeros({0, dim});
  const Tensor sq = result.final.specific.size() > 0
                        ? result.final.specific.queries
                        : Tensor::zeros({0, dim});
  result.logits = stack.cls.logits(concat_rows({gq, sq}), ctx.text_keys);
  return result;
}

std::vector<ParamGroup> freeze_mask(const DecoderStack& stack) {
  std::vector<ParamGroup> groups;
  auto linear = [](const Linear& l, std::vector<Tensor>& out) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  };
  for (std::size_t i = 0; i < stack.layers.size(); ++i) {
    const FusionLayer& l = stack.layers[i];
    const std::string prefix = "decoder.layer" + std::to_string(i) + ".";
    ParamGroup sa{prefix + "self_attn", {}};
    for (const Linear* lin : {&l.self_attn.query, &l.self_attn.key,
                              &l.self_attn.value, &l.self_attn.output})
      linear(*lin, sa.tensors);
    ParamGroup bg{prefix + "box_head_general", {}};
    linear(l.box_head_general.hidden, bg.tensors);
    linear(l.box_head_general.out, bg.tensors);
    ParamGroup bs{prefix + "box_head_specific", {}};
    linear(l.box_head_specific.hidden, bs.tensors);
    linear(l.box_head_specific.out, bs.tensors);
    groups.push_back(std::move(sa));
    groups.push_back(std::move(bg));
    groups.push_back(std::move(bs));
  }
  return groups;
}

}  // namespace owqf
