#include "owqf/attention.hpp"

#include <cmath>

namespace owqf {

Linear Linear::xavier(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in * out);
  for (double& v : w) v = dist(rng);
  return {Tensor::from({in, out}, std::move(w)), Tensor::zeros({out})};
}

Linear Linear::zero(std::size_t in, std::size_t out) {
  return {Tensor::zeros({in, out}), Tensor::zeros({out})};
}

Tensor Linear::operator()(const Tensor& x) const {
  return add_row(matmul(x, weight), bias);
}

LayerNormParams LayerNormParams::identity(std::size_t width) {
  return {Tensor::full({width}, 1.0), Tensor::zeros({width})};
}

Tensor LayerNormParams::operator()(const Tensor& x) const {
  return layernorm(x, gain, bias);
}

Tensor Mlp::operator()(const Tensor& x) const { return out(relu(hidden(x))); }

AttentionWeights AttentionWeights::xavier(std::size_t dim, Rng& rng) {
  AttentionWeights w;
  w.query = Linear::xavier(dim, dim, rng);
  w.key = Linear::xavier(dim, dim, rng);
  w.value = Linear::xavier(dim, dim, rng);
  w.output = Linear::xavier(dim, dim, rng);
  return w;
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t heads,
                            const std::vector<bool>& blocked,
                            const AttentionWeights& weights) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw ShapeError("multi_head_attention: expected matrices");
  const std::size_t dim = q.dim(1);
  if (heads == 0 || dim % heads != 0)
    throw ConfigError("multi_head_attention: width " + std::to_string(dim) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
  if (k.dim(1) != dim || v.dim(1) != dim || k.dim(0) != v.dim(0))
    throw ShapeError("multi_head_attention: key/value shapes " +
                     to_string(k.shape()) + ", " + to_string(v.shape()) +
                     " do not match query width " + std::to_string(dim));
  const std::size_t lq = q.dim(0), lk = k.dim(0);
  if (!blocked.empty() && blocked.size() != lq * lk)
    throw ShapeError("multi_head_attention: mask has " +
                     std::to_string(blocked.size()) + " entries, expected " +
                     std::to_string(lq) + "x" + std::to_string(lk));
  if (lq == 0 || lk == 0) return Tensor::zeros({lq, dim});

  const Tensor qp = weights.query(q);
  const Tensor kp = weights.key(k);
  const Tensor vp = weights.value(v);
  const std::size_t dh = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> per_head;
  per_head.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(qp, h * dh, (h + 1) * dh);
    const Tensor kh = slice_cols(kp, h * dh, (h + 1) * dh);
    const Tensor vh = slice_cols(vp, h * dh, (h + 1) * dh);
    const Tensor attn =
        masked_softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt), blocked);
    per_head.push_back(matmul(attn, vh));
  }
  Tensor out = weights.output(heads == 1 ? per_head.front()
                                         : concat_cols(per_head));

  if (blocked.empty()) return out;
  std::vector<double> keep(lq * dim, 1.0);
  bool any_dead = false;
  for (std::size_t i = 0; i < lq; ++i) {
    bool dead = true;
    for (std::size_t j = 0; j < lk && dead; ++j) dead = blocked[i * lk + j];
    if (dead) {
      any_dead = true;
      std::fill_n(keep.begin() + i * dim, dim, 0.0);
    }
  }
  if (!any_dead) return out;
  return mul(out, Tensor::from({lq, dim}, std::move(keep)));
}

}  // namespace owqf
