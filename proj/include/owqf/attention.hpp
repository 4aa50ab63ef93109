#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "owqf/tensor.hpp"

namespace owqf {

using Rng = std::mt19937_64;

// y = x W + b with W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear xavier(std::size_t in, std::size_t out, Rng& rng);
  static Linear zero(std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const;
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;

  static LayerNormParams identity(std::size_t width);
  Tensor operator()(const Tensor& x) const;
};

// Two-layer perceptron with a ReLU between the layers.
struct Mlp {
  Linear hidden;
  Linear out;

  Tensor operator()(const Tensor& x) const;
};

struct AttentionWeights {
  Linear query;
  Linear key;
  Linear value;
  Linear output;

  static AttentionWeights xavier(std::size_t dim, Rng& rng);
};

// Scaled dot-product attention with `heads` heads. `blocked` is either empty
// or a row-major [Lq, Lk] mask where true removes the pair. Rows with every
// key blocked (or no keys at all) produce zeros.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t heads,
                            const std::vector<bool>& blocked,
                            const AttentionWeights& weights);

}  // namespace owqf
