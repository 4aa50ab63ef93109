#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "owqf/feature_world.hpp"

namespace owqf {

inline constexpr std::size_t kUnknownLabel = std::numeric_limits<std::size_t>::max();

struct SimulatorConfig {
  std::size_t layers = 3;
  std::size_t heads = 4;
  std::size_t grid = 24;
  double fidelity = 0.9;
  double label_noise = 0.1;
  double threshold = 0.3;
  std::size_t max_points = 20;
};

// A peak the simulated vision-language model attends to, with the category it
// names there. Distractors carry a random label.
struct PeakSource {
  double x = 0.0;
  double y = 0.0;
  std::size_t label = kUnknownLabel;
  bool distractor = false;
};

// Nonnegative maps [layers, heads, H, W] plus what the simulated model said.
struct AttentionStack {
  Tensor maps;
  std::vector<PeakSource> sources;

  std::size_t layers() const { return maps.dim(0); }
  std::size_t heads() const { return maps.dim(1); }
  std::size_t height() const { return maps.dim(2); }
  std::size_t width() const { return maps.dim(3); }
};

struct PromptPoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
  std::size_t proposed_label = kUnknownLabel;
};

// Each object is attended with probability `fidelity`; its peak appears in
// every layer, in all heads or all but one random head. For each object a
// distractor peak at a uniform location is added with probability
// 1 - fidelity. Labels flip to a random other category with probability
// label_noise.
AttentionStack synthesize_attention(const Scene& scene,
                                    const CategoryTable& table,
                                    const SimulatorConfig& cfg,
                                    std::uint64_t seed);

// Per layer, heads weighted by their normalized peak-to-mean ratio.
Tensor aggregate_heads(const AttentionStack& stack);

// refined <- max_normalize(refined * next + 1e-8) across layers; output is
// max-normalized. Input [layers, H, W], output [H, W].
Tensor attention_flow(const Tensor& per_layer);

// Local maxima above `threshold`, suppressed within 2 cells of a stronger
// kept peak, located at the 3x3 value-weighted centroid, sorted by score and
// truncated. Labels are taken from the nearest source within 3 cells.
std::vector<PromptPoint> sample_prompt_points(
    const Tensor& refined, double threshold, std::size_t max_points,
    const std::vector<PeakSource>& sources = {});

// Distinct labels the simulated model named, ascending.
std::vector<std::size_t> discovered_labels(const std::vector<PeakSource>& sources);
std::vector<std::size_t> discovered_labels(const std::vector<PromptPoint>& points);

struct PromptResult {
  std::vector<PromptPoint> points;
  std::vector<std::size_t> discovered;
};

// The whole pipeline for one scene.
PromptResult simulate_prompts(const Scene& scene, const CategoryTable& table,
                              const SimulatorConfig& cfg, std::uint64_t seed);

}  // namespace owqf
