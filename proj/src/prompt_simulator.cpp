#include "owqf/prompt_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace owqf {

namespace {

constexpr double kBackgroundNoise = 0.05;
constexpr double kFlowEps = 1e-8;
constexpr int kNmsRadius = 2;
constexpr double kLabelRadius = 3.0;

struct Peak {
  double x, y, sigma, amplitude;
  // heads_missing[l] is the head that lacks this peak in layer l, or -1.
  std::vector<int> heads_missing;
};

std::size_t random_other_label(std::size_t label, std::size_t n, Rng& rng) {
  if (n <= 1) return label;
  std::uniform_int_distribution<std::size_t> pick(0, n - 2);
  const std::size_t r = pick(rng);
  return r >= label ? r + 1 : r;
}

void max_normalize(std::span<double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  if (m > 0.0)
    for (double& x : v) x /= m;
}

}  // namespace

AttentionStack synthesize_attention(const Scene& scene,
                                    const CategoryTable& table,
                                    const SimulatorConfig& cfg,
                                    std::uint64_t seed) {
  if (!(cfg.fidelity >= 0.0 && cfg.fidelity <= 1.0))
    throw ConfigError("prompt.fidelity must lie in [0, 1]");
  if (!(cfg.label_noise >= 0.0 && cfg.label_noise <= 1.0))
    throw ConfigError("prompt.label_noise must lie in [0, 1]");
  if (cfg.layers == 0 || cfg.heads == 0 || cfg.grid < 2)
    throw ConfigError("simulator needs at least one layer, one head and a 2x2 grid");

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> head_pick(0, static_cast<int>(cfg.heads) - 1);
  const double cell = 1.0 / static_cast<double>(cfg.grid);
  const std::size_t n_cat = table.size();

  auto draw_missing = [&] {
    std::vector<int> missing(cfg.layers, -1);
    for (auto& m : missing)
      if (cfg.heads > 1 && unit(rng) < 0.5) m = head_pick(rng);
    return missing;
  };

  AttentionStack stack;
  std::vector<Peak> peaks;
  for (std::size_t i = 0; i < scene.gt_boxes.size(); ++i) {
    const Box& b = scene.gt_boxes[i];
    const bool attended = unit(rng) < cfg.fidelity;
    const bool distract = unit(rng) >= cfg.fidelity;
    if (attended) {
      const double sigma = std::max(0.7 * cell, 0.15 * std::min(b.w, b.h));
      peaks.push_back({b.cx, b.cy, sigma, 0.85 + 0.15 * unit(rng), draw_missing()});
      std::size_t label = scene.gt_labels[i];
      if (unit(rng) < cfg.label_noise) label = random_other_label(label, n_cat, rng);
      stack.sources.push_back({b.cx, b.cy, label, false});
    }
    if (distract) {
      const double x = unit(rng), y = unit(rng);
      const double sigma = std::max(0.7 * cell, 0.03 + 0.02 * unit(rng));
      peaks.push_back({x, y, sigma, 0.85 + 0.15 * unit(rng), draw_missing()});
      std::size_t label = 0;
      if (n_cat > 0) label = std::uniform_int_distribution<std::size_t>(0, n_cat - 1)(rng);
      stack.sources.push_back({x, y, label, true});
    }
  }

  const std::size_t g = cfg.grid;
  std::vector<double> maps(cfg.layers * cfg.heads * g * g);
  for (double& v : maps) v = kBackgroundNoise * unit(rng);
  for (std::size_t l = 0; l < cfg.layers; ++l)
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      double* m = maps.data() + (l * cfg.heads + h) * g * g;
      for (const Peak& p : peaks) {
        if (p.heads_missing[l] == static_cast<int>(h)) continue;
        const double inv = 1.0 / (2.0 * p.sigma * p.sigma);
        for (std::size_t r = 0; r < g; ++r)
          for (std::size_t c = 0; c < g; ++c) {
            const double dx = (c + 0.5) * cell - p.x;
            const double dy = (r + 0.5) * cell - p.y;
            m[r * g + c] += p.amplitude * std::exp(-(dx * dx + dy * dy) * inv);
          }
      }
    }
  stack.maps = Tensor::from({cfg.layers, cfg.heads, g, g}, std::move(maps));
  return stack;
}

Tensor aggregate_heads(const AttentionStack& stack) {
  const std::size_t layers = stack.layers(), heads = stack.heads();
  const std::size_t hw = stack.height() * stack.width();
  const auto in = stack.maps.data();
  std::vector<double> out(layers * hw, 0.0);
  std::vector<double> weight(heads);
  for (std::size_t l = 0; l < layers; ++l) {
    double total = 0.0;
    for (std::size_t h = 0; h < heads; ++h) {
      const auto m = in.subspan((l * heads + h) * hw, hw);
      const double peak = *std::max_element(m.begin(), m.end());
      const double mean = std::accumulate(m.begin(), m.end(), 0.0) / hw;
      weight[h] = mean > 0.0 ? peak / mean : 1.0;
      total += weight[h];
    }
    for (std::size_t h = 0; h < heads; ++h) {
      const double w = weight[h] / total;
      const auto m = in.subspan((l * heads + h) * hw, hw);
      for (std::size_t i = 0; i < hw; ++i) out[l * hw + i] += w * m[i];
    }
  }
  return Tensor::from({layers, stack.height(), stack.width()}, std::move(out));
}

Tensor attention_flow(const Tensor& per_layer) {
  if (per_layer.rank() != 3 || per_layer.dim(0) == 0)
    throw ShapeError("attention_flow expects [layers, H, W] with layers >= 1, got " +
                     to_string(per_layer.shape()));
  const std::size_t layers = per_layer.dim(0);
  const std::size_t hw = per_layer.dim(1) * per_layer.dim(2);
  const auto in = per_layer.data();
  std::vector<double> refined(in.begin(), in.begin() + hw);
  for (std::size_t l = 1; l < layers; ++l) {
    for (std::size_t i = 0; i < hw; ++i) refined[i] = refined[i] * in[l * hw + i] + kFlowEps;
    max_normalize(refined);
  }
  max_normalize(refined);
  return Tensor::from({per_layer.dim(1), per_layer.dim(2)}, std::move(refined));
}

std::vector<PromptPoint> sample_prompt_points(
    const Tensor& refined, double threshold, std::size_t max_points,
    const std::vector<PeakSource>& sources) {
  if (refined.rank() != 2) throw ShapeError("sample_prompt_points expects [H, W]");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("prompt.threshold must lie in (0, 1)");
  if (max_points == 0) throw ConfigError("prompt.max_points must be at least 1");
  const int h = static_cast<int>(refined.dim(0)), w = static_cast<int>(refined.dim(1));
  const auto v = refined.data();
  auto at = [&](int r, int c) { return v[static_cast<std::size_t>(r * w + c)]; };

  std::vector<int> candidates;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double x = at(r, c);
      if (!(x > threshold)) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if ((dr || dc) && rr >= 0 && rr < h && cc >= 0 && cc < w && at(rr, cc) > x) {
            is_max = false;
            break;
          }
        }
      if (is_max) candidates.push_back(r * w + c);
    }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](int a, int b) { return v[a] > v[b]; });

  std::vector<int> kept;
  for (int idx : candidates) {
    const int r = idx / w, c = idx % w;
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](int k) {
      return std::max(std::abs(k / w - r), std::abs(k % w - c)) <= kNmsRadius;
    });
    if (!suppressed) kept.push_back(idx);
    if (kept.size() == max_points) break;
  }

  std::vector<PromptPoint> points;
  points.reserve(kept.size());
  for (int idx : kept) {
    const int r = idx / w, c = idx % w;
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        const double m = at(rr, cc);
        sw += m;
        sx += m * (cc + 0.5);
        sy += m * (rr + 0.5);
      }
    PromptPoint p;
    p.x = std::clamp(sx / sw / w, 0.0, 1.0);
    p.y = std::clamp(sy / sw / h, 0.0, 1.0);
    p.score = at(r, c);
    double best = kLabelRadius;
    for (const PeakSource& s : sources) {
      const double d = std::hypot((s.x - p.x) * w, (s.y - p.y) * h);
      if (d <= best) {
        if (d < best || p.proposed_label == kUnknownLabel) p.proposed_label = s.label;
        best = d;
      }
    }
    points.push_back(p);
  }
  return points;
}

std::vector<std::size_t> discovered_labels(const std::vector<PeakSource>& sources) {
  std::set<std::size_t> s;
  for (const auto& p : sources)
    if (p.label != kUnknownLabel) s.insert(p.label);
  return {s.begin(), s.end()};
}

std::vector<std::size_t> discovered_labels(const std::vector<PromptPoint>& points) {
  std::set<std::size_t> s;
  for (const auto& p : points)
    if (p.proposed_label != kUnknownLabel) s.insert(p.proposed_label);
  return {s.begin(), s.end()};
}

PromptResult simulate_prompts(const Scene& scene, const CategoryTable& table,
                              const SimulatorConfig& cfg, std::uint64_t seed) {
  const AttentionStack stack = synthesize_attention(scene, table, cfg, seed);
  PromptResult r;
  r.points = sample_prompt_points(attention_flow(aggregate_heads(stack)),
                                  cfg.threshold, cfg.max_points, stack.sources);
  r.discovered = discovered_labels(r.points);
  return r;
}

}  // namespace owqf
