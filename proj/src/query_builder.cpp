#include "owqf/query_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "owqf/kernels.hpp"

namespace owqf {

LearnableQueryBank LearnableQueryBank::init(std::size_t n, std::size_t dim,
                                            Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n * dim);
  for (double& x : v) x = normal(rng);
  return {Tensor::from({n, dim}, std::move(v))};
}

SpecificSelector SpecificSelector::init(std::size_t s, std::size_t dim,
                                        Rng& rng) {
  SpecificSelector sel;
  sel.memory_proj = Linear::xavier(dim, dim, rng);
  sel.memory_norm = LayerNormParams::identity(dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(s * dim);
  for (double& x : v) x = normal(rng);
  sel.content_bank = Tensor::from({s, dim}, std::move(v));
  return sel;
}

Tensor interpolate_points(const FeaturePyramid& fp,
                          const std::vector<std::pair<double, double>>& xy) {
  std::vector<double> flat;
  flat.reserve(2 * xy.size());
  for (const auto& [x, y] : xy) {
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0))
      throw std::out_of_range("point (" + std::to_string(x) + ", " +
                              std::to_string(y) + ") outside the unit square");
    flat.push_back(x);
    flat.push_back(y);
  }
  const std::size_t p = xy.size(), d = fp.dim, levels = fp.levels.size();
  std::vector<double> out(p * levels * d);
  std::vector<double> level_out(p * d);
  for (std::size_t l = 0; l < levels; ++l) {
    const kernels::GridView grid{fp.levels[l].data(), fp.height(l), fp.width(l), d};
    kernels::bilinear_sample(grid, flat, level_out);
    for (std::size_t i = 0; i < p; ++i)
      std::copy_n(level_out.begin() + i * d, d, out.begin() + (i * levels + l) * d);
  }
  return Tensor::from({p, levels * d}, std::move(out));
}

Tensor interpolate_point_feature(const FeaturePyramid& fp, double x, double y) {
  return reshape(interpolate_points(fp, {{x, y}}), {fp.levels.size(), fp.dim});
}

PointBoxes points_to_initial_boxes(
    const Tensor& point_features, std::size_t levels,
    const std::vector<std::pair<double, double>>& xy, const PointHeads& heads) {
  const std::size_t p = xy.size();
  if (point_features.rank() != 2 || point_features.dim(0) != p ||
      point_features.dim(1) % levels != 0)
    throw ShapeError("points_to_initial_boxes: features " +
                     to_string(point_features.shape()) + " for " +
                     std::to_string(p) + " points");
  const std::size_t d = point_features.dim(1) / levels;
  std::vector<double> pooled(p * d, 0.0);
  const auto pf = point_features.data();
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t l = 0; l < levels; ++l)
      for (std::size_t c = 0; c < d; ++c)
        pooled[i * d + c] += pf[(i * levels + l) * d + c];
  for (double& v : pooled) v /= static_cast<double>(levels);
  for (double v : pooled)
    if (!std::isfinite(v)) throw NumericError("non-finite point feature");

  PointBoxes out;
  out.features = (*heads.adapter)(Tensor::from({p, d}, std::move(pooled)));
  std::vector<Box> anchors;
  anchors.reserve(p);
  for (const auto& [x, y] : xy)
    anchors.push_back({x, y, kDefaultPointBoxSide, kDefaultPointBoxSide});
  out.boxes = apply_delta(boxes_to_tensor(anchors), (*heads.box_head)(out.features));
  out.logits = heads.cls->logits(out.features, heads.text_keys);
  const std::size_t c = out.logits.dim(1);
  out.scores.assign(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    double best = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      best = std::max(best, sigmoid(out.logits.at(i, j)));
    out.scores[i] = best;
  }
  for (double v : out.boxes.data())
    if (!std::isfinite(v)) throw NumericError("non-finite initial box");
  return out;
}

std::pair<Box, double> point_to_initial_box(const Tensor& point_feature,
                                            double x, double y,
                                            const PointHeads& heads) {
  const std::size_t levels = point_feature.dim(0);
  const Tensor row = reshape(point_feature, {1, point_feature.size()});
  const PointBoxes pb = points_to_initial_boxes(row, levels, {{x, y}}, heads);
  const auto b = pb.boxes.data();
  return {Box::make(b[0], b[1], b[2], b[3]), pb.scores[0]};
}

RankedMatch rank_and_match(const std::vector<double>& scores,
                           std::size_t bank_size) {
  RankedMatch m;
  m.order.resize(scores.size());
  std::iota(m.order.begin(), m.order.end(), std::size_t{0});
  std::stable_sort(m.order.begin(), m.order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (m.order.size() > bank_size) m.order.resize(bank_size);
  return m;
}

GeneralQueries compose_general_queries(const LearnableQueryBank& bank,
                                       const RankedMatch& match,
                                       const Tensor& boxes,
                                       const Tensor& features, bool ranked,
                                       bool add_point_feature) {
  GeneralQueries out;
  out.source_points = match.order;
  const std::size_t m = match.order.size();
  const std::size_t dim = bank.embeddings.dim(1);
  if (m == 0) {
    out.partition = QueryPartition::empty(dim);
    return out;
  }
  std::vector<std::size_t> query_rows(m);
  for (std::size_t i = 0; i < m; ++i) query_rows[i] = ranked ? i : 0;
  Tensor queries = gather_rows(bank.embeddings, query_rows);
  if (add_point_feature) queries = add(queries, gather_rows(features, match.order));
  out.partition = {queries, gather_rows(boxes, match.order)};
  return out;
}

SpecificProposals build_specific_queries(
    const FeaturePyramid& fp, const Tensor& tokens,
    const std::vector<Box>& cells, const SpecificSelector& selector,
    const Mlp& box_head, const ClassHead& cls, const Tensor& text_keys,
    std::size_t s, const std::vector<std::size_t>& score_columns) {
  const std::size_t t = fp.token_count();
  if (s == 0) throw ConfigError("queries.n_specific must be at least 1");
  if (s > t)
    throw ConfigError("queries.n_specific (" + std::to_string(s) +
                      ") exceeds the " + std::to_string(t) +
                      " pyramid locations");
  if (s > selector.content_bank.dim(0))
    throw ConfigError("specific content bank smaller than queries.n_specific");

  SpecificProposals out;
  const Tensor memory = selector.memory_norm(selector.memory_proj(tokens));
  out.token_logits = cls.logits(memory, text_keys);
  std::vector<Box> anchors;
  anchors.reserve(t);
  for (const Box& c : cells)
    anchors.push_back({c.cx, c.cy, kDefaultPointBoxSide, kDefaultPointBoxSide});
  out.token_boxes = apply_delta(boxes_to_tensor(anchors), box_head(memory));

  const std::size_t c = out.token_logits.dim(1);
  std::vector<double> score(t, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < t; ++i) {
    if (score_columns.empty()) {
      for (std::size_t j = 0; j < c; ++j)
        score[i] = std::max(score[i], out.token_logits.at(i, j));
    } else {
      for (std::size_t j : score_columns)
        score[i] = std::max(score[i], out.token_logits.at(i, j));
    }
  }
  std::vector<std::size_t> order(t);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  order.resize(s);
  out.selected_tokens = order;
  out.selected_logits = gather_rows(out.token_logits, order);
  out.partition = {slice_rows(selector.content_bank, 0, s),
                   gather_rows(out.token_boxes, order)};
  return out;
}

}  // namespace owqf
