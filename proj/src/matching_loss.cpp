#include "owqf/matching_loss.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace owqf {

void CostWeights::validate() const {
  for (double w : {w_class, w_l1, w_giou})
    if (!std::isfinite(w) || w < 0.0)
      throw ConfigError("loss weights must be finite and nonnegative");
  if (w_class == 0.0 && w_l1 == 0.0 && w_giou == 0.0)
    throw ConfigError("loss weights must not all be zero");
}

Tensor giou_loss_sum(const Tensor& pred, const Tensor& target) {
  const std::size_t k = pred.dim(0);
  if (k == 0) return Tensor::scalar(0.0);
  auto col = [](const Tensor& t, std::size_t c) { return slice_cols(t, c, c + 1); };
  auto corners = [&](const Tensor& b) {
    const Tensor cx = col(b, 0), cy = col(b, 1);
    const Tensor hw = scale(col(b, 2), 0.5), hh = scale(col(b, 3), 0.5);
    return std::array<Tensor, 4>{sub(cx, hw), sub(cy, hh), add(cx, hw), add(cy, hh)};
  };
  const auto p = corners(pred);
  const auto t = corners(target);
  const Tensor iw = relu(sub(minimum(p[2], t[2]), maximum(p[0], t[0])));
  const Tensor ih = relu(sub(minimum(p[3], t[3]), maximum(p[1], t[1])));
  const Tensor inter = mul(iw, ih);
  const Tensor area_p = mul(col(pred, 2), col(pred, 3));
  const Tensor area_t = mul(col(target, 2), col(target, 3));
  const Tensor uni = sub(add(area_p, area_t), inter);
  const Tensor ew = sub(maximum(p[2], t[2]), minimum(p[0], t[0]));
  const Tensor eh = sub(maximum(p[3], t[3]), minimum(p[1], t[1]));
  const Tensor enclosing = mul(ew, eh);
  const Tensor g = sub(div(inter, uni), div(sub(enclosing, uni), enclosing));
  return add_scalar(scale(sum(g), -1.0), static_cast<double>(k));
}

namespace {

double sigmoid_value(double x) { return sigmoid(x); }

// Loss pieces shared by the matched and known-target variants.
GroundingResult assemble(const Tensor& pred_boxes, const Tensor& logits,
                         const std::vector<double>& targets,
                         const std::vector<std::size_t>& box_rows,
                         const std::vector<Box>& box_targets, double norm,
                         double constant, const CostWeights& w,
                         const FocalParams& focal) {
  GroundingResult r;
  Tensor total = Tensor::scalar(constant);
  r.terms.cls = constant;
  if (logits.size() > 0) {
    const Tensor cls = scale(
        sigmoid_focal_loss(logits, targets, focal.alpha, focal.gamma),
        w.w_class / norm);
    r.terms.cls += cls.item();
    total = add(total, cls);
  }
  if (!box_rows.empty()) {
    const Tensor pred = gather_rows(pred_boxes, box_rows);
    const Tensor tgt = boxes_to_tensor(box_targets);
    const Tensor l1 = scale(sum(abs(sub(pred, tgt))), w.w_l1 / norm);
    const Tensor gl = scale(giou_loss_sum(pred, tgt), w.w_giou / norm);
    r.terms.l1 = l1.item();
    r.terms.giou = gl.item();
    total = add(add(total, l1), gl);
  }
  r.loss = total;
  return r;
}

}  // namespace

GroundingResult grounding_loss(const Tensor& pred_boxes, const Tensor& logits,
                               const std::vector<Box>& gt_boxes,
                               const std::vector<std::size_t>& gt_columns,
                               const CostWeights& weights,
                               const FocalParams& focal) {
  const std::size_t p = pred_boxes.dim(0), g = gt_boxes.size();
  if (gt_columns.size() != g)
    throw ConsistencyError("grounding_loss: labels and boxes differ in length");
  const std::size_t c = logits.rank() == 2 ? logits.dim(1) : 0;
  if (logits.dim(0) != p)
    throw ShapeError("grounding_loss: logits rows do not match predictions");
  for (std::size_t col : gt_columns)
    if (col >= c && p > 0)
      throw ConsistencyError("grounding_loss: label column out of range");
  if (p == 0 && g == 0) return {Tensor::scalar(0.0), {}, {}};

  const double norm = std::max<double>(1.0, static_cast<double>(g));
  const auto pb = tensor_to_boxes(pred_boxes);

  std::vector<double> cost(p * g);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < g; ++j) {
      const Box& a = pb[i];
      const Box& b = gt_boxes[j];
      const double l1 = std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) +
                        std::abs(a.w - b.w) + std::abs(a.h - b.h);
      cost[i * g + j] =
          weights.w_class * (1.0 - sigmoid_value(logits.at(i, gt_columns[j]))) +
          weights.w_l1 * l1 + weights.w_giou * (1.0 - giou(a, b));
    }
  Assignment assignment = hungarian_match(cost, p, g);

  std::vector<double> targets(p * c, 0.0);
  std::vector<std::size_t> rows;
  std::vector<Box> box_targets;
  for (const auto& [i, j] : assignment) {
    targets[i * c + gt_columns[j]] = 1.0;
    rows.push_back(i);
    box_targets.push_back(gt_boxes[j]);
  }
  const double missed = static_cast<double>(g - assignment.size());
  const double miss_penalty =
      weights.w_class * focal.alpha * std::log(2.0) * std::pow(0.5, focal.gamma);
  GroundingResult r = assemble(pred_boxes, logits, targets, rows, box_targets,
                               norm, missed * miss_penalty / norm, weights, focal);
  r.assignment = std::move(assignment);
  return r;
}

GroundingResult denoising_loss(const Tensor& pred_boxes, const Tensor& logits,
                               const std::vector<NoisePoint>& points,
                               const std::vector<Box>& gt_boxes,
                               const std::vector<std::size_t>& gt_columns,
                               const CostWeights& weights,
                               const FocalParams& focal) {
  const std::size_t q = pred_boxes.dim(0);
  if (points.size() != q || logits.dim(0) != q)
    throw ShapeError("denoising_loss: " + std::to_string(points.size()) +
                     " points for " + std::to_string(q) + " predictions");
  if (q == 0) return {Tensor::scalar(0.0), {}, {}};
  const std::size_t c = logits.dim(1);
  std::vector<double> targets(q * c, 0.0);
  std::vector<std::size_t> rows;
  std::vector<Box> box_targets;
  for (std::size_t i = 0; i < q; ++i) {
    const NoisePoint& pt = points[i];
    if (pt.source_box_index >= gt_boxes.size())
      throw ConsistencyError("denoising point cites missing box " +
                             std::to_string(pt.source_box_index));
    if (pt.polarity == Polarity::negative) continue;
    const std::size_t col = gt_columns.at(pt.source_box_index);
    if (col >= c) throw ConsistencyError("denoising label column out of range");
    targets[i * c + col] = 1.0;
    rows.push_back(i);
    box_targets.push_back(gt_boxes[pt.source_box_index]);
  }
  const double norm = std::max<double>(1.0, static_cast<double>(rows.size()));
  return assemble(pred_boxes, logits, targets, rows, box_targets, norm, 0.0,
                  weights, focal);
}

LossReport total_loss(const LossInputs& in) {
  LossReport r;
  r.terms = in.terms;
  const bool use_general = in.grounding_general.defined() &&
                           (!in.general_empty || in.include_empty_general);
  Tensor total;
  r.grounding_specific = in.grounding_specific.defined() ? in.grounding_specific.item() : 0.0;
  if (use_general) {
    r.grounding_general = in.grounding_general.item();
    total = scale(add(in.grounding_general, in.grounding_specific), 0.5);
  } else {
    if (in.grounding_general.defined()) r.grounding_general = in.grounding_general.item();
    total = in.grounding_specific.defined() ? in.grounding_specific
                                            : Tensor::scalar(0.0);
  }
  if (in.generation_hook) {
    r.generation = in.generation_hook(in.gt_captions, in.predicted_captions);
    total = add_scalar(total, r.generation);
  }
  if (in.denoising.defined()) {
    r.denoising = in.denoising.item();
    total = add(total, scale(in.denoising, in.dn_weight));
  }
  r.total_tensor = total;
  r.total = total.item();
  return r;
}

}  // namespace owqf
