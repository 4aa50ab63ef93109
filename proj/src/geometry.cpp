#include "owqf/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace owqf {

Box Box::make(double cx, double cy, double w, double h) {
  return {std::clamp(cx, 0.0, 1.0), std::clamp(cy, 0.0, 1.0),
          std::clamp(w, kMinBoxSide, 1.0), std::clamp(h, kMinBoxSide, 1.0)};
}

Box Box::from_corners(double x1, double y1, double x2, double y2) {
  return make(0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1);
}

std::array<double, 4> Box::corners() const {
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

bool Box::contains(double x, double y) const {
  return std::abs(x - cx) < 0.5 * w && std::abs(y - cy) < 0.5 * h;
}

namespace {

struct Overlap {
  double inter;
  double uni;
  double enclosing;
};

Overlap overlap(const Box& a, const Box& b) {
  const auto [ax1, ay1, ax2, ay2] = a.corners();
  const auto [bx1, by1, bx2, by2] = b.corners();
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  const double ew = std::max(ax2, bx2) - std::min(ax1, bx1);
  const double eh = std::max(ay2, by2) - std::min(ay1, by1);
  return {inter, uni, ew * eh};
}

}  // namespace

double iou(const Box& a, const Box& b) {
  const Overlap o = overlap(a, b);
  return o.uni > 0 ? o.inter / o.uni : 0.0;
}

double giou(const Box& a, const Box& b) {
  const Overlap o = overlap(a, b);
  const double i = o.uni > 0 ? o.inter / o.uni : 0.0;
  return i - (o.enclosing - o.uni) / o.enclosing;
}

double logit(double p, double eps) {
  const double c = std::clamp(p, eps, 1.0 - eps);
  return std::log(c / (1.0 - c));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Box apply_delta(const Box& b, const BoxDelta& d) {
  if (!std::isfinite(d.dcx) || !std::isfinite(d.dcy) || !std::isfinite(d.dw) ||
      !std::isfinite(d.dh))
    throw NumericError("apply_delta: non-finite box delta");
  return Box::make(sigmoid(logit(b.cx) + d.dcx), sigmoid(logit(b.cy) + d.dcy),
                   sigmoid(logit(b.w) + d.dw), sigmoid(logit(b.h) + d.dh));
}

Tensor apply_delta(const Tensor& boxes, const Tensor& deltas) {
  if (boxes.shape() != deltas.shape() || boxes.rank() != 2 ||
      boxes.dim(1) != 4)
    throw ShapeError("apply_delta: boxes " + to_string(boxes.shape()) +
                     " vs deltas " + to_string(deltas.shape()));
  for (double v : deltas.data())
    if (!std::isfinite(v)) throw NumericError("apply_delta: non-finite delta");
  const std::size_t n = boxes.dim(0);
  if (n == 0) return boxes.detach();
  const Tensor moved =
      sigmoid(add(inverse_sigmoid(boxes.detach(), kLogitEps), deltas));
  const Tensor centers = slice_cols(moved, 0, 2);
  const Tensor sides = clamp(slice_cols(moved, 2, 4), kMinBoxSide, 1.0);
  return concat_cols({centers, sides});
}

Tensor boxes_to_tensor(const std::vector<Box>& boxes) {
  std::vector<double> v;
  v.reserve(boxes.size() * 4);
  for (const Box& b : boxes) v.insert(v.end(), {b.cx, b.cy, b.w, b.h});
  return Tensor::from({boxes.size(), 4}, std::move(v));
}

std::vector<Box> tensor_to_boxes(const Tensor& t) {
  std::vector<Box> out;
  const auto v = t.data();
  for (std::size_t i = 0; i + 3 < v.size(); i += 4)
    out.push_back(Box::make(v[i], v[i + 1], v[i + 2], v[i + 3]));
  return out;
}

}  // namespace owqf
