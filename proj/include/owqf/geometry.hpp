#pragma once

#include <array>
#include <vector>

#include "owqf/tensor.hpp"

namespace owqf {

inline constexpr double kMinBoxSide = 1e-4;
inline constexpr double kLogitEps = 1e-5;

// Normalized center-size box.
struct Box {
  double cx = 0.5;
  double cy = 0.5;
  double w = kMinBoxSide;
  double h = kMinBoxSide;

  // Clamps the center into [0, 1] and the sides into [kMinBoxSide, 1].
  static Box make(double cx, double cy, double w, double h);
  static Box from_corners(double x1, double y1, double x2, double y2);

  std::array<double, 4> corners() const;
  double area() const { return w * h; }
  bool contains(double x, double y) const;

  friend bool operator==(const Box&, const Box&) = default;
};

// Offsets added in inverse-sigmoid space.
struct BoxDelta {
  double dcx = 0.0;
  double dcy = 0.0;
  double dw = 0.0;
  double dh = 0.0;
};

double iou(const Box& a, const Box& b);
double giou(const Box& a, const Box& b);

double logit(double p, double eps = kLogitEps);
double sigmoid(double x);

// Box update b <- b + d in logit space, then clamped. Throws NumericError on a
// non-finite delta.
Box apply_delta(const Box& b, const BoxDelta& d);

// Row-wise tensor form used inside the decoder: boxes [n, 4] are constants,
// deltas [n, 4] carry gradient. Sides are clamped at kMinBoxSide.
Tensor apply_delta(const Tensor& boxes, const Tensor& deltas);

Tensor boxes_to_tensor(const std::vector<Box>& boxes);
std::vector<Box> tensor_to_boxes(const Tensor& t);

}  // namespace owqf
