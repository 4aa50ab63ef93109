#pragma once

// Shared fixtures and independent reference implementations for the unit and
// acceptance suites. Nothing here calls into the code under test except to
// build inputs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "owqf/attention.hpp"
#include "owqf/geometry.hpp"
#include "owqf/tensor.hpp"

namespace owqf::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Values with magnitude in [lo, hi] and random sign, away from kinks at 0.
inline Tensor away_from_zero(Shape shape, Rng& rng, double lo = 0.2, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = sign(rng) ? u(rng) : -u(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

// sum(f * w) with fixed random weights so upstream gradients are nontrivial.
inline Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(t, random_tensor(t.shape(), rng, -1.0, 1.0, false)));
}

inline Box random_box(Rng& rng, double min_side = 0.05, double max_side = 0.5) {
  std::uniform_real_distribution<double> side(min_side, max_side);
  const double w = side(rng), h = side(rng);
  std::uniform_real_distribution<double> cx(w / 2, 1 - w / 2), cy(h / 2, 1 - h / 2);
  return {cx(rng), cy(rng), w, h};
}

// --- reference oracles -------------------------------------------------------

inline double ref_iou(const Box& a, const Box& b) {
  const double ax1 = a.cx - a.w / 2, ax2 = a.cx + a.w / 2;
  const double ay1 = a.cy - a.h / 2, ay2 = a.cy + a.h / 2;
  const double bx1 = b.cx - b.w / 2, bx2 = b.cx + b.w / 2;
  const double by1 = b.cy - b.h / 2, by2 = b.cy + b.h / 2;
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

inline double ref_giou(const Box& a, const Box& b) {
  const double ax1 = a.cx - a.w / 2, ax2 = a.cx + a.w / 2;
  const double ay1 = a.cy - a.h / 2, ay2 = a.cy + a.h / 2;
  const double bx1 = b.cx - b.w / 2, bx2 = b.cx + b.w / 2;
  const double by1 = b.cy - b.h / 2, by2 = b.cy + b.h / 2;
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  const double enc = (std::max(ax2, bx2) - std::min(ax1, bx1)) *
                     (std::max(ay2, by2) - std::min(ay1, by1));
  return inter / uni - (enc - uni) / enc;
}

// Minimum over all injections of the smaller side into the larger one.
inline double brute_force_min_cost(const std::vector<double>& cost, std::size_t rows,
                                   std::size_t cols) {
  const bool flip = rows > cols;
  const std::size_t small = flip ? cols : rows, large = flip ? rows : cols;
  auto at = [&](std::size_t s, std::size_t l) {
    return flip ? cost[l * cols + s] : cost[s * cols + l];
  };
  std::vector<std::size_t> perm(large);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t s = 0; s < small; ++s) c += at(s, perm[s]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Bilinear sample of a [H, W, C] grid with cell centers at (j + 0.5) / W and
// border clamping, one channel at a time.
inline double ref_bilinear(const std::vector<double>& grid, std::size_t h,
                           std::size_t w, std::size_t channels, std::size_t ch,
                           double x, double y) {
  auto clampi = [](double v, double hi) { return std::min(std::max(v, 0.0), hi); };
  const double u = clampi(x * w - 0.5, static_cast<double>(w - 1));
  const double v = clampi(y * h - 0.5, static_cast<double>(h - 1));
  const auto c0 = static_cast<std::size_t>(std::floor(u));
  const auto r0 = static_cast<std::size_t>(std::floor(v));
  const std::size_t c1 = std::min(c0 + 1, w - 1), r1 = std::min(r0 + 1, h - 1);
  const double fu = u - c0, fv = v - r0;
  auto g = [&](std::size_t r, std::size_t c) { return grid[(r * w + c) * channels + ch]; };
  return (1 - fv) * ((1 - fu) * g(r0, c0) + fu * g(r0, c1)) +
         fv * ((1 - fu) * g(r1, c0) + fu * g(r1, c1));
}

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double ref_focal(double logit, double target, double alpha, double gamma) {
  const double p = ref_sigmoid(logit);
  const double ce = target > 0.5 ? -std::log(p) : -std::log(1.0 - p);
  const double pt = target > 0.5 ? p : 1.0 - p;
  const double at = target > 0.5 ? alpha : 1.0 - alpha;
  return at * std::pow(1.0 - pt, gamma) * ce;
}


// Minimum-cost injection of rows into columns by enumeration; returns
// (row, col) pairs sorted by row. Ties keep the first permutation found.
inline std::vector<std::pair<std::size_t, std::size_t>> brute_force_assignment(
    const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
  const bool flip = rows > cols;
  const std::size_t small = flip ? cols : rows, large = flip ? rows : cols;
  std::vector<std::size_t> perm(large), best_perm;
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t s = 0; s < small; ++s)
      c += flip ? cost[perm[s] * cols + s] : cost[s * cols + perm[s]];
    if (c < best) {
      best = c;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < small; ++s)
    out.emplace_back(flip ? best_perm[s] : s, flip ? s : best_perm[s]);
  std::sort(out.begin(), out.end());
  return out;
}

struct RefLossWeights {
  double w_class = 2.0, w_l1 = 5.0, w_giou = 2.0, alpha = 0.25, gamma = 2.0;
};

inline double ref_l1(const Box& a, const Box& b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) +
         std::abs(a.h - b.h);
}

// Scalar grounding loss: brute-force matching on the documented cost, focal
// classification over every prediction and class, L1 and 1 - giou over
// matched pairs, a positive-at-logit-0 penalty per unmatched ground truth,
// everything divided by max(1, G).
inline double ref_grounding_loss(const std::vector<Box>& pred,
                                 const std::vector<double>& logits, std::size_t classes,
                                 const std::vector<Box>& gt,
                                 const std::vector<std::size_t>& labels,
                                 const RefLossWeights& w = {}) {
  const std::size_t p = pred.size(), g = gt.size();
  if (p == 0 && g == 0) return 0.0;
  std::vector<double> cost(p * g);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < g; ++j)
      cost[i * g + j] = w.w_class * (1 - ref_sigmoid(logits[i * classes + labels[j]])) +
                        w.w_l1 * ref_l1(pred[i], gt[j]) + w.w_giou * (1 - ref_giou(pred[i], gt[j]));
  const auto pairs = (p > 0 && g > 0) ? brute_force_assignment(cost, p, g)
                                      : std::vector<std::pair<std::size_t, std::size_t>>{};
  std::vector<double> target(p * classes, 0.0);
  double total = 0.0;
  for (const auto& [i, j] : pairs) {
    target[i * classes + labels[j]] = 1.0;
    total += w.w_l1 * ref_l1(pred[i], gt[j]) + w.w_giou * (1 - ref_giou(pred[i], gt[j]));
  }
  for (std::size_t k = 0; k < p * classes; ++k)
    total += w.w_class * ref_focal(logits[k], target[k], w.alpha, w.gamma);
  total += static_cast<double>(g - pairs.size()) * w.w_class *
           ref_focal(0.0, 1.0, w.alpha, w.gamma);
  return total / std::max<double>(1.0, static_cast<double>(g));
}


struct RefDet {
  std::size_t image = 0;
  Box box;
  double score = 0.0;
};

struct RefGt {
  std::size_t image = 0;
  Box box;
};

// AP of one class: rank-by-rank precision and recall from a greedy pass at
// each threshold, then for every recall level r in {0, 0.01, ..., 1} the
// best precision among ranks reaching recall r.
inline double ref_class_ap(std::vector<RefDet> dets, const std::vector<RefGt>& gts,
                           const std::vector<double>& thresholds) {
  if (gts.empty()) return -1.0;
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  double total = 0.0;
  for (double thr : thresholds) {
    std::vector<bool> used(gts.size(), false);
    std::vector<double> precision, recall;
    double tp = 0.0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const RefDet& d = dets[order[rank]];
      double best = -1.0;
      std::size_t best_j = gts.size();
      for (std::size_t j = 0; j < gts.size(); ++j) {
        if (used[j] || gts[j].image != d.image) continue;
        const double v = ref_iou(d.box, gts[j].box);
        if (v >= thr && v > best) {
          best = v;
          best_j = j;
        }
      }
      if (best_j < gts.size()) {
        used[best_j] = true;
        tp += 1.0;
      }
      precision.push_back(tp / static_cast<double>(rank + 1));
      recall.push_back(tp / static_cast<double>(gts.size()));
    }
    double sum = 0.0;
    for (int k = 0; k <= 100; ++k) {
      const double r = k / 100.0;
      double best = 0.0;
      for (std::size_t i = 0; i < precision.size(); ++i)
        if (recall[i] >= r - 1e-12) best = std::max(best, precision[i]);
      sum += best;
    }
    total += sum / 101.0;
  }
  return total / static_cast<double>(thresholds.size());
}

// Scalar multi-head attention with optional mask, one query row at a time.
inline std::vector<double> ref_attention(const std::vector<double>& q,
                                         const std::vector<double>& k,
                                         const std::vector<double>& v, std::size_t lq,
                                         std::size_t lk, std::size_t d, std::size_t heads,
                                         const std::vector<bool>& blocked,
                                         const AttentionWeights& w) {
  auto project = [&](const std::vector<double>& x, std::size_t n, const Linear& l) {
    std::vector<double> out(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < d; ++o) {
        double s = l.bias.at(o);
        for (std::size_t j = 0; j < d; ++j) s += x[i * d + j] * l.weight.at(j, o);
        out[i * d + o] = s;
      }
    return out;
  };
  const auto qp = project(q, lq, w.query), kp = project(k, lk, w.key),
             vp = project(v, lk, w.value);
  const std::size_t dh = d / heads;
  std::vector<double> ctx(lq * d, 0.0);
  std::vector<bool> dead(lq, false);
  for (std::size_t i = 0; i < lq; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < lk; ++j) any = any || blocked.empty() || !blocked[i * lk + j];
    dead[i] = !any;
    if (dead[i]) continue;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      std::vector<double> logits(lk, -std::numeric_limits<double>::infinity());
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < lk; ++j) {
        if (!blocked.empty() && blocked[i * lk + j]) continue;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qp[i * d + hd * dh + c] * kp[j * d + hd * dh + c];
        logits[j] = s / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, logits[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < lk; ++j)
        if (std::isfinite(logits[j])) z += std::exp(logits[j] - mx);
      for (std::size_t j = 0; j < lk; ++j) {
        if (!std::isfinite(logits[j])) continue;
        const double a = std::exp(logits[j] - mx) / z;
        for (std::size_t c = 0; c < dh; ++c)
          ctx[i * d + hd * dh + c] += a * vp[j * d + hd * dh + c];
      }
    }
  }
  auto out = project(ctx, lq, w.output);
  for (std::size_t i = 0; i < lq; ++i)
    if (dead[i]) std::fill_n(out.begin() + i * d, d, 0.0);
  return out;
}

}  // namespace owqf::testing
