#include "owqf/denoising.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace owqf {

void DenoisingConfig::validate() const {
  if (!(lambda1 >= 0.0))
    throw ConfigError("dn.lambda1 must be nonnegative");
  if (!(lambda2 >= lambda1))
    throw ConfigError("dn.lambda2 (" + std::to_string(lambda2) +
                      ") must not be smaller than dn.lambda1 (" +
                      std::to_string(lambda1) + ")");
  if (groups_per_image == 0) throw ConfigError("dn.groups must be positive");
}

namespace {

// Uniform on the open interval (0, 1).
double open_unit(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double u = dist(rng);
  while (u == 0.0) u = dist(rng);
  return u;
}

double sign(Rng& rng) {
  return std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
}

double positive_offset(double half, double l1, Rng& rng) {
  return (2.0 * open_unit(rng) - 1.0) * l1 * half;
}

double negative_offset(double half, double l1, double l2, Rng& rng) {
  const double s = sign(rng);
  if (l2 == l1) return s * l1 * half;
  return s * (l1 + open_unit(rng) * (l2 - l1)) * half;
}

}  // namespace

std::vector<NoisePoint> sample_group(const std::vector<Box>& gt_boxes,
                                     const DenoisingConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<NoisePoint> out;
  out.reserve(cfg.groups_per_image * gt_boxes.size() * 2);
  for (std::size_t g = 0; g < cfg.groups_per_image; ++g) {
    for (std::size_t i = 0; i < gt_boxes.size(); ++i) {
      const Box& b = gt_boxes[i];
      const double hw = 0.5 * b.w, hh = 0.5 * b.h;
      NoisePoint pos;
      pos.x = std::clamp(b.cx + positive_offset(hw, cfg.lambda1, rng), 0.0, 1.0);
      pos.y = std::clamp(b.cy + positive_offset(hh, cfg.lambda1, rng), 0.0, 1.0);
      pos.polarity = Polarity::positive;
      pos.source_box_index = i;
      pos.group = g;
      out.push_back(pos);

      NoisePoint neg;
      neg.x = std::clamp(
          b.cx + negative_offset(hw, cfg.lambda1, cfg.lambda2, rng), 0.0, 1.0);
      neg.y = std::clamp(
          b.cy + negative_offset(hh, cfg.lambda1, cfg.lambda2, rng), 0.0, 1.0);
      neg.polarity = Polarity::negative;
      neg.source_box_index = i;
      neg.group = g;
      out.push_back(neg);
    }
  }
  return out;
}

std::size_t SquareMask::count_blocked() const {
  return static_cast<std::size_t>(
      std::count(blocked.begin(), blocked.end(), true));
}

SquareMask denoising_attention_mask(
    std::size_t n_general, std::size_t n_specific,
    const std::vector<std::size_t>& group_sizes) {
  const std::size_t n_dn =
      std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0});
  SquareMask mask;
  mask.size = n_dn + n_general + n_specific;
  mask.blocked.assign(mask.size * mask.size, false);

  std::vector<std::size_t> group_of(n_dn);
  std::size_t offset = 0;
  for (std::size_t g = 0; g < group_sizes.size(); ++g) {
    std::fill_n(group_of.begin() + offset, group_sizes[g], g);
    offset += group_sizes[g];
  }
  for (std::size_t i = 0; i < mask.size; ++i) {
    for (std::size_t j = 0; j < n_dn; ++j) {
      const bool row_is_dn = i < n_dn;
      mask.blocked[i * mask.size + j] =
          row_is_dn ? group_of[i] != group_of[j] : true;
    }
  }
  return mask;
}

}  // namespace owqf
