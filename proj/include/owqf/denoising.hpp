#pragma once

#include <cstdint>
#include <vector>

#include "owqf/attention.hpp"
#include "owqf/geometry.hpp"

namespace owqf {

struct DenoisingConfig {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  std::size_t groups_per_image = 3;
  std::uint64_t seed = 0;

  // Throws ConfigError unless 0 <= lambda1 <= lambda2 and groups > 0.
  void validate() const;
};

enum class Polarity { positive, negative };

struct NoisePoint {
  double x = 0.0;
  double y = 0.0;
  Polarity polarity = Polarity::positive;
  std::size_t source_box_index = 0;
  std::size_t group = 0;
  double score = 0.0;
};

// For every group and every ground-truth box, one positive point with
// |dx| < l1*w/2, |dy| < l1*h/2 and one negative point with
// l1*w/2 < |dx| < l2*w/2 (same for y), offsets uniform and relative to the
// box center, coordinates clamped into [0, 1]. When l1 == l2 the negative
// offsets sit exactly on l1*extent/2 with a random sign. Output is ordered
// group-major, then box, positive before negative.
std::vector<NoisePoint> sample_group(const std::vector<Box>& gt_boxes,
                                     const DenoisingConfig& cfg, Rng& rng);

// Square mask over [denoising groups | general | specific]; true blocks the
// (row attends to column) pair.
struct SquareMask {
  std::size_t size = 0;
  std::vector<bool> blocked;

  bool at(std::size_t row, std::size_t col) const {
    return blocked[row * size + col];
  }
  std::size_t count_blocked() const;
};

SquareMask denoising_attention_mask(std::size_t n_general,
                                    std::size_t n_specific,
                                    const std::vector<std::size_t>& group_sizes);

}  // namespace owqf
