#pragma once

#include <optional>
#include <string>
#include <vector>

#include "owqf/feature_world.hpp"

namespace owqf {

struct Detection {
  std::size_t image_id = 0;
  Box box;
  double score = 0.0;
  std::size_t label = 0;
  // Open-ended detections carry the embedding of their generated name until
  // open_ended_map resolves it; `similarity` records the match.
  std::vector<double> embedding;
  double similarity = 0.0;
};

struct GroundTruth {
  std::size_t image_id = 0;
  Box box;
  std::size_t label = 0;
};

struct EvalConfig {
  std::vector<double> iou_thresholds = default_thresholds();
  std::size_t per_class_cap = 1000;
  bool parallel = true;

  static std::vector<double> default_thresholds();
};

enum class EvalMode { open_set, open_ended };
const char* mode_name(EvalMode m);
EvalMode parse_mode(const std::string& s);

struct CategoryAp {
  std::size_t id = 0;
  Bucket bucket = Bucket::frequent;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;  // after the cap
  double ap = -1.0;       // -1 when the category has no ground truth
};

// Bucket values are -1 when no category of that bucket has ground truth.
struct EvalReport {
  EvalMode mode = EvalMode::open_set;
  double ap = 0.0;
  double ap_r = -1.0;
  double ap_c = -1.0;
  double ap_f = -1.0;
  std::vector<CategoryAp> per_category;
};

// Average precision of one class: detections (already filtered to the class)
// sorted by score with ties in input order, greedy-matched to the highest-IoU
// unmatched ground truth of the same image at each threshold, 101-point
// interpolated precision, averaged over thresholds.
double class_ap(const std::vector<Detection>& dets,
                const std::vector<GroundTruth>& gts,
                const std::vector<double>& thresholds);

// Pools detections per class across the dataset, keeps the top
// per_class_cap by score, and macro-averages per bucket. Throws
// ConsistencyError for a label outside the table.
EvalReport fixed_ap(const std::vector<Detection>& dets,
                    const std::vector<GroundTruth>& gts,
                    const CategoryTable& table, const EvalConfig& cfg = {});

// Resolves each detection's embedding to the category of highest cosine
// similarity, lowest index on ties. Throws NumericError on a zero-norm
// embedding.
std::vector<Detection> open_ended_map(std::vector<Detection> dets,
                                      const CategoryTable& table);

struct ModeRoute {
  EvalMode mode;
  bool list_ignored = false;
};

// An explicit open-set request needs a nonempty list (ConfigError otherwise);
// an explicit open-ended request ignores any list. Without a request, an
// empty list means open-ended and a nonempty one open-set.
ModeRoute route_mode(std::optional<EvalMode> requested,
                     const std::vector<std::size_t>& category_list);

}  // namespace owqf
