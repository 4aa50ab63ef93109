#include "owqf/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace owqf {

std::vector<double> EvalConfig::default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

const char* mode_name(EvalMode m) {
  return m == EvalMode::open_set ? "open-set" : "open-ended";
}

EvalMode parse_mode(const std::string& s) {
  if (s == "open-set") return EvalMode::open_set;
  if (s == "open-ended") return EvalMode::open_ended;
  throw ConfigError("unknown mode '" + s + "' (expected open-set or open-ended)");
}

double class_ap(const std::vector<Detection>& dets,
                const std::vector<GroundTruth>& gts,
                const std::vector<double>& thresholds) {
  if (gts.empty() || thresholds.empty()) return 0.0;
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  std::map<std::size_t, std::vector<std::size_t>> gt_by_image;
  for (std::size_t j = 0; j < gts.size(); ++j) gt_by_image[gts[j].image_id].push_back(j);

  const double n_gt = static_cast<double>(gts.size());
  double total = 0.0;
  std::vector<char> taken(gts.size());
  std::vector<double> precision, recall;
  for (double thr : thresholds) {
    std::fill(taken.begin(), taken.end(), 0);
    precision.clear();
    recall.clear();
    double tp = 0.0, fp = 0.0;
    for (std::size_t k : order) {
      const Detection& d = dets[k];
      std::size_t best = gts.size();
      double best_iou = thr;
      if (auto it = gt_by_image.find(d.image_id); it != gt_by_image.end())
        for (std::size_t j : it->second) {
          if (taken[j]) continue;
          const double o = iou(d.box, gts[j].box);
          if (o >= best_iou) {
            if (best == gts.size() || o > best_iou) {
              best = j;
              best_iou = o;
            }
          }
        }
      if (best < gts.size()) {
        taken[best] = 1;
        tp += 1.0;
      } else {
        fp += 1.0;
      }
      precision.push_back(tp / (tp + fp));
      recall.push_back(tp / n_gt);
    }
    for (std::size_t i = precision.size(); i-- > 1;)
      precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double sum = 0.0;
    for (int r = 0; r <= 100; ++r) {
      const double level = r / 100.0;
      const auto it = std::lower_bound(recall.begin(), recall.end(), level);
      if (it != recall.end()) sum += precision[it - recall.begin()];
    }
    total += sum / 101.0;
  }
  return total / static_cast<double>(thresholds.size());
}

EvalReport fixed_ap(const std::vector<Detection>& dets,
                    const std::vector<GroundTruth>& gts,
                    const CategoryTable& table, const EvalConfig& cfg) {
  const std::size_t n_cat = table.size();
  std::vector<std::vector<Detection>> det_by_class(n_cat);
  std::vector<std::vector<GroundTruth>> gt_by_class(n_cat);
  for (const Detection& d : dets) {
    if (d.label >= n_cat)
      throw ConsistencyError("detection label " + std::to_string(d.label) +
                             " is not in the category table");
    if (!std::isfinite(d.score)) throw NumericError("non-finite detection score");
    det_by_class[d.label].push_back(d);
  }
  for (const GroundTruth& g : gts) {
    if (g.label >= n_cat)
      throw ConsistencyError("ground-truth label " + std::to_string(g.label) +
                             " is not in the category table");
    gt_by_class[g.label].push_back(g);
  }

  EvalReport report;
  report.per_category.resize(n_cat);
  auto run = [&](std::size_t c) {
    auto& cd = det_by_class[c];
    std::stable_sort(cd.begin(), cd.end(), [](const Detection& a, const Detection& b) {
      return a.score > b.score;
    });
    if (cd.size() > cfg.per_class_cap) cd.resize(cfg.per_class_cap);
    CategoryAp& out = report.per_category[c];
    out.id = c;
    out.bucket = table.categories[c].bucket;
    out.n_gt = gt_by_class[c].size();
    out.n_det = cd.size();
    out.ap = out.n_gt > 0 ? class_ap(cd, gt_by_class[c], cfg.iou_thresholds) : -1.0;
  };
  const auto n = static_cast<long>(n_cat);
  if (cfg.parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long c = 0; c < n; ++c) run(static_cast<std::size_t>(c));
  } else {
    for (long c = 0; c < n; ++c) run(static_cast<std::size_t>(c));
  }

  double sum_all = 0.0, count_all = 0.0;
  double sum[3] = {0.0, 0.0, 0.0}, count[3] = {0.0, 0.0, 0.0};
  for (const CategoryAp& c : report.per_category) {
    if (c.n_gt == 0) continue;
    const auto b = static_cast<int>(c.bucket);
    sum[b] += c.ap;
    count[b] += 1.0;
    sum_all += c.ap;
    count_all += 1.0;
  }
  report.ap = count_all > 0.0 ? sum_all / count_all : 0.0;
  report.ap_r = count[0] > 0.0 ? sum[0] / count[0] : -1.0;
  report.ap_c = count[1] > 0.0 ? sum[1] / count[1] : -1.0;
  report.ap_f = count[2] > 0.0 ? sum[2] / count[2] : -1.0;
  return report;
}

std::vector<Detection> open_ended_map(std::vector<Detection> dets,
                                      const CategoryTable& table) {
  if (table.size() == 0) throw ConfigError("open-ended mapping needs a category table");
  std::vector<double> cat_norm(table.size());
  for (std::size_t c = 0; c < table.size(); ++c) {
    double s = 0.0;
    for (double v : table.categories[c].embedding) s += v * v;
    cat_norm[c] = std::sqrt(s);
    if (cat_norm[c] == 0.0) throw NumericError("zero-norm category embedding");
  }
  for (Detection& d : dets) {
    if (d.embedding.size() != table.d_text)
      throw ShapeError("detection embedding has length " +
                       std::to_string(d.embedding.size()) + ", expected " +
                       std::to_string(table.d_text));
    double dn = 0.0;
    for (double v : d.embedding) dn += v * v;
    dn = std::sqrt(dn);
    if (!(dn > 0.0) || !std::isfinite(dn))
      throw NumericError("cannot map a zero-norm detection embedding");
    double best = -2.0;
    std::size_t arg = 0;
    for (std::size_t c = 0; c < table.size(); ++c) {
      const auto& e = table.categories[c].embedding;
      double dot = 0.0;
      for (std::size_t i = 0; i < e.size(); ++i) dot += e[i] * d.embedding[i];
      const double sim = dot / (dn * cat_norm[c]);
      if (sim > best) {
        best = sim;
        arg = c;
      }
    }
    d.label = arg;
    d.similarity = best;
  }
  return dets;
}

ModeRoute route_mode(std::optional<EvalMode> requested,
                     const std::vector<std::size_t>& category_list) {
  if (!requested)
    return {category_list.empty() ? EvalMode::open_ended : EvalMode::open_set, false};
  if (*requested == EvalMode::open_set && category_list.empty())
    throw ConfigError(
        "open-set evaluation needs a nonempty category list; pass "
        "--category-list or use --mode open-ended");
  return {*requested, *requested == EvalMode::open_ended && !category_list.empty()};
}

}  // namespace owqf
