#include "owqf/feature_world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <omp.h>

namespace owqf {

namespace {

constexpr double kCategoryAmp = 1.75;
constexpr double kObjectnessAmp = 0.75;
constexpr double kGeometryAmp = 0.75;
constexpr double kSizeReference = 0.15;
constexpr double kMinWindowCells = 0.75;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<double> random_unit(Rng& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

const char* bucket_name(Bucket b) {
  switch (b) {
    case Bucket::rare: return "r";
    case Bucket::common: return "c";
    case Bucket::frequent: return "f";
  }
  return "f";
}

Bucket parse_bucket(const std::string& s) {
  if (s == "r" || s == "rare") return Bucket::rare;
  if (s == "c" || s == "common") return Bucket::common;
  if (s == "f" || s == "frequent") return Bucket::frequent;
  throw std::invalid_argument("unknown frequency bucket '" + s + "'");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL));
}

std::vector<double> CategoryTable::embedding_for(std::uint64_t embedding_seed,
                                                 std::size_t d_text) {
  Rng rng(embedding_seed);
  return random_unit(rng, d_text);
}

CategoryTable CategoryTable::make(const std::array<std::size_t, 3>& counts,
                                  std::size_t d_text, std::uint64_t seed) {
  CategoryTable table;
  table.d_text = d_text;
  const Bucket order[3] = {Bucket::rare, Bucket::common, Bucket::frequent};
  std::size_t id = 0;
  for (int b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < counts[b]; ++i, ++id) {
      Category c;
      c.id = id;
      c.name = "cat_" + std::to_string(id);
      c.bucket = order[b];
      c.embedding_seed = mix_seed(seed, 1000 + id);
      c.embedding = embedding_for(c.embedding_seed, d_text);
      table.categories.push_back(std::move(c));
    }
  }
  return table;
}

Tensor CategoryTable::embeddings(const std::vector<std::size_t>& ids) const {
  std::vector<double> v;
  v.reserve(ids.size() * d_text);
  for (std::size_t id : ids) {
    if (id >= categories.size())
      throw ConsistencyError("unknown category id " + std::to_string(id));
    const auto& e = categories[id].embedding;
    v.insert(v.end(), e.begin(), e.end());
  }
  return Tensor::from({ids.size(), d_text}, std::move(v));
}

Tensor CategoryTable::embeddings() const {
  std::vector<std::size_t> ids(categories.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return embeddings(ids);
}

Scene generate_scene(std::uint64_t seed, std::size_t n_objects,
                     const CategoryMix& mix, const CategoryTable& table) {
  Scene scene;
  scene.seed = seed;
  Rng rng(seed);
  std::vector<std::size_t> by_bucket[3];
  for (const auto& c : table.categories)
    by_bucket[static_cast<int>(c.bucket)].push_back(c.id);
  double weights[3] = {by_bucket[0].empty() ? 0.0 : mix.rare,
                       by_bucket[1].empty() ? 0.0 : mix.common,
                       by_bucket[2].empty() ? 0.0 : mix.frequent};
  if (weights[0] + weights[1] + weights[2] <= 0.0) return scene;
  std::discrete_distribution<int> bucket_draw(weights, weights + 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t n = 0; n < n_objects; ++n) {
    const int b = bucket_draw(rng);
    const auto& pool = by_bucket[b];
    const std::size_t label =
        pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double w = 0.1 + 0.25 * unit(rng);
      const double h = 0.1 + 0.25 * unit(rng);
      const double cx = 0.5 * w + (1.0 - w) * unit(rng);
      const double cy = 0.5 * h + (1.0 - h) * unit(rng);
      const Box box = Box::make(cx, cy, w, h);
      bool ok = true;
      for (const Box& other : scene.gt_boxes) {
        const double dist = std::hypot(box.cx - other.cx, box.cy - other.cy);
        if (iou(box, other) > 0.2 || dist < 0.12) {
          ok = false;
          break;
        }
      }
      if (ok) {
        scene.gt_boxes.push_back(box);
        scene.gt_labels.push_back(label);
        break;
      }
    }
  }
  return scene;
}

std::size_t FeaturePyramid::token_count() const {
  std::size_t n = 0;
  for (const auto& l : levels) n += l.dim(0) * l.dim(1);
  return n;
}

Tensor FeaturePyramid::tokens() const {
  std::vector<double> v;
  v.reserve(token_count() * dim);
  for (const auto& l : levels) v.insert(v.end(), l.data().begin(), l.data().end());
  return Tensor::from({token_count(), dim}, std::move(v));
}

std::vector<Box> FeaturePyramid::token_cells() const {
  std::vector<Box> cells;
  cells.reserve(token_count());
  for (const auto& l : levels) {
    const std::size_t h = l.dim(0), w = l.dim(1);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c)
        cells.push_back(Box::make((c + 0.5) / w, (r + 0.5) / h, 1.0 / w, 1.0 / h));
  }
  return cells;
}

FeatureWorld::FeatureWorld(const WorldSpec& spec, const CategoryTable& table)
    : spec_(spec), d_text_(table.d_text) {
  if (spec.levels < 2) throw ConfigError("feature pyramid needs at least 2 levels");
  if ((spec.base_grid >> (spec.levels - 1)) < 2)
    throw ConfigError("base grid too small for the requested levels");
  Rng rng(mix_seed(spec.basis_seed, 77));
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(spec.dim));
  std::vector<double> projection(spec.dim * d_text_);
  for (double& x : projection) x = normal(rng);
  for (const auto& c : table.categories) {
    std::vector<double> p(spec.dim, 0.0);
    for (std::size_t i = 0; i < spec.dim; ++i)
      for (std::size_t j = 0; j < d_text_; ++j)
        p[i] += projection[i * d_text_ + j] * c.embedding[j];
    projected_.push_back(std::move(p));
  }
  objectness_ = random_unit(rng, spec.dim);
  offset_x_ = random_unit(rng, spec.dim);
  offset_y_ = random_unit(rng, spec.dim);
  size_w_ = random_unit(rng, spec.dim);
  size_h_ = random_unit(rng, spec.dim);
}

std::vector<double> FeatureWorld::signal(std::size_t label, double dx_norm,
                                         double dy_norm, double w,
                                         double h) const {
  const double lw = std::log(w / kSizeReference);
  const double lh = std::log(h / kSizeReference);
  std::vector<double> s(spec_.dim);
  const auto& p = projected_.at(label);
  for (std::size_t i = 0; i < spec_.dim; ++i)
    s[i] = kCategoryAmp * p[i] + kObjectnessAmp * objectness_[i] +
           kGeometryAmp * (dx_norm * offset_x_[i] + dy_norm * offset_y_[i] +
                           lw * size_w_[i] + lh * size_h_[i]);
  return s;
}

namespace render_kernels {

namespace {

void add_cell(const FeatureWorld& world, const std::vector<Object>& objects,
              std::size_t height, std::size_t width, std::size_t r,
              std::size_t c, double* out) {
  const double u = (c + 0.5) / static_cast<double>(width);
  const double v = (r + 0.5) / static_cast<double>(height);
  const std::size_t d = world.spec().dim;
  for (const Object& o : objects) {
    const double ex = (u - o.cx) / o.sx, ey = (v - o.cy) / o.sy;
    const double window = std::exp(-0.5 * (ex * ex + ey * ey));
    if (window < 1e-6) continue;
    const double dx = std::clamp((u - o.cx) / (0.5 * o.w), -1.5, 1.5);
    const double dy = std::clamp((v - o.cy) / (0.5 * o.h), -1.5, 1.5);
    const auto s = world.signal(o.label, dx, dy, o.w, o.h);
    for (std::size_t i = 0; i < d; ++i) out[i] += window * s[i];
  }
}

}  // namespace

void add_signal_serial(const FeatureWorld& world,
                       const std::vector<Object>& objects, std::size_t height,
                       std::size_t width, std::span<double> grid) {
  const std::size_t d = world.spec().dim;
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c)
      add_cell(world, objects, height, width, r, c,
               grid.data() + (r * width + c) * d);
}

void add_signal_omp(const FeatureWorld& world,
                    const std::vector<Object>& objects, std::size_t height,
                    std::size_t width, std::span<double> grid) {
  const std::size_t d = world.spec().dim;
  const auto cells = static_cast<std::ptrdiff_t>(height * width);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < cells; ++idx) {
    const auto cell = static_cast<std::size_t>(idx);
    add_cell(world, objects, height, width, cell / width, cell % width,
             grid.data() + cell * d);
  }
}

}  // namespace render_kernels

FeaturePyramid FeatureWorld::render(const Scene& scene) const {
  FeaturePyramid fp;
  fp.dim = spec_.dim;
  Rng rng(mix_seed(scene.seed, 4242));
  std::normal_distribution<double> noise(0.0, spec_.noise);
  for (std::size_t l = 0; l < spec_.levels; ++l) {
    const std::size_t g = spec_.base_grid >> l;
    std::vector<double> grid(g * g * spec_.dim);
    for (double& x : grid) x = noise(rng);
    const double cell = 1.0 / static_cast<double>(g);
    std::vector<render_kernels::Object> objects;
    for (std::size_t i = 0; i < scene.gt_boxes.size(); ++i) {
      const Box& b = scene.gt_boxes[i];
      const double sx = std::hypot(0.3 * b.w, kMinWindowCells * cell);
      const double sy = std::hypot(0.3 * b.h, kMinWindowCells * cell);
      objects.push_back({b.cx, b.cy, sx, sy, b.w, b.h, scene.gt_labels[i]});
    }
    if (g * g * spec_.dim * std::max<std::size_t>(objects.size(), 1) >= (1u << 16) &&
        omp_get_max_threads() > 1)
      render_kernels::add_signal_omp(*this, objects, g, g, grid);
    else
      render_kernels::add_signal_serial(*this, objects, g, g, grid);
    fp.levels.push_back(Tensor::from({g, g, spec_.dim}, std::move(grid)));
  }
  return fp;
}

}  // namespace owqf
