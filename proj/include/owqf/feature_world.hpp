#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "owqf/attention.hpp"
#include "owqf/geometry.hpp"

namespace owqf {

enum class Bucket { rare, common, frequent };

const char* bucket_name(Bucket b);
Bucket parse_bucket(const std::string& s);

struct Category {
  std::size_t id = 0;
  std::string name;
  Bucket bucket = Bucket::frequent;
  std::uint64_t embedding_seed = 0;
  std::vector<double> embedding;  // unit norm, length d_text
};

// Frozen synthetic vocabulary: one fixed random unit embedding per category.
struct CategoryTable {
  std::vector<Category> categories;
  std::size_t d_text = 0;

  // Ids are assigned rare first, then common, then frequent.
  static CategoryTable make(const std::array<std::size_t, 3>& bucket_counts,
                            std::size_t d_text, std::uint64_t seed);
  static std::vector<double> embedding_for(std::uint64_t embedding_seed,
                                           std::size_t d_text);

  std::size_t size() const { return categories.size(); }
  // Rows follow `ids`; all categories when ids is empty.
  Tensor embeddings(const std::vector<std::size_t>& ids) const;
  Tensor embeddings() const;
};

// Bucket draw probabilities (rare, common, frequent).
struct CategoryMix {
  double rare = 0.1;
  double common = 0.3;
  double frequent = 0.6;
};

struct Scene {
  std::size_t image_id = 0;
  std::uint64_t seed = 0;
  std::vector<Box> gt_boxes;
  std::vector<std::size_t> gt_labels;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Boxes lie fully inside the unit square with sides in [0.1, 0.35]; a new box
// is rejected when its IoU with an earlier one exceeds 0.2 or the centers are
// closer than 0.12, so a crowded draw may return fewer than n_objects.
Scene generate_scene(std::uint64_t seed, std::size_t n_objects,
                     const CategoryMix& mix, const CategoryTable& table);

struct FeaturePyramid {
  std::vector<Tensor> levels;  // each [h, w, d]
  std::size_t dim = 0;

  std::size_t height(std::size_t l) const { return levels[l].dim(0); }
  std::size_t width(std::size_t l) const { return levels[l].dim(1); }
  std::size_t token_count() const;
  // All cells of all levels flattened to [T, d], finest level first.
  Tensor tokens() const;
  // Cell rectangles matching tokens() row order.
  std::vector<Box> token_cells() const;
};

struct WorldSpec {
  std::size_t dim = 32;
  std::size_t levels = 2;
  std::size_t base_grid = 16;
  double noise = 0.1;
  std::uint64_t basis_seed = 0;
};

// Signal-injection renderer standing in for an image backbone. Each object
// adds a Gaussian window, centered on the object and scaled by its extents,
// times a signal made of the projected category embedding, an objectness
// direction, and geometry directions encoding the offset to the center and
// the log box size.
class FeatureWorld {
 public:
  FeatureWorld(const WorldSpec& spec, const CategoryTable& table);

  const WorldSpec& spec() const { return spec_; }
  FeaturePyramid render(const Scene& scene) const;
  // Signal vector (before windowing) of label at a normalized offset.
  std::vector<double> signal(std::size_t label, double dx_norm, double dy_norm,
                             double w, double h) const;

 private:
  WorldSpec spec_;
  std::size_t d_text_ = 0;
  std::vector<std::vector<double>> projected_;  // per category, length dim
  std::vector<double> objectness_, offset_x_, offset_y_, size_w_, size_h_;
};

namespace render_kernels {

struct Object {
  double cx, cy, sx, sy, w, h;
  std::size_t label;
};

// Adds every object's windowed signal into grid [h, w, d].
void add_signal_serial(const FeatureWorld& world,
                       const std::vector<Object>& objects, std::size_t height,
                       std::size_t width, std::span<double> grid);
void add_signal_omp(const FeatureWorld& world,
                    const std::vector<Object>& objects, std::size_t height,
                    std::size_t width, std::span<double> grid);

}  // namespace render_kernels

}  // namespace owqf
