#include <doctest.h>

#include <cmath>

#include "owqf/prompt_simulator.hpp"
#include "support.hpp"

using namespace owqf;
using namespace owqf::testing;

namespace {

const CategoryTable& table() {
  static const CategoryTable t = CategoryTable::make({2, 4, 6}, 16, 5);
  return t;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_SUITE("prompt_simulator") {

TEST_CASE("perfect fidelity puts the aggregated argmax inside a lone object") {
  SimulatorConfig cfg;
  cfg.fidelity = 1.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Scene scene = generate_scene(s, 1, {}, table());
    const AttentionStack st = synthesize_attention(scene, table(), cfg, s + 100);
    CHECK(st.sources.size() == 1);
    const Tensor agg = aggregate_heads(st);
    const std::size_t g = cfg.grid;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::size_t i = argmax(agg.data().subspan(l * g * g, g * g));
      CHECK(scene.gt_boxes[0].contains((i % g + 0.5) / g, (i / g + 0.5) / g));
    }
  }
}

TEST_CASE("zero fidelity peaks ignore the objects") {
  SimulatorConfig cfg;
  cfg.fidelity = 0.0;
  std::size_t inside = 0, total = 0;
  double expected = 0.0;
  for (std::uint64_t s = 0; s < 300; ++s) {
    const Scene scene = generate_scene(mix_seed(5, s), 3, {}, table());
    const AttentionStack st = synthesize_attention(scene, table(), cfg, s);
    double cover = 0.0;
    for (const Box& b : scene.gt_boxes) cover += b.area();
    for (const PeakSource& p : st.sources) {
      CHECK(p.distractor);
      ++total;
      expected += cover;
      for (const Box& b : scene.gt_boxes)
        if (b.contains(p.x, p.y)) {
          ++inside;
          break;
        }
    }
  }
  // Binomial z-test against the area a uniform location would hit.
  const double n = static_cast<double>(total), p = expected / n;
  const double z = (inside - n * p) / std::sqrt(n * p * (1 - p));
  CHECK(std::abs(z) < 3.0);
}

TEST_CASE("same seed gives the same stack") {
  const Scene scene = generate_scene(3, 4, {}, table());
  const SimulatorConfig cfg;
  const AttentionStack a = synthesize_attention(scene, table(), cfg, 9);
  const AttentionStack b = synthesize_attention(scene, table(), cfg, 9);
  CHECK(std::equal(a.maps.data().begin(), a.maps.data().end(), b.maps.data().begin()));
  CHECK(a.sources.size() == b.sources.size());
  for (double v : a.maps.data()) CHECK(v >= 0.0);
}

TEST_CASE("head aggregation examples") {
  Rng rng(1);
  AttentionStack one;
  one.maps = random_tensor({2, 1, 4, 4}, rng, 0, 1, false);
  const Tensor a1 = aggregate_heads(one);
  for (std::size_t i = 0; i < 32; ++i) CHECK(std::abs(a1.at(i) - one.maps.at(i)) < 1e-15);

  const Tensor head = random_tensor({4, 4}, rng, 0, 1, false);
  std::vector<double> same;
  for (int h = 0; h < 3; ++h) same.insert(same.end(), head.data().begin(), head.data().end());
  AttentionStack three;
  three.maps = Tensor::from({1, 3, 4, 4}, same);
  const Tensor a3 = aggregate_heads(three);
  for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(a3.at(i) - head.at(i)) < 1e-12);

  std::vector<double> sharp(3 * 16, 0.5);
  sharp[16 + 9] = 10.0;  // head 1, cell 9
  AttentionStack mix;
  mix.maps = Tensor::from({1, 3, 4, 4}, sharp);
  CHECK(argmax(aggregate_heads(mix).data()) == 9);
}

TEST_CASE("attention flow examples") {
  const Tensor uniform = Tensor::full({3, 4, 4}, 0.2);
  const Tensor flat = attention_flow(uniform);
  for (double v : flat.data()) CHECK(std::abs(v - 1.0) < 1e-12);
  Rng rng(2);
  std::vector<double> v = std::vector<double>(3 * 16);
  std::uniform_real_distribution<double> u(0, 0.5);
  for (double& x : v) x = u(rng);
  for (int l = 0; l < 3; ++l) v[l * 16 + 6] = 0.9;
  CHECK(argmax(attention_flow(Tensor::from({3, 4, 4}, v)).data()) == 6);
  const Tensor single = Tensor::from({1, 2, 2}, {0.1, 0.4, 0.2, 0.3});
  const Tensor f = attention_flow(single);
  CHECK(f.at(1) == 1.0);
  CHECK(std::abs(f.at(0) - 0.25) < 1e-15);
}

TEST_CASE("point sampling examples") {
  CHECK(sample_prompt_points(Tensor::zeros({8, 8}), 0.3, 5).empty());
  std::vector<double> m(100, 0.0);
  m[2 * 10 + 2] = 0.6;
  m[7 * 10 + 7] = 0.9;
  const auto pts = sample_prompt_points(Tensor::from({10, 10}, m), 0.5, 5);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].score == 0.9);
  CHECK(pts[1].score == 0.6);
  CHECK(std::abs(pts[0].x - 0.75) < 1e-12);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto many = sample_prompt_points(random_tensor({12, 12}, rng, 0, 1, false), 0.3, 4);
    CHECK(many.size() <= 4);
    for (std::size_t i = 1; i < many.size(); ++i) CHECK(many[i - 1].score >= many[i].score);
  }
}

TEST_CASE("perfect fidelity recalls at least ninety percent of objects") {
  SimulatorConfig cfg;
  cfg.fidelity = 1.0;
  std::size_t hit = 0, total = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const Scene scene = generate_scene(mix_seed(11, s), 1 + s % 6, {}, table());
    const PromptResult r = simulate_prompts(scene, table(), cfg, s);
    for (const Box& b : scene.gt_boxes) {
      ++total;
      for (const PromptPoint& p : r.points)
        if (b.contains(p.x, p.y)) {
          ++hit;
          break;
        }
    }
  }
  CHECK(static_cast<double>(hit) / total >= 0.9);
}

TEST_CASE("label noise flips labels at the configured rate") {
  SimulatorConfig cfg;
  cfg.fidelity = 1.0;
  cfg.label_noise = 0.1;
  std::size_t flipped = 0, total = 0;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const Scene scene = generate_scene(mix_seed(12, s), 4, {}, table());
    const AttentionStack st = synthesize_attention(scene, table(), cfg, s);
    REQUIRE(st.sources.size() == scene.gt_boxes.size());
    for (std::size_t i = 0; i < st.sources.size(); ++i) {
      ++total;
      if (st.sources[i].label != scene.gt_labels[i]) ++flipped;
    }
  }
  CHECK(std::abs(static_cast<double>(flipped) / total - 0.1) < 0.03);
}

TEST_CASE("discovered labels are the distinct proposed labels") {
  std::vector<PromptPoint> pts(4);
  pts[0].proposed_label = 3;
  pts[1].proposed_label = 1;
  pts[2].proposed_label = 3;
  CHECK(discovered_labels(pts) == std::vector<std::size_t>{1, 3});
}

TEST_CASE("invalid simulator settings are configuration errors") {
  SimulatorConfig cfg;
  cfg.fidelity = 1.5;
  CHECK_THROWS_AS(synthesize_attention(Scene{}, table(), cfg, 1), ConfigError);
  CHECK_THROWS_AS(sample_prompt_points(Tensor::zeros({4, 4}), 0.0, 3), ConfigError);
}

}
