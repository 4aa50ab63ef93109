#include <doctest.h>

#include <cmath>
#include <unordered_map>

#include "op_cases.hpp"
#include "owqf/attention.hpp"
#include "owqf/grad_check.hpp"
#include "support.hpp"

using namespace owqf;
using namespace owqf::testing;

TEST_SUITE("tensor") {

TEST_CASE("matmul identity and hand-computed product") {
  const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const Tensor p = matmul(eye, eye);
  CHECK(std::vector<double>(p.data().begin(), p.data().end()) ==
        std::vector<double>{1, 0, 0, 1});
  const Tensor r = matmul(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 1}, {1, 1}));
  CHECK(r.shape() == Shape{2, 1});
  CHECK(r.at(0) == 3.0);
  CHECK(r.at(1) == 7.0);
}

TEST_CASE("matmul shape error names both shapes") {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
  }
}

TEST_CASE("gradient of sum(a b) with respect to a is b summed over columns") {
  Rng rng(3);
  Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({4, 2}, rng, -1, 1, false);
  sum(matmul(a, b)).backward();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k)
      CHECK(a.grad()[i * 4 + k] == doctest::Approx(b.at(k, 0) + b.at(k, 1)).epsilon(1e-12));
  const auto r = grad_check([&] { return sum(matmul(a, b)); }, {a});
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("softmax symmetry, stabilization and normalization") {
  const Tensor s = softmax(Tensor::from({1, 2}, {0, 0}));
  CHECK(s.at(0) == 0.5);
  CHECK(s.at(1) == 0.5);
  const Tensor big = softmax(Tensor::from({1, 2}, {1000, 0}));
  CHECK(std::isfinite(big.at(0)));
  CHECK(std::abs(big.at(0) - 1.0) < 1e-12);
  CHECK(std::abs(big.at(1)) < 1e-12);
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor({4, 7}, rng, -50, 50, false);
    const Tensor y = softmax(x, -1);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 7; ++c) {
        CHECK(y.at(r, c) >= 0.0);
        total += y.at(r, c);
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("layernorm constant input and two-element example") {
  const Tensor g = Tensor::full({3}, 1.0), b = Tensor::zeros({3});
  const Tensor z = layernorm(Tensor::from({1, 3}, {2, 2, 2}), g, b);
  for (double v : z.data()) CHECK(v == 0.0);
  const Tensor y = layernorm(Tensor::from({1, 2}, {1, 3}), Tensor::full({2}, 1.0),
                             Tensor::zeros({2}));
  CHECK(std::abs(y.at(0) + 1.0) < 1e-4);
  CHECK(std::abs(y.at(1) - 1.0) < 1e-4);
}

TEST_CASE("every differentiable operation passes the gradient check") {
  for (auto& c : differentiable_op_cases()) {
    CAPTURE(c.name);
    const auto r = grad_check(c.f, c.params);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("grad_check trivial functions") {
  Tensor x = Tensor::from({1}, {3.0}, true);
  const auto r = grad_check([&] { return mul(x, x); }, {x});
  CHECK(r.analytic == doctest::Approx(6.0));
  CHECK(r.max_relative_error < 1e-8);
  Tensor y = Tensor::from({2}, {1.0, 2.0}, true);
  const auto c = grad_check([] { return Tensor::scalar(4.0); }, {y});
  CHECK(c.max_relative_error == 0.0);
  CHECK(c.analytic == 0.0);
  CHECK_THROWS_AS(grad_check([&] { return scale(sum(y), std::nan("")); }, {y}), NumericError);
}

TEST_CASE("multi-head attention matches a scalar reference") {
  Rng rng(11);
  const std::size_t d = 8;
  const AttentionWeights w = AttentionWeights::xavier(d, rng);
  const Tensor q = random_tensor({4, d}, rng, -1, 1, false);
  const Tensor k = random_tensor({5, d}, rng, -1, 1, false);
  const Tensor v = random_tensor({5, d}, rng, -1, 1, false);
  std::vector<bool> blocked(20, false);
  blocked[2] = blocked[7] = true;
  for (std::size_t j = 0; j < 5; ++j) blocked[15 + j] = true;  // row 3 fully blocked
  for (const auto& mask : {std::vector<bool>{}, blocked}) {
    const Tensor out = multi_head_attention(q, k, v, 2, mask, w);
    const auto ref = ref_attention({q.data().begin(), q.data().end()},
                                   {k.data().begin(), k.data().end()},
                                   {v.data().begin(), v.data().end()}, 4, 5, d, 2, mask, w);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(out.at(i) - ref[i]) <= 1e-10);
  }
  const Tensor masked = multi_head_attention(q, k, v, 2, blocked, w);
  for (std::size_t c = 0; c < d; ++c) CHECK(masked.at(3, c) == 0.0);
}

TEST_CASE("attention over a single key returns the value row") {
  const std::size_t d = 4;
  AttentionWeights w;
  std::vector<double> eye(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) eye[i * d + i] = 1.0;
  for (Linear* l : {&w.query, &w.key, &w.value, &w.output})
    *l = {Tensor::from({d, d}, eye), Tensor::zeros({d})};
  const Tensor v = Tensor::from({1, d}, {0.1, -0.2, 0.3, 0.4});
  const Tensor out = multi_head_attention(Tensor::from({1, d}, {1, 2, 3, 4}),
                                          Tensor::from({1, d}, {4, 3, 2, 1}), v, 2, {}, w);
  for (std::size_t c = 0; c < d; ++c) CHECK(out.at(c) == doctest::Approx(v.at(c)));
}

TEST_CASE("indivisible head count is a configuration error") {
  Rng rng(1);
  const AttentionWeights w = AttentionWeights::xavier(6, rng);
  const Tensor x = Tensor::zeros({2, 6});
  CHECK_THROWS_AS(multi_head_attention(x, x, x, 4, {}, w), ConfigError);
}

TEST_CASE("tape order is topological and replay is deterministic") {
  Rng rng(2);
  Tensor a = random_tensor({3, 3}, rng), b = random_tensor({3, 3}, rng);
  auto f = [&] { return sum(softmax(matmul(sigmoid(a), add(a, b)))); };
  const Tensor root = f();
  Tape tape(root);
  std::unordered_map<const detail::Node*, std::size_t> pos;
  for (std::size_t i = 0; i < tape.nodes().size(); ++i) pos[tape.nodes()[i]] = i;
  for (const detail::Node* n : tape.nodes())
    for (const auto& in : n->inputs)
      if (pos.count(in.get())) CHECK(pos[in.get()] < pos[n]);

  a.zero_grad();
  b.zero_grad();
  f().backward();
  const std::vector<double> g1(a.grad().begin(), a.grad().end());
  a.zero_grad();
  b.zero_grad();
  const Tensor again = f();
  again.backward();
  const std::vector<double> g2(a.grad().begin(), a.grad().end());
  CHECK(g1 == g2);
  CHECK(again.item() == root.item());
}

TEST_CASE("reachable leaves receive gradients and the no-grad guard records nothing") {
  Rng rng(4);
  Tensor a = random_tensor({2, 2}, rng), b = random_tensor({2, 2}, rng);
  sum(mul(a, b)).backward();
  CHECK(a.has_grad());
  CHECK(b.has_grad());
  CHECK(a.grad().size() == a.size());
  NoGradGuard guard;
  CHECK_FALSE(mul(a, b).requires_grad());
}

TEST_CASE("shape contract: from rejects mismatched data") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK(numel({2, 3, 4}) == 24);
}

}
