#include "owqf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "owqf/kernels.hpp"

namespace owqf {

using detail::Node;

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

thread_local int no_grad_depth = 0;

using Backward = std::function<void(Node&)>;

Tensor make_result(Shape shape, std::vector<double> value,
                   std::initializer_list<const Tensor*> inputs,
                   Backward backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool any = false;
  for (const Tensor* t : inputs) any = any || t->requires_grad();
  any = any && no_grad_depth == 0;
  if (any) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->inputs.push_back(t->node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor make_result_n(Shape shape, std::vector<double> value,
                     const std::vector<Tensor>& inputs, Backward backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool any = false;
  for (const Tensor& t : inputs) any = any || t.requires_grad();
  any = any && no_grad_depth == 0;
  if (any) {
    node->requires_grad = true;
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Grad buffer of input i, or nullptr when that input does not need one.
std::vector<double>* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? &in.ensure_grad() : nullptr;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     to_string(a.shape()) + " vs " + to_string(b.shape()));
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got " +
                     to_string(a.shape()));
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
              DA da, DB db) {
  require_same_shape(a, b, name);
  std::vector<double> out(a.size());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  return make_result(a.shape(), std::move(out), {&a, &b}, [da, db](Node& s) {
    const auto& x = s.inputs[0]->value;
    const auto& y = s.inputs[1]->value;
    if (auto* g = input_grad(s, 0))
      for (std::size_t i = 0; i < g->size(); ++i)
        (*g)[i] += s.grad[i] * da(x[i], y[i]);
    if (auto* g = input_grad(s, 1))
      for (std::size_t i = 0; i < g->size(); ++i)
        (*g)[i] += s.grad[i] * db(x[i], y[i]);
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.size());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  return make_result(a.shape(), std::move(out), {&a}, [deriv](Node& s) {
    auto* g = input_grad(s, 0);
    const auto& x = s.inputs[0]->value;
    for (std::size_t i = 0; i < g->size(); ++i)
      (*g)[i] += s.grad[i] * deriv(x[i], s.value[i]);
  });
}

}  // namespace

// --- Tensor ----------------------------------------------------------------

NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  for (std::size_t d : shape)
    if (d == 0 && !values.empty())
      throw ShapeError("Tensor::from: zero extent with data");
  if (numel(shape) != values.size())
    throw ShapeError("Tensor::from: shape " + to_string(shape) + " holds " +
                     std::to_string(numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     to_string(shape()));
  return node_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1)
    throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->value[r * node_->shape.back() + c];
}

void Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  if (!flag) node_->grad.clear();
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty())
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  if (size() != 1)
    throw ShapeError("backward() requires a scalar, got " +
                     to_string(shape()));
  Tape(*this).backward();
}

Tensor Tensor::detach() const {
  return from(shape(), node_->value, false);
}

Tensor Tensor::clone() const {
  return from(shape(), node_->value, requires_grad());
}

// --- Tape ------------------------------------------------------------------

Tape::Tape(const Tensor& root) : root_(root.node()) {
  if (!root_ || !root_->requires_grad) return;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root_.get(), 0}};
  visited.insert(root_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second)
        stack.emplace_back(child, 0);
    } else {
      nodes_.push_back(node);
      stack.pop_back();
    }
  }
}

void Tape::backward() {
  if (nodes_.empty()) return;
  for (Node* n : nodes_)
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  auto& seed = root_->ensure_grad();
  for (double& g : seed) g += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

// --- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "minimum", [](double x, double y) { return std::min(x, y); },
      [](double x, double y) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "maximum", [](double x, double y) { return std::max(x, y); },
      [](double x, double y) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return sigmoid_scalar(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor inverse_sigmoid(const Tensor& a, double eps) {
  return unary(
      a,
      [eps](double x) {
        const double c = std::clamp(x, eps, 1.0 - eps);
        return std::log(c / (1.0 - c));
      },
      [eps](double x, double) {
        if (x < eps || x > 1.0 - eps) return 0.0;
        return 1.0 / (x * (1.0 - x));
      });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  require_rank2(a, "add_row");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (bias.size() != n)
    throw ShapeError("add_row: bias " + to_string(bias.shape()) +
                     " does not match " + to_string(a.shape()));
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bv = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  return make_result(a.shape(), std::move(out), {&a, &bias},
                     [m, n](Node& s) {
                       if (auto* g = input_grad(s, 0))
                         for (std::size_t i = 0; i < m * n; ++i)
                           (*g)[i] += s.grad[i];
                       if (auto* g = input_grad(s, 1))
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j)
                             (*g)[j] += s.grad[i * n + j];
                     });
}

// --- reductions ------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result({1}, {total}, {&a}, [](Node& s) {
    auto* g = input_grad(s, 0);
    for (double& v : *g) v += s.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean_rows(const Tensor& a) {
  require_rank2(a, "mean_rows");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (m == 0) throw ShapeError("mean_rows of empty matrix");
  std::vector<double> out(n, 0.0);
  const auto av = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += av[i * n + j];
  const double inv = 1.0 / static_cast<double>(m);
  for (double& v : out) v *= inv;
  return make_result({1, n}, std::move(out), {&a}, [m, n, inv](Node& s) {
    auto* g = input_grad(s, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += s.grad[j] * inv;
  });
}

// --- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) +
                     " x " + to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  kernels::matmul_nn(a.data(), b.data(), out, m, k, n, false);
  return make_result({m, n}, std::move(out), {&a, &b}, [m, k, n](Node& s) {
    const auto& av = s.inputs[0]->value;
    const auto& bv = s.inputs[1]->value;
    if (auto* g = input_grad(s, 0))
      kernels::matmul_nt(s.grad, bv, *g, m, n, k, true);
    if (auto* g = input_grad(s, 1))
      kernels::matmul_tn(av, s.grad, *g, k, m, n, true);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  if (a.dim(1) != b.dim(1))
    throw ShapeError("matmul_nt: inner dimensions differ, " +
                     to_string(a.shape()) + " x " + to_string(b.shape()) +
                     "^T");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  std::vector<double> out(m * n, 0.0);
  kernels::matmul_nt(a.data(), b.data(), out, m, k, n, false);
  return make_result({m, n}, std::move(out), {&a, &b}, [m, k, n](Node& s) {
    const auto& av = s.inputs[0]->value;
    const auto& bv = s.inputs[1]->value;
    if (auto* g = input_grad(s, 0))
      kernels::matmul_nn(s.grad, bv, *g, m, n, k, true);
    if (auto* g = input_grad(s, 1))
      kernels::matmul_tn(s.grad, av, *g, n, m, k, true);
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  const auto av = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_result({n, m}, std::move(out), {&a}, [m, n](Node& s) {
    auto* g = input_grad(s, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += s.grad[j * m + i];
  });
}

// --- normalization ---------------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
  const auto r = static_cast<int>(x.rank());
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r)
    throw ShapeError("softmax: axis out of range for " + to_string(x.shape()));
  const auto& shape = x.shape();
  const std::size_t n = shape[axis];
  if (n == 0) throw ShapeError("softmax over empty axis");
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (int i = axis + 1; i < r; ++i) inner *= shape[i];
  std::vector<double> out(x.size());
  const auto xv = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  return make_result(shape, std::move(out), {&x},
                     [outer, inner, n](Node& s) {
                       auto* g = input_grad(s, 0);
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t in = 0; in < inner; ++in) {
                           const std::size_t base = o * n * inner + in;
                           double dot = 0.0;
                           for (std::size_t j = 0; j < n; ++j)
                             dot += s.grad[base + j * inner] *
                                    s.value[base + j * inner];
                           for (std::size_t j = 0; j < n; ++j) {
                             const std::size_t idx = base + j * inner;
                             (*g)[idx] += s.value[idx] * (s.grad[idx] - dot);
                           }
                         }
                     });
}

Tensor masked_softmax_rows(const Tensor& x, const std::vector<bool>& blocked) {
  require_rank2(x, "masked_softmax_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (!blocked.empty() && blocked.size() != m * n)
    throw ShapeError("masked_softmax_rows: mask holds " +
                     std::to_string(blocked.size()) + " entries for " +
                     to_string(x.shape()));
  std::vector<double> out(m * n, 0.0);
  const auto xv = x.data();
  auto open = [&](std::size_t idx) { return blocked.empty() || !blocked[idx]; };
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (open(i * n + j)) mx = std::max(mx, xv[i * n + j]);
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (open(i * n + j)) {
        const double e = std::exp(xv[i * n + j] - mx);
        out[i * n + j] = e;
        z += e;
      }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return make_result(x.shape(), std::move(out), {&x}, [m, n](Node& s) {
    auto* g = input_grad(s, 0);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        dot += s.grad[i * n + j] * s.value[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t idx = i * n + j;
        (*g)[idx] += s.value[idx] * (s.grad[idx] - dot);
      }
    }
  });
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps) {
  if (x.rank() == 0) throw ShapeError("layernorm of rank-0 tensor");
  const std::size_t d = x.shape().back();
  if (d == 0) throw ShapeError("layernorm over empty axis");
  if (gain.size() != d || bias.size() != d)
    throw ShapeError("layernorm: affine parameters do not match width " +
                     std::to_string(d));
  if (!(eps > 0)) throw ConfigError("layernorm: eps must be positive");
  const std::size_t rows = x.size() / d;
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(rows);
  const auto xv = x.data(), gv = gain.data(), bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mu) * inv_std[r];
      out[r * d + j] = gv[j] * xhat[r * d + j] + bv[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {&x, &gain, &bias},
      [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& s) {
        const auto& gv = s.inputs[1]->value;
        auto* gx = input_grad(s, 0);
        auto* gg = input_grad(s, 1);
        auto* gb = input_grad(s, 2);
        std::vector<double> gxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* go = s.grad.data() + r * d;
          const double* xh = xhat.data() + r * d;
          if (gg)
            for (std::size_t j = 0; j < d; ++j) (*gg)[j] += go[j] * xh[j];
          if (gb)
            for (std::size_t j = 0; j < d; ++j) (*gb)[j] += go[j];
          if (!gx) continue;
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            gxhat[j] = go[j] * gv[j];
            m1 += gxhat[j];
            m2 += gxhat[j] * xh[j];
          }
          m1 /= static_cast<double>(d);
          m2 /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j)
            (*gx)[r * d + j] += inv_std[r] * (gxhat[j] - m1 - xh[j] * m2);
        }
      });
}

// --- structural ------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape: " + to_string(a.shape()) + " to " +
                     to_string(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {&a}, [](Node& s) {
    auto* g = input_grad(s, 0);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += s.grad[i];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  const std::size_t n = parts.front().dim(1);
  std::size_t m = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.dim(1) != n)
      throw ShapeError("concat_rows: width " + std::to_string(p.dim(1)) +
                       " vs " + std::to_string(n));
    m += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result_n({m, n}, std::move(out), parts, [](Node& s) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < s.inputs.size(); ++i) {
      const std::size_t len = s.inputs[i]->value.size();
      if (auto* g = input_grad(s, i))
        for (std::size_t j = 0; j < len; ++j) (*g)[j] += s.grad[offset + j];
      offset += len;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t m = parts.front().dim(0);
  std::size_t n = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.dim(0) != m)
      throw ShapeError("concat_cols: height " + std::to_string(p.dim(0)) +
                       " vs " + std::to_string(m));
    widths.push_back(p.dim(1));
    n += p.dim(1);
  }
  std::vector<double> out(m * n);
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j)
        out[i * n + col + j] = pv[i * widths[k] + j];
    col += widths[k];
  }
  return make_result_n({m, n}, std::move(out), parts,
                       [m, n, widths](Node& s) {
                         std::size_t col = 0;
                         for (std::size_t k = 0; k < widths.size(); ++k) {
                           if (auto* g = input_grad(s, k))
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < widths[k]; ++j)
                                 (*g)[i * widths[k] + j] +=
                                     s.grad[i * n + col + j];
                           col += widths[k];
                         }
                       });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_rows");
  if (begin > end || end > a.dim(0))
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of " + to_string(a.shape()));
  const std::size_t n = a.dim(1);
  std::vector<double> out(a.data().begin() + begin * n,
                          a.data().begin() + end * n);
  return make_result({end - begin, n}, std::move(out), {&a},
                     [begin, n](Node& s) {
                       auto* g = input_grad(s, 0);
                       for (std::size_t i = 0; i < s.grad.size(); ++i)
                         (*g)[begin * n + i] += s.grad[i];
                     });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  if (begin > end || end > a.dim(1))
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of " + to_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1), w = end - begin;
  std::vector<double> out(m * w);
  const auto av = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * n + begin + j];
  return make_result({m, w}, std::move(out), {&a}, [m, n, w, begin](Node& s) {
    auto* g = input_grad(s, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j)
        (*g)[i * n + begin + j] += s.grad[i * w + j];
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows) {
  require_rank2(a, "gather_rows");
  const std::size_t n = a.dim(1);
  std::vector<double> out(rows.size() * n);
  const auto av = a.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.dim(0))
      throw ShapeError("gather_rows: index " + std::to_string(rows[i]) +
                       " out of " + to_string(a.shape()));
    std::copy_n(av.begin() + rows[i] * n, n, out.begin() + i * n);
  }
  return make_result({rows.size(), n}, std::move(out), {&a},
                     [rows, n](Node& s) {
                       auto* g = input_grad(s, 0);
                       for (std::size_t i = 0; i < rows.size(); ++i)
                         for (std::size_t j = 0; j < n; ++j)
                           (*g)[rows[i] * n + j] += s.grad[i * n + j];
                     });
}

// --- losses ----------------------------------------------------------------

Tensor sigmoid_focal_loss(const Tensor& logits, std::span<const double> targets,
                          double alpha, double gamma) {
  if (targets.size() != logits.size())
    throw ShapeError("sigmoid_focal_loss: " + std::to_string(targets.size()) +
                     " targets for " + to_string(logits.shape()));
  std::vector<double> t(targets.begin(), targets.end());
  const auto xv = logits.data();
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double x = xv[i];
    const double p = sigmoid_scalar(x);
    if (t[i] > 0.5)
      total += alpha * std::pow(1.0 - p, gamma) * softplus(-x);
    else
      total += (1.0 - alpha) * std::pow(p, gamma) * softplus(x);
  }
  return make_result({1}, {total}, {&logits},
                     [t = std::move(t), alpha, gamma](Node& s) {
                       auto* g = input_grad(s, 0);
                       const auto& xv = s.inputs[0]->value;
                       for (std::size_t i = 0; i < xv.size(); ++i) {
                         const double x = xv[i];
                         const double p = sigmoid_scalar(x);
                         double d;
                         if (t[i] > 0.5) {
                           const double q = 1.0 - p;
                           d = alpha * (-gamma * p * std::pow(q, gamma) *
                                            softplus(-x) -
                                        std::pow(q, gamma + 1.0));
                         } else {
                           d = (1.0 - alpha) *
                               (gamma * std::pow(p, gamma) * (1.0 - p) *
                                    softplus(x) +
                                std::pow(p, gamma + 1.0));
                         }
                         (*g)[i] += s.grad[0] * d;
                       }
                     });
}

}  // namespace owqf
