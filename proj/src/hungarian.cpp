#include <algorithm>
#include <cmath>
#include <limits>

#include "owqf/matching_loss.hpp"

namespace owqf {

namespace {

// Shortest augmenting path (Kuhn-Munkres with potentials) for n <= m.
// a is 1-indexed [n + 1][m + 1]; returns row assigned to each column.
std::vector<std::size_t> solve(const std::vector<double>& a, std::size_t n,
                               std::size_t m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  return p;
}

}  // namespace

Assignment hungarian_match(const std::vector<double>& cost, std::size_t rows,
                           std::size_t cols) {
  if (cost.size() != rows * cols)
    throw ShapeError("hungarian_match: cost holds " +
                     std::to_string(cost.size()) + " entries for " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  for (double c : cost)
    if (!std::isfinite(c)) throw NumericError("hungarian_match: non-finite cost");
  Assignment out;
  if (rows == 0 || cols == 0) return out;
  if (rows <= cols) {
    const auto p = solve(cost, rows, cols);
    for (std::size_t j = 1; j <= cols; ++j)
      if (p[j] != 0) out.emplace_back(p[j] - 1, j - 1);
  } else {
    std::vector<double> t(cost.size());
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = cost[i * cols + j];
    const auto p = solve(t, cols, rows);
    for (std::size_t i = 1; i <= rows; ++i)
      if (p[i] != 0) out.emplace_back(i - 1, p[i] - 1);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Assignment hungarian_match(const Tensor& cost) {
  if (cost.rank() != 2) throw ShapeError("hungarian_match: expected a matrix");
  return hungarian_match(std::vector<double>(cost.data().begin(), cost.data().end()),
                         cost.dim(0), cost.dim(1));
}

}  // namespace owqf
