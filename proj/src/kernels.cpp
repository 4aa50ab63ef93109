#include "owqf/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <omp.h>

namespace owqf::kernels {

namespace {

std::atomic<std::size_t> g_threshold{1u << 16};

inline void matmul_nn_row(const double* a, const double* b, double* c,
                          std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p];
    if (av == 0.0) continue;
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void matmul_nt_row(const double* a, const double* b, double* c,
                          std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += a[p] * brow[p];
    c[j] = accumulate ? c[j] + acc : acc;
  }
}

inline void matmul_tn_row(const double* a, const double* b, double* c,
                          std::size_t row, std::size_t m, std::size_t k,
                          std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p * m + row];
    if (av == 0.0) continue;
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void bilinear_one(const GridView& g, double x, double y, double* out) {
  const double px = std::clamp(x * static_cast<double>(g.width) - 0.5, 0.0,
                               static_cast<double>(g.width - 1));
  const double py = std::clamp(y * static_cast<double>(g.height) - 0.5, 0.0,
                               static_cast<double>(g.height - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(px));
  const auto y0 = static_cast<std::size_t>(std::floor(py));
  const std::size_t x1 = std::min(x0 + 1, g.width - 1);
  const std::size_t y1 = std::min(y0 + 1, g.height - 1);
  const double tx = px - static_cast<double>(x0);
  const double ty = py - static_cast<double>(y0);
  const double w00 = (1 - tx) * (1 - ty), w01 = tx * (1 - ty);
  const double w10 = (1 - tx) * ty, w11 = tx * ty;
  const std::size_t c = g.channels;
  const double* v00 = g.values.data() + (y0 * g.width + x0) * c;
  const double* v01 = g.values.data() + (y0 * g.width + x1) * c;
  const double* v10 = g.values.data() + (y1 * g.width + x0) * c;
  const double* v11 = g.values.data() + (y1 * g.width + x1) * c;
  for (std::size_t ch = 0; ch < c; ++ch)
    out[ch] = w00 * v00[ch] + w01 * v01[ch] + w10 * v10[ch] + w11 * v11[ch];
}

bool use_parallel(std::size_t work) {
  return work >= g_threshold.load(std::memory_order_relaxed) &&
         omp_get_max_threads() > 1;
}

}  // namespace

void set_parallel_threshold(std::size_t flops) { g_threshold.store(flops); }
std::size_t parallel_threshold() { return g_threshold.load(); }

namespace serial {

void matmul_nn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    matmul_nn_row(a.data() + i * k, b.data(), c.data() + i * n, k, n,
                  accumulate);
}

void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    matmul_nt_row(a.data() + i * k, b.data(), c.data() + i * n, k, n,
                  accumulate);
}

void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    matmul_tn_row(a.data(), b.data(), c.data() + i * n, i, m, k, n,
                  accumulate);
}

void bilinear_sample(const GridView& grid, std::span<const double> xy,
                     std::span<double> out) {
  const std::size_t count = xy.size() / 2;
  for (std::size_t i = 0; i < count; ++i)
    bilinear_one(grid, xy[2 * i], xy[2 * i + 1],
                 out.data() + i * grid.channels);
}

}  // namespace serial

namespace omp {

void matmul_nn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    matmul_nn_row(a.data() + i * k, b.data(), c.data() + i * n, k, n,
                  accumulate);
}

void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    matmul_nt_row(a.data() + i * k, b.data(), c.data() + i * n, k, n,
                  accumulate);
}

void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    matmul_tn_row(a.data(), b.data(), c.data() + i * n,
                  static_cast<std::size_t>(i), m, k, n, accumulate);
}

void bilinear_sample(const GridView& grid, std::span<const double> xy,
                     std::span<double> out) {
  const auto count = static_cast<std::ptrdiff_t>(xy.size() / 2);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i)
    bilinear_one(grid, xy[2 * i], xy[2 * i + 1],
                 out.data() + i * grid.channels);
}

}  // namespace omp

void matmul_nn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  if (use_parallel(m * k * n))
    omp::matmul_nn(a, b, c, m, k, n, accumulate);
  else
    serial::matmul_nn(a, b, c, m, k, n, accumulate);
}

void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  if (use_parallel(m * k * n))
    omp::matmul_nt(a, b, c, m, k, n, accumulate);
  else
    serial::matmul_nt(a, b, c, m, k, n, accumulate);
}

void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  if (use_parallel(m * k * n))
    omp::matmul_tn(a, b, c, m, k, n, accumulate);
  else
    serial::matmul_tn(a, b, c, m, k, n, accumulate);
}

void bilinear_sample(const GridView& grid, std::span<const double> xy,
                     std::span<double> out) {
  if (use_parallel(xy.size() / 2 * grid.channels * 4))
    omp::bilinear_sample(grid, xy, out);
  else
    serial::bilinear_sample(grid, xy, out);
}

}  // namespace owqf::kernels
