#pragma once

#include <cstddef>
#include <span>

// Data-parallel inner loops. Every kernel has a serial reference in
// owqf::kernels::serial and an OpenMP variant in owqf::kernels::omp. Both
// variants split work over independent output rows and keep the per-element
// summation order, so their results are bit-identical.
namespace owqf::kernels {

// Sets the minimum multiply-add count before the dispatching entry points
// below switch to the OpenMP variant.
void set_parallel_threshold(std::size_t flops);
std::size_t parallel_threshold();

struct GridView {
  std::span<const double> values;  // [height, width, channels]
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
};

namespace serial {
// c[m, n] (+)= a[m, k] b[k, n]
void matmul_nn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
// c[m, n] (+)= a[m, k] b[n, k]^T
void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
// c[m, n] (+)= a[k, m]^T b[k, n]
void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
// Bilinear sample at normalized (x, y) pairs; cell centers sit at (j + 0.5)/W.
void bilinear_sample(const GridView& grid, std::span<const double> xy,
                     std::span<double> out);
}  // namespace serial

namespace omp {
void matmul_nn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
void bilinear_sample(const GridView& grid, std::span<const double> xy,
                     std::span<double> out);
}  // namespace omp

// Dispatch on problem size.
void matmul_nn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate);
void bilinear_sample(const GridView& grid, std::span<const double> xy,
                     std::span<double> out);

}  // namespace owqf::kernels
