#include "stablab/simd/kernels.hpp"

namespace stablab::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gemv_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot_scalar(w + r * cols, x, cols);
}

void gemv_t_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], w + r * cols, y, cols);
}

void ger_scalar(double a, const double* u, std::size_t rows, const double* v, std::size_t cols,
                double* w) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(a * u[r], v, w + r * cols, cols);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", dot_scalar, axpy_scalar, gemv_scalar, gemv_t_scalar,
                                 ger_scalar};
  return table;
}

}  // namespace stablab::simd
