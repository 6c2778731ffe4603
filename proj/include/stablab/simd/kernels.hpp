#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace stablab::simd {

// Dense inner-loop primitives used by the model forward/backward passes.
// Matrices are row-major, rows x cols.
struct KernelTable {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y += W x
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y += W^T x
  void (*gemv_t)(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
  // W += a * u v^T
  void (*ger)(double a, const double* u, std::size_t rows, const double* v, std::size_t cols, double* w);
};

enum class Backend { Scalar, Avx2 };

const KernelTable& scalar_table();
// nullptr when the build or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

// Table currently used by the library. Chosen on first use: AVX2 when the CPU
// supports it, unless STABLAB_SIMD=scalar is set in the environment.
const KernelTable& active();
Backend active_backend();
// Returns false when the requested backend is unavailable on this machine.
bool set_backend(Backend backend);
std::string_view backend_name(Backend backend);

// Thin span wrappers over the active table.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

}  // namespace stablab::simd
