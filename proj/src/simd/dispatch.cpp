#include <atomic>
#include <cstdlib>
#include <string_view>

#include "stablab/simd/kernels.hpp"

namespace stablab::simd {

#if defined(STABLAB_HAVE_AVX2)
const KernelTable& avx2_table_impl();
#endif

const KernelTable* avx2_table() {
#if defined(STABLAB_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* initial_table() {
  const char* env = std::getenv("STABLAB_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar") return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

Backend active_backend() {
  return &active() == &scalar_table() ? Backend::Scalar : Backend::Avx2;
}

bool set_backend(Backend backend) {
  if (backend == Backend::Scalar) {
    current().store(&scalar_table());
    return true;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) return false;
  current().store(t);
  return true;
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::Scalar ? "scalar" : "avx2";
}

}  // namespace stablab::simd
