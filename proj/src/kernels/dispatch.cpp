#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdemu/kernels.hpp"

namespace qdemu::kernels {
namespace {

const KernelTable* choose_default() {
  const char* env = std::getenv("QDEMU_SIMD");
  if (env != nullptr && std::string(env) == "scalar") return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

const KernelTable*& current() {
  static const KernelTable* table = choose_default();
  return table;
}

void transpose(std::size_t rows, std::size_t cols, const float* src,
               std::vector<float>& dst) {
  dst.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

}  // namespace

const KernelTable& active() { return *current(); }
Backend active_backend() { return current()->backend; }

bool backend_available(Backend backend) {
  return backend == Backend::scalar || avx2_table() != nullptr;
}

void set_backend(Backend backend) {
  if (backend == Backend::scalar) {
    current() = &scalar_table();
    return;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) throw std::runtime_error("AVX2 kernels unavailable on this CPU");
  current() = t;
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c, bool accumulate) {
  active().gemm_nn(m, n, k, a, b, c, accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c, bool accumulate) {
  thread_local std::vector<float> bt;
  transpose(n, k, b, bt);
  active().gemm_nn(m, n, k, a, bt.data(), c, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c, bool accumulate) {
  thread_local std::vector<float> at;
  transpose(k, m, a, at);
  active().gemm_nn(m, n, k, at.data(), b, c, accumulate);
}

}  // namespace qdemu::kernels
