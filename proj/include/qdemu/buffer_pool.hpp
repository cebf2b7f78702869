#pragma once

// Recycles large tensor buffers per thread. Fresh multi-megabyte blocks come
// from mmap and cost a page fault per 4 KiB on first touch; inference
// allocates the same shapes every step.

#include <cstddef>
#include <new>

namespace qdemu::ad::detail {

void* pool_allocate(std::size_t bytes);
void pool_release(void* p, std::size_t bytes) noexcept;

template <typename T>
struct PoolAllocator {
  using value_type = T;
  PoolAllocator() = default;
  template <typename U>
  PoolAllocator(const PoolAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(pool_allocate(n * sizeof(T))); }
  void deallocate(T* p, std::size_t n) noexcept { pool_release(p, n * sizeof(T)); }
  template <typename U>
  bool operator==(const PoolAllocator<U>&) const { return true; }
};

}  // namespace qdemu::ad::detail
