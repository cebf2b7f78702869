#include "qdemu/buffer_pool.hpp"

#include <cstdlib>
#include <unordered_map>
#include <vector>

namespace qdemu::ad::detail {
namespace {

constexpr std::size_t kMinPooled = 64 * 1024;
constexpr std::size_t kMaxCached = std::size_t{512} << 20;

struct Pool {
  std::unordered_map<std::size_t, std::vector<void*>> free;
  std::size_t cached = 0;
  ~Pool();
};

// Trivially destructible, so still readable while other thread_locals unwind.
thread_local bool pool_alive = false;

Pool& pool() {
  thread_local Pool p;
  pool_alive = true;
  return p;
}

Pool::~Pool() {
  pool_alive = false;
  for (auto& [bytes, blocks] : free) {
    for (void* b : blocks) std::free(b);
  }
}

}  // namespace

void* pool_allocate(std::size_t bytes) {
  if (bytes >= kMinPooled) {
    Pool& p = pool();
    auto it = p.free.find(bytes);
    if (it != p.free.end() && !it->second.empty()) {
      void* b = it->second.back();
      it->second.pop_back();
      p.cached -= bytes;
      return b;
    }
  }
  void* b = std::malloc(bytes ? bytes : 1);
  if (b == nullptr) throw std::bad_alloc();
  return b;
}

void pool_release(void* b, std::size_t bytes) noexcept {
  if (b == nullptr) return;
  if (bytes >= kMinPooled && pool_alive) {
    Pool& p = pool();
    if (p.cached + bytes <= kMaxCached) {
      try {
        p.free[bytes].push_back(b);
        p.cached += bytes;
        return;
      } catch (...) {
      }
    }
  }
  std::free(b);
}

}  // namespace qdemu::ad::detail
