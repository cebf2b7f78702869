#pragma once

#include <cstddef>
#include <functional>

namespace qdemu {

// 0 means std::thread::hardware_concurrency().
std::size_t resolve_workers(std::size_t workers);

// Runs body(i) for i in [0, n) on up to `workers` threads. The first
// exception is rethrown after all threads finish.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace qdemu
