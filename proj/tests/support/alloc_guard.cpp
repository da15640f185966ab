#include "alloc_guard.hpp"

#include <atomic>
#include <cstdlib>
#include <new>

extern "C" {
void* __real_malloc(std::size_t);
void* __real_calloc(std::size_t, std::size_t);
void* __real_realloc(void*, std::size_t);
void* __real_aligned_alloc(std::size_t, std::size_t);
int __real_posix_memalign(void**, std::size_t, std::size_t);
}

namespace alloc_guard {
namespace {

std::atomic<std::size_t> g_limit{0};
std::atomic<std::size_t> g_largest{0};
std::atomic<std::size_t> g_refused{0};

// Records the request; false when it must be refused.
bool admit(std::size_t bytes) noexcept {
  std::size_t seen = g_largest.load(std::memory_order_relaxed);
  while (bytes > seen && !g_largest.compare_exchange_weak(seen, bytes, std::memory_order_relaxed)) {
  }
  const std::size_t limit = g_limit.load(std::memory_order_relaxed);
  if (limit != 0 && bytes >= limit) {
    g_refused.fetch_add(1, std::memory_order_relaxed);
    return false;
  }
  return true;
}

}  // namespace

void arm(std::size_t bytes) noexcept { g_limit.store(bytes, std::memory_order_relaxed); }
void disarm() noexcept { g_limit.store(0, std::memory_order_relaxed); }
std::size_t largest_request() noexcept { return g_largest.load(std::memory_order_relaxed); }
std::size_t refused() noexcept { return g_refused.load(std::memory_order_relaxed); }
void reset_stats() noexcept {
  g_largest.store(0, std::memory_order_relaxed);
  g_refused.store(0, std::memory_order_relaxed);
}

}  // namespace alloc_guard

extern "C" {

void* __wrap_malloc(std::size_t n) { return alloc_guard::admit(n) ? __real_malloc(n) : nullptr; }

void* __wrap_calloc(std::size_t count, std::size_t size) {
  if (size != 0 && count > static_cast<std::size_t>(-1) / size) return nullptr;
  return alloc_guard::admit(count * size) ? __real_calloc(count, size) : nullptr;
}

void* __wrap_realloc(void* p, std::size_t n) { return alloc_guard::admit(n) ? __real_realloc(p, n) : nullptr; }

void* __wrap_aligned_alloc(std::size_t align, std::size_t n) {
  return alloc_guard::admit(n) ? __real_aligned_alloc(align, n) : nullptr;
}

int __wrap_posix_memalign(void** out, std::size_t align, std::size_t n) {
  return alloc_guard::admit(n) ? __real_posix_memalign(out, align, n) : 12;  // ENOMEM
}
}

// Global operator new routes through the wrapped malloc family.
namespace {

void* checked_new(std::size_t n) {
  if (void* p = std::malloc(n == 0 ? 1 : n)) return p;
  throw std::bad_alloc();
}

void* checked_new_aligned(std::size_t n, std::align_val_t al) {
  const auto a = static_cast<std::size_t>(al);
  const std::size_t rounded = ((n == 0 ? 1 : n) + a - 1) / a * a;
  if (void* p = aligned_alloc(a, rounded)) return p;
  throw std::bad_alloc();
}

}  // namespace

void* operator new(std::size_t n) { return checked_new(n); }
void* operator new[](std::size_t n) { return checked_new(n); }
void* operator new(std::size_t n, const std::nothrow_t&) noexcept { return std::malloc(n == 0 ? 1 : n); }
void* operator new[](std::size_t n, const std::nothrow_t&) noexcept { return std::malloc(n == 0 ? 1 : n); }
void* operator new(std::size_t n, std::align_val_t al) { return checked_new_aligned(n, al); }
void* operator new[](std::size_t n, std::align_val_t al) { return checked_new_aligned(n, al); }
void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }
void operator delete(void* p, std::align_val_t) noexcept { std::free(p); }
void operator delete[](void* p, std::align_val_t) noexcept { std::free(p); }
void operator delete(void* p, std::size_t, std::align_val_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t, std::align_val_t) noexcept { std::free(p); }
