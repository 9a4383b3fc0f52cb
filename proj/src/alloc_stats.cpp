#include "dslite/alloc_stats.hpp"

#include <atomic>

namespace dslite::alloc_stats {

namespace {

std::atomic<bool> g_installed{false};
std::atomic<std::size_t> g_live{0};
std::atomic<std::size_t> g_peak{0};

}  // namespace

bool installed() { return g_installed.load(std::memory_order_relaxed); }
std::size_t live_bytes() { return g_live.load(std::memory_order_relaxed); }
std::size_t peak_bytes() { return g_peak.load(std::memory_order_relaxed); }
void reset_peak() { g_peak.store(g_live.load(std::memory_order_relaxed), std::memory_order_relaxed); }
void mark_installed() { g_installed.store(true, std::memory_order_relaxed); }

void on_alloc(std::size_t bytes) {
  const std::size_t now = g_live.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::size_t peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
}

void on_free(std::size_t bytes) { g_live.fetch_sub(bytes, std::memory_order_relaxed); }

}  // namespace dslite::alloc_stats
