#pragma once

// Process-wide allocation counters. They only move when an executable links
// the dslite_alloc_hook object, which replaces global operator new/delete.

#include <cstddef>

namespace dslite::alloc_stats {

bool installed();
std::size_t live_bytes();
std::size_t peak_bytes();
// Restarts peak tracking from the current live total.
void reset_peak();

// Called by the hook.
void mark_installed();
void on_alloc(std::size_t bytes);
void on_free(std::size_t bytes);

}  // namespace dslite::alloc_stats
