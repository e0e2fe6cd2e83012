// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cstddef>
#include <functional>

namespace clear {

// Worker count from CLEAR_THREADS: unset -> hardware concurrency,
// 0 or 1 -> serial. Read once per process unless overridden.
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Runs body(begin, end) over disjoint contiguous slices of [0, n). Each
// index is visited by exactly one call, so bodies that write only to
// per-index outputs are bitwise independent of the thread count.
// `cost_per_index` is a rough flop estimate used to skip threading for
// small jobs.
void parallel_for(std::size_t n, std::size_t cost_per_index,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace clear
