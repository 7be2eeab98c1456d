#pragma once

#include <cstddef>
#include <functional>

namespace magtomo {

// Worker cap shared by all parallel maps. 0 means "resolve from MAGTOMO_THREADS, else hardware".
void set_thread_count(int n);
int thread_count();

// Calls body(i) for i in [0, n). Each index is visited exactly once; callers write to
// preallocated slot i so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace magtomo
