#pragma once

#include <cstddef>
#include <functional>

namespace ngi::parallel {

// 0 selects hardware concurrency.
void set_threads(int n);
int threads();

// Runs f(i) for every i in [0, n). Work items must write to disjoint
// outputs; results are then independent of the thread count.
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace ngi::parallel
