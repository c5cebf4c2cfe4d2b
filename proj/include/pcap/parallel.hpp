#pragma once

#include <cstddef>
#include <functional>

namespace pcap {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Callers write
/// results into pre-sized slots indexed by i, so output order never depends
/// on scheduling. The first exception thrown by any task is rethrown.
void parallel_for_indexed(int workers, std::size_t count,
                          const std::function<void(std::size_t)>& fn);

}  // namespace pcap
