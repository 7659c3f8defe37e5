#pragma once

#include <functional>
#include <string>
#include <vector>

namespace scotopic {

double mean_of(const std::vector<double>& v);
// Median with the even-count convention: average of the two middle values.
double median_of(std::vector<double> v);

// Runs fn(begin, end) over fixed-size chunks of [0, n). Chunk boundaries do
// not depend on the thread count, so any per-chunk results merged in chunk
// order are bit-stable regardless of parallelism.
void parallel_chunks(size_t n, size_t chunk, int threads,
                     const std::function<void(size_t, size_t)>& fn);

// Fixed-precision, locale-independent float formatting for CSV output.
std::string format_double(double v);

}  // namespace scotopic
