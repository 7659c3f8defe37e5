#include "scotopic/util.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace scotopic {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean: empty");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void parallel_chunks(size_t n, size_t chunk, int threads,
                     const std::function<void(size_t, size_t)>& fn) {
  if (chunk == 0) chunk = 1;
  if (threads <= 1 || n <= chunk) {
    for (size_t b = 0; b < n; b += chunk) fn(b, std::min(n, b + chunk));
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<size_t> next{0};
  const size_t n_chunks = (n + chunk - 1) / chunk;
  const int workers = std::min<int>(threads, static_cast<int>(n_chunks));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const size_t c = next.fetch_add(1);
        if (c >= n_chunks) return;
        const size_t b = c * chunk;
        fn(b, std::min(n, b + chunk));
      }
    });
  }
  for (auto& t : pool) t.join();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace scotopic
