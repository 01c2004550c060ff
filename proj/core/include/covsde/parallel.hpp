#pragma once

#include <cmath>
#include <cstddef>
#include <functional>

namespace covsde {

// Number of worker threads. Reads COVSDE_THREADS on every call (no caching),
// clamped to at least 1; unset or unparsable means hardware concurrency.
int worker_count();

// Runs body(i) for i in [0, count) across worker_count() threads.
// Work is handed out in contiguous chunks via an atomic cursor. Results must
// be written to per-index slots (or per-block accumulators combined in block
// order) so the output is identical for every thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

// Compensated (Kahan-Neumaier) accumulator: the correction term survives even
// when a new term exceeds the running sum in magnitude. Summing per-sample
// contributions this way, and combining per-block partials in a fixed order,
// keeps ensemble statistics byte-identical across worker counts.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      carry += (sum - t) + x;
    } else {
      carry += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace covsde
