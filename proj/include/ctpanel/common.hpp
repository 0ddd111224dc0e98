#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ctpanel {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

/// Malformed or inconsistent input data (files, panels, matrices).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid declarative configuration (model/design/rules files).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (unstable drift, non-PSD innovation, ...).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Quantity is mathematically undefined for this input (e.g. ICC of a
/// constant matrix). Distinct from DataError so callers can branch on it.
struct DegenerateInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// All stochastic code in the toolkit draws from this generator so that a
// fixed seed yields byte-identical output. The algorithms are pinned:
//   engine   : std::mt19937_64 (bit-exact across platforms)
//   uniform  : (x >> 11) * 2^-53  in [0, 1)
//   normal   : Box-Muller, first branch only (two uniforms per draw)
//   poisson  : Knuth multiplication method
// Sub-stream seeds are derived with splitmix64 so parallel replicates and
// members stay decoupled regardless of scheduling.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x51ED2700F4A9ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  long poisson(double rate) {
    if (rate <= 0.0) return 0;
    const double limit = std::exp(-rate);
    long k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  std::uint64_t next_u64() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// parallel_for: runs fn(0..n-1) on up to `threads` workers. Callers must
// write results into per-index slots; any reduction happens afterwards in
// index order, so results do not depend on the worker count.
// ---------------------------------------------------------------------------

inline int default_thread_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(threads <= 1 ? 1 : static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load(std::memory_order_relaxed)) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          break;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ctpanel
