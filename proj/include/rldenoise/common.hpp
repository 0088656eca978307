// Shared primitives: error types, seeded randomness, small tensor types,
// bit-exact text serialization helpers.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rldenoise {

// Bad external input: malformed files, invalid configs, violated preconditions
// the caller could have checked. The CLI maps this to exit code 1.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Internal inconsistency: corrupt state, non-finite gradients, broken
// invariants. The CLI maps this to exit code 2.
struct fault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Warnings. Default sink is stderr; tests swap the handler to observe them.

inline std::function<void(const std::string&)>& warn_handler() {
  static std::function<void(const std::string&)> h = [](const std::string& m) {
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    std::fprintf(stderr, "warning: %s\n", m.c_str());
  };
  return h;
}

inline void warn(const std::string& msg) { warn_handler()(msg); }

// ---------------------------------------------------------------------------
// Seeding. One master seed fans out to per-component streams through a fixed
// splitting function (splitmix64 finalizer over FNV-1a of the component tag),
// so every run is reproducible from the single seed in the config snapshot.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t split_seed(std::uint64_t master, std::string_view tag,
                                std::uint64_t index = 0) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return mix64(master ^ mix64(h ^ mix64(index)));
}

using Rng = std::mt19937_64;

// Uniform helpers with pinned semantics (no reliance on libstdc++
// distribution internals, so streams never shift between tool versions).
inline double rand_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int rand_int(Rng& rng, int lo, int hi) {  // inclusive range
  if (hi < lo) throw fault("rand_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
  return lo + static_cast<int>(rng() % span);
}

inline double rand_uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * rand_unit(rng);
}

template <class T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct elements drawn without replacement; result sorted.
inline std::vector<int> sample_without_replacement(std::vector<int> pool,
                                                   std::size_t k, Rng& rng) {
  if (k > pool.size()) throw fault("sample_without_replacement: k > pool");
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng() % (pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

// ---------------------------------------------------------------------------
// Dense row-major matrix of doubles. All learnable tensors use this.

struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

  double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const {
    return a.data() + static_cast<std::size_t>(r) * cols;
  }
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return a[static_cast<std::size_t>(r) * cols + c];
  }
  std::size_t size() const { return a.size(); }

  void fill_uniform(Rng& rng, double lo, double hi) {
    for (double& v : a) v = rand_uniform(rng, lo, hi);
  }
};

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Bit-exact double <-> text. Checkpoints use hex floats so that
// write/read/write round-trips are byte-identical.

inline std::string hex_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  const char* p = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(p, &end);
  if (end == p) throw input_error("bad numeric literal: '" + s + "'");
  return v;
}

// Fixed-format decimal for CSV output (stable and readable, not bit-exact).
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace rldenoise
