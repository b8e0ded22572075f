#ifndef CFGSENTRY_UTIL_H_
#define CFGSENTRY_UTIL_H_

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace cfgsentry {

// Seeded generator whose derived draws do not depend on the standard
// library's distribution implementations, so streams are reproducible
// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }
  // Uniform integer in [lo, hi].
  int range(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T> &v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent sub-seed, e.g. one per sample index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Shortest decimal representation that round-trips.
std::string format_double(double value);

}  // namespace cfgsentry

#endif  // CFGSENTRY_UTIL_H_
