#ifndef IFPROJ_RNG_HPP
#define IFPROJ_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace ifproj {

// splitmix64 finalizer; good avalanche, used both as the stream generator and
// to derive child keys.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream: output i depends only on (key, i), so draws are
// independent of which thread consumes them and streams with distinct keys
// never share state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key), ctr_(0) {}

  std::uint64_t next_u64() { return mix64(key_ ^ (0x9e3779b97f4a7c15ULL * ++ctr_)); }

  // uniform on [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform on (0, 1]
  double next_double_open() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  // Box-Muller, no cached spare (keeps the stream position a pure function of
  // the number of calls)
  double next_normal() {
    const double u1 = next_double_open();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925287 * u2);
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  // uniform integer in [0, bound) by rejection; bound > 0
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_;
};

// Hierarchical seed derivation. Every (replication, fold, learner, sweep, ...)
// gets its own stream keyed by the label path, so results do not depend on
// scheduling or on how many draws a sibling consumed.
class SeedTree {
 public:
  explicit SeedTree(std::uint64_t master) : key_(mix64(master ^ 0x5851f42d4c957f2dULL)) {}

  SeedTree child(std::uint64_t label) const {
    SeedTree t(*this);
    t.key_ = mix64(t.key_ ^ mix64(label + 0x586d184b6d2f1a7bULL));
    return t;
  }

  SeedTree child(std::initializer_list<std::uint64_t> labels) const {
    SeedTree t(*this);
    for (auto l : labels) t = t.child(l);
    return t;
  }

  std::uint64_t key() const { return key_; }
  CounterRng rng() const { return CounterRng(key_); }

 private:
  std::uint64_t key_;
};

}  // namespace ifproj

#endif
