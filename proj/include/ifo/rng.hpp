#ifndef IFO_RNG_HPP_
#define IFO_RNG_HPP_

#include <cstdint>
#include <random>

namespace ifo {

// Seeded generator wrapper. Every stochastic component owns one Rng derived
// from the run seed and a fixed stream tag, so runs are reproducible and
// components do not perturb each other's streams.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  static Rng derive(uint64_t seed, uint64_t stream) {
    // splitmix64 on (seed, stream) keeps sub-streams well separated even for
    // small consecutive seeds.
    uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return Rng(x);
  }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  float uniformf(float lo = 0.0f, float hi = 1.0f) {
    return static_cast<float>(uniform(lo, hi));
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  // In [lo, hi] inclusive.
  int randint(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }
  uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ifo

#endif  // IFO_RNG_HPP_
