#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hawkes_ei {

// Seed/stream pair identifying one reproducible draw sequence. Replicates use
// the same seed with distinct stream indices.
struct RngContract {
  std::uint64_t seed = 0;
  std::uint64_t stream_index = 0;

  RngContract with_stream(std::uint64_t k) const { return {seed, k}; }
};

// Double-precision draws on top of mt19937_64. The transforms are written out
// here instead of using std::*_distribution so that sequences are bit-stable
// across standard library implementations.
class Rng {
 public:
  explicit Rng(RngContract c) {
    std::seed_seq seq{static_cast<std::uint32_t>(c.seed),
                      static_cast<std::uint32_t>(c.seed >> 32),
                      static_cast<std::uint32_t>(c.stream_index),
                      static_cast<std::uint32_t>(c.stream_index >> 32)};
    engine_.seed(seq);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1).
  double positive_uniform() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  // Exponential with the given rate; strictly positive.
  double exponential(double rate) { return -std::log(positive_uniform()) / rate; }

  // Knuth's product-of-uniforms sampler; fine for the modest means used here.
  std::uint64_t poisson(double mean) {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = 1.0;
    do {
      ++k;
      prod *= positive_uniform();
    } while (prod > limit);
    return k - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hawkes_ei
