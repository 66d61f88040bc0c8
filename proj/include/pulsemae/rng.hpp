#pragma once

#include <cmath>
#include <cstdint>

namespace pmae {

// Counter-based random stream: every output is a pure function of
// (seed, stream_id, counter), so any draw can be reproduced from its key
// alone. Streams with distinct ids are independent for our purposes.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream_id, uint64_t counter = 0)
      : seed_(seed), stream_(stream_id), counter_(counter) {}

  static uint64_t mix(uint64_t seed, uint64_t stream_id, uint64_t counter) {
    uint64_t h = sm64(counter + 0x632be59bd9b4e019ULL);
    h = sm64(h ^ sm64(stream_id ^ 0x9e3779b97f4a7c15ULL));
    return sm64(h ^ sm64(seed));
  }

  uint64_t next_u64() { return mix(seed_, stream_, counter_++); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; consumes two counters per draw.
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Standard Gumbel(0,1) via -log(-log(u)).
  double gumbel() {
    double u = uniform();
    if (u < 1e-300) u = 1e-300;
    double l = -std::log(u);
    if (l < 1e-300) l = 1e-300;
    return -std::log(l);
  }

  uint64_t seed() const { return seed_; }
  uint64_t stream_id() const { return stream_; }
  uint64_t counter() const { return counter_; }
  void set_counter(uint64_t c) { counter_ = c; }

 private:
  static uint64_t sm64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t seed_;
  uint64_t stream_;
  uint64_t counter_;
};

// Fixed stream ids so unrelated consumers never collide on a counter.
namespace streams {
constexpr uint64_t kParamInit = 1;
constexpr uint64_t kMaskNoise = 2;
constexpr uint64_t kDropout = 3;
constexpr uint64_t kSceneDraw = 4;
constexpr uint64_t kOcclusion = 5;
constexpr uint64_t kShuffle = 6;
constexpr uint64_t kTest = 900;
}  // namespace streams

}  // namespace pmae
