#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random numbers for the Monte Carlo sampler. We use
// Philox4x32-10 (Salmon et al., the fixed constants below are the published
// ones) so that every (seed, replica, trial) triple owns an independent
// stream addressed purely by counters: trials can run in any order, on any
// schedule, and still produce bit-identical matrices. Gaussians come from
// Box-Muller on uniforms built as (x + 0.5) * 2^-32, which keeps them away
// from log(0) without branching.

namespace ncq {

namespace detail {

struct PhiloxState {
  uint32_t x0, x1, x2, x3;
};

inline PhiloxState philox_round(PhiloxState s, uint32_t k0, uint32_t k1) {
  const uint64_t m0 = uint64_t(0xD2511F53u) * s.x0;
  const uint64_t m1 = uint64_t(0xCD9E8D57u) * s.x2;
  const uint32_t lo0 = uint32_t(m0), hi0 = uint32_t(m0 >> 32);
  const uint32_t lo1 = uint32_t(m1), hi1 = uint32_t(m1 >> 32);
  return {hi1 ^ s.x1 ^ k0, lo1, hi0 ^ s.x3 ^ k1, lo0};
}

inline PhiloxState philox10(PhiloxState ctr, uint32_t k0, uint32_t k1) {
  for (int r = 0; r < 10; ++r) {
    ctr = philox_round(ctr, k0, k1);
    k0 += 0x9E3779B9u;  // Weyl increments from the reference implementation
    k1 += 0xBB67AE85u;
  }
  return ctr;
}

}  // namespace detail

// One stream of uniforms/gaussians. The key is the user seed, the counter is
// (block index, replica, trial); each Philox call yields a block of four
// 32-bit words which we hand out one at a time.
class RandomStream {
 public:
  RandomStream(uint64_t seed, uint32_t replica, uint32_t trial)
      : k0_(uint32_t(seed)),
        k1_(uint32_t(seed >> 32)),
        replica_(replica),
        trial_(trial) {}

  uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  // Uniform on (0, 1), strictly inside the interval.
  double next_uniform() { return (next_u32() + 0.5) * 0x1p-32; }

  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

 private:
  void refill() {
    detail::PhiloxState out = detail::philox10(
        {uint32_t(block_), uint32_t(block_ >> 32), replica_, trial_}, k0_,
        k1_);
    buf_[0] = out.x0;
    buf_[1] = out.x1;
    buf_[2] = out.x2;
    buf_[3] = out.x3;
    ++block_;
    pos_ = 0;
  }

  uint32_t k0_, k1_;
  uint32_t replica_, trial_;
  uint64_t block_ = 0;
  uint32_t buf_[4] = {0, 0, 0, 0};
  int pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ncq
