#pragma once

// Counter-based random numbers (Philox4x32-10) for order-independent streams.
//
// Trajectory k of a run with master seed s draws from the block sequence
//   philox(key = (s_lo, s_hi), counter = (n_lo, n_hi, k_lo, k_hi)),  n = 0, 1, ...
// so its numbers depend only on (s, k), never on scheduling.

#include <array>
#include <cstdint>

namespace tcl2 {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
};

/// Uniform doubles in [0, 1) with 53 random bits, two per Philox block.
class TrajectoryStream {
 public:
  TrajectoryStream(std::uint64_t master_seed, std::uint64_t trajectory)
      : key_{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32)},
        traj_(trajectory) {}

  double uniform() {
    if (slot_ == 2) refill();
    const std::uint64_t hi = buf_[2 * slot_], lo = buf_[2 * slot_ + 1];
    ++slot_;
    return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
  }

  std::uint64_t blocks_used() const { return next_; }

 private:
  void refill() {
    buf_ = Philox4x32::block({static_cast<std::uint32_t>(next_), static_cast<std::uint32_t>(next_ >> 32),
                              static_cast<std::uint32_t>(traj_), static_cast<std::uint32_t>(traj_ >> 32)},
                             key_);
    ++next_;
    slot_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t traj_;
  std::uint64_t next_ = 0;
  Philox4x32::Counter buf_{};
  int slot_ = 2;
};

}  // namespace tcl2
