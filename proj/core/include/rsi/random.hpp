#pragma once

#include <array>
#include <cstdint>

namespace rsi {

/**
 * @brief Counter-based random stream (Philox4x32-10).
 *
 * A stream is a 64-bit key plus a block counter; outputs depend only on
 * (key, counter), so a stream can be re-created anywhere. `split(id)`
 * derives an independent child key, which gives every (iteration, column,
 * shard) its own substream regardless of evaluation order.
 */
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed) noexcept;

  /// Child stream keyed by (this key, id). Does not advance this stream.
  RandomStream split(std::uint64_t id) const noexcept;

  std::uint64_t key() const noexcept { return key_; }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Standard normal (Box-Muller, both outputs used).
  double normal() noexcept;

private:
  struct FromKey {};
  RandomStream(FromKey, std::uint64_t key) noexcept : key_(key) {}

  void refill() noexcept;

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  unsigned used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// One Philox4x32-10 block; exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

}  // namespace rsi
